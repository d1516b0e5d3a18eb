//! Python bindings for the difficulty-scoring core: canonicalization,
//! debiasing and entropy scoring, Bradley-Terry fitting, popularity
//! normalization, readability baselines, and the evaluation statistics.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use qdaps::engine::ComparisonMatrix;
use qdaps::popularity::PageviewSeries;
use qdaps::types::{Candidate, CandidateSet, Mode, ScoringConfig, SelectionPolicy};

fn value_err<E: std::fmt::Display>(err: E) -> PyErr {
    PyValueError::new_err(err.to_string())
}

/// Canonicalize an answer string (lowercase, NFC, punctuation and articles
/// stripped, whitespace collapsed).
#[pyfunction]
fn normalize_answer(text: &str) -> String {
    qdaps::normalize::normalize_answer(text)
}

/// True iff both answers canonicalize to the same string.
#[pyfunction]
fn answers_equivalent(a: &str, b: &str) -> bool {
    qdaps::normalize::answers_equivalent(a, b)
}

/// Debias one plausibility score: `pls * (1 - alpha * pop)`.
#[pyfunction]
fn debias(pls: f64, pop: f64, alpha: f64) -> f64 {
    qdaps::scoring::debias(pls, pop, alpha)
}

/// Normalize scores into a distribution; returns (shares, degenerate).
#[pyfunction]
fn normalize_shares(values: Vec<f64>) -> PyResult<(Vec<f64>, bool)> {
    if values.is_empty() {
        return Err(PyValueError::new_err("normalize_shares needs a non-empty list"));
    }
    Ok(qdaps::scoring::normalize_shares(&values))
}

/// Shannon entropy of a share vector, in bits.
#[pyfunction]
fn entropy(shares: Vec<f64>) -> f64 {
    qdaps::scoring::entropy(&shares)
}

/// Scale entropy to [0, 1] by log2(n).
#[pyfunction]
fn difficulty(h: f64, n: usize) -> f64 {
    qdaps::scoring::difficulty(h, n)
}

/// Score one candidate pool end to end; returns a dict with the entropy,
/// difficulty, selected debiased scores, and shares.
#[pyfunction]
#[pyo3(signature = (plausibilities, popularities=None, alpha=0.5, n=None, debias=true))]
fn score_candidates(
    py: Python<'_>,
    plausibilities: Vec<f64>,
    popularities: Option<Vec<f64>>,
    alpha: f64,
    n: Option<usize>,
    debias: bool,
) -> PyResult<Py<PyDict>> {
    let pops = popularities.unwrap_or_else(|| vec![0.0; plausibilities.len()]);
    if pops.len() != plausibilities.len() {
        return Err(PyValueError::new_err(
            "plausibilities and popularities must have equal length",
        ));
    }
    let set = CandidateSet {
        question_id: "py".into(),
        candidates: plausibilities
            .iter()
            .zip(&pops)
            .enumerate()
            .map(|(i, (&pls, &pop))| {
                let mut c = Candidate::new(format!("candidate {i}"), i + 1, pls);
                c.popularity = pop;
                c
            })
            .collect(),
        mode: Mode::Listwise,
        gold_provided: false,
        model_id: "py".into(),
        final_temperature: 0.0,
        attempts: 1,
    };
    let config = ScoringConfig {
        alpha,
        n_candidates: n.unwrap_or(plausibilities.len()),
        debias,
        selection: SelectionPolicy::TopPlausibility,
        ..ScoringConfig::default()
    };
    let result = qdaps::scoring::score_question(&set, &config).map_err(value_err)?;
    let out = PyDict::new(py);
    out.set_item("entropy", result.entropy)?;
    out.set_item("difficulty", result.difficulty)?;
    out.set_item("n_used", result.n_used)?;
    out.set_item("degenerate_shares", result.degenerate_shares)?;
    let debiased: Vec<Option<f64>> = result
        .candidates
        .candidates
        .iter()
        .map(|c| c.debiased)
        .collect();
    let shares: Vec<Option<f64>> = result.candidates.candidates.iter().map(|c| c.share).collect();
    out.set_item("debiased", debiased)?;
    out.set_item("shares", shares)?;
    Ok(out.into())
}

/// Fit Bradley-Terry strengths to a square win matrix.
#[pyfunction]
#[pyo3(signature = (wins, smoothing=0.5, tol=1e-8, max_iter=10_000))]
fn fit_bradley_terry(
    py: Python<'_>,
    wins: Vec<Vec<u32>>,
    smoothing: f64,
    tol: f64,
    max_iter: usize,
) -> PyResult<Py<PyDict>> {
    let n = wins.len();
    if wins.iter().any(|row| row.len() != n) {
        return Err(PyValueError::new_err("wins must be a square matrix"));
    }
    let matrix = ComparisonMatrix { n, wins };
    let fit =
        qdaps::bt::fit_bradley_terry(&matrix, smoothing, tol, max_iter).map_err(value_err)?;
    let out = PyDict::new(py);
    out.set_item("plausibilities", qdaps::bt::strengths_to_plausibility(&fit))?;
    out.set_item("strengths", fit.strengths)?;
    out.set_item("iterations", fit.iterations)?;
    out.set_item("converged", fit.converged)?;
    Ok(out.into())
}

/// Winsorize (IQR rule) and min-max normalize raw page-view totals within a
/// pool; `None` marks an unresolved answer, which gets popularity 0.
#[pyfunction]
fn assign_popularity(totals: Vec<Option<u64>>) -> PyResult<Vec<f64>> {
    if totals.is_empty() {
        return Err(PyValueError::new_err("pool must be non-empty"));
    }
    let pool: Vec<PageviewSeries> = totals
        .iter()
        .enumerate()
        .map(|(i, total)| match total {
            Some(views) => PageviewSeries {
                title: format!("t{i}"),
                monthly_views: vec![("201501".into(), *views)],
                resolved: true,
            },
            None => PageviewSeries::unresolved(format!("t{i}")),
        })
        .collect();
    Ok(qdaps::popularity::assign_popularity(&pool)
        .entries
        .into_iter()
        .map(|e| e.popularity)
        .collect())
}

/// Flesch-Kincaid grade level.
#[pyfunction]
fn flesch_kincaid_grade(text: &str) -> PyResult<f64> {
    qdaps::baselines::flesch_kincaid_grade(text).map_err(value_err)
}

/// Gunning fog index.
#[pyfunction]
fn gunning_fog(text: &str) -> PyResult<f64> {
    qdaps::baselines::gunning_fog(text).map_err(value_err)
}

/// Cohen's d between easy and hard per-model accuracies (population sigma).
#[pyfunction]
fn cohens_d(py: Python<'_>, acc_easy: Vec<f64>, acc_hard: Vec<f64>) -> PyResult<Py<PyDict>> {
    let report = qdaps::eval::cohens_d(&acc_easy, &acc_hard).map_err(value_err)?;
    let out = PyDict::new(py);
    out.set_item("d", report.d)?;
    out.set_item("mu_easy", report.mu_easy)?;
    out.set_item("mu_hard", report.mu_hard)?;
    out.set_item("sigma_easy", report.sigma_easy)?;
    out.set_item("sigma_hard", report.sigma_hard)?;
    Ok(out.into())
}

/// Median split of (id, difficulty) pairs: easy = below or at the median.
#[pyfunction]
fn median_split(py: Python<'_>, scores: Vec<(String, f64)>) -> PyResult<Py<PyDict>> {
    let split = qdaps::eval::median_split(&scores).map_err(value_err)?;
    let out = PyDict::new(py);
    out.set_item("threshold", split.threshold)?;
    out.set_item("easy", split.easy_ids.into_iter().collect::<Vec<_>>())?;
    out.set_item("hard", split.hard_ids.into_iter().collect::<Vec<_>>())?;
    Ok(out.into())
}

/// Kendall's tau-b.
#[pyfunction]
fn kendall_tau(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    qdaps::eval::kendall_tau(&x, &y).map_err(value_err)
}

/// Spearman's rho with tied-rank averaging.
#[pyfunction]
fn spearman(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    qdaps::eval::spearman(&x, &y).map_err(value_err)
}

/// Parse the first well-formed candidate JSON array out of model output.
#[pyfunction]
fn extract_candidate_list(py: Python<'_>, text: &str) -> PyResult<Vec<Py<PyDict>>> {
    let records = qdaps::gateway::extract_candidate_list(text).map_err(value_err)?;
    records
        .into_iter()
        .map(|r| {
            let out = PyDict::new(py);
            out.set_item("answer", r.answer)?;
            out.set_item("plausibility", r.plausibility)?;
            out.set_item("justification", r.justification)?;
            Ok(out.into())
        })
        .collect()
}

/// Extract a verdict token from model output.
#[pyfunction]
fn extract_choice(text: &str, choices: Vec<String>) -> PyResult<String> {
    let refs: Vec<&str> = choices.iter().map(|s| s.as_str()).collect();
    qdaps::gateway::extract_choice(text, &refs).map_err(value_err)
}

#[pymodule]
fn qdaps_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(normalize_answer, m)?)?;
    m.add_function(wrap_pyfunction!(answers_equivalent, m)?)?;
    m.add_function(wrap_pyfunction!(debias, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_shares, m)?)?;
    m.add_function(wrap_pyfunction!(entropy, m)?)?;
    m.add_function(wrap_pyfunction!(difficulty, m)?)?;
    m.add_function(wrap_pyfunction!(score_candidates, m)?)?;
    m.add_function(wrap_pyfunction!(fit_bradley_terry, m)?)?;
    m.add_function(wrap_pyfunction!(assign_popularity, m)?)?;
    m.add_function(wrap_pyfunction!(flesch_kincaid_grade, m)?)?;
    m.add_function(wrap_pyfunction!(gunning_fog, m)?)?;
    m.add_function(wrap_pyfunction!(cohens_d, m)?)?;
    m.add_function(wrap_pyfunction!(median_split, m)?)?;
    m.add_function(wrap_pyfunction!(kendall_tau, m)?)?;
    m.add_function(wrap_pyfunction!(spearman, m)?)?;
    m.add_function(wrap_pyfunction!(extract_candidate_list, m)?)?;
    m.add_function(wrap_pyfunction!(extract_choice, m)?)?;
    Ok(())
}
