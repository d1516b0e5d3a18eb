//! Evaluation harness: QA answering with the 5-shot prompt, judge-based
//! correctness with majority voting, the median split, Cohen's d, rank
//! correlations, and the α/N grid search over cached artifacts.
//!
//! Cohen's d uses population standard deviations (divide by M):
//!
//! ```text
//! d = (μ_easy − μ_hard) / sqrt((σ_easy² + σ_hard²) / 2)
//! ```
//!
//! The grid search is a pure replay: α and N enter only the scoring math,
//! so every cell is recomputed from cached candidates, popularity, and
//! correctness records without a single model call.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{extract_choice, Gateway, GatewayError};
use crate::prompts;
use crate::scoring::{score_question, ScoreError};
use crate::types::{CandidateSet, Question, ScoringConfig};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("need at least {needed} questions, got {got}")]
    TooFewQuestions { needed: usize, got: usize },
    #[error("accuracy group is empty")]
    EmptyGroup,
    #[error("both groups have zero variance; d is undefined")]
    ZeroVariance,
    #[error("need at least 2 non-empty model-count categories, got {0}")]
    TooFewCategories(usize),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("judge count must be odd, got {0}")]
    EvenJudgeCount(usize),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Score(#[from] ScoreError),
}

/// One judge's verdict on a generated answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub judge_id: String,
    pub correct: bool,
}

/// Per-(question, QA model) outcome: the generated answer, every judge's
/// verdict, and the majority decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub question_id: String,
    pub qa_model_id: String,
    pub answer: String,
    pub judge_verdicts: Vec<JudgeVerdict>,
    pub correct: bool,
}

/// Median-split partition of a scored question set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitResult {
    pub threshold: f64,
    pub easy_ids: BTreeSet<String>,
    pub hard_ids: BTreeSet<String>,
}

/// Cohen's d with the group statistics behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectReport {
    pub mu_easy: f64,
    pub mu_hard: f64,
    pub sigma_easy: f64,
    pub sigma_hard: f64,
    pub d: f64,
    pub acc_easy: Vec<f64>,
    pub acc_hard: Vec<f64>,
    pub m: usize,
}

/// Ask a QA model for a short answer using the 5-shot prompt at
/// temperature 0. The reply is recorded verbatim; judging handles
/// equivalence.
pub fn answer_question(
    question: &Question,
    qa_model: &str,
    gateway: &Gateway,
) -> Result<String, EvalError> {
    let request = prompts::qa_request(qa_model, &question.text);
    Ok(gateway.complete(&request)?)
}

/// One judge's yes/no verdict; unparseable replies are retried up to three
/// times, then conservatively counted as "No".
pub fn judge_once(
    question_text: &str,
    gold: &str,
    candidate_answer: &str,
    judge_model: &str,
    gateway: &Gateway,
) -> Result<bool, EvalError> {
    let content = prompts::render_gpt_eval(question_text, gold, candidate_answer);
    let request = crate::gateway::LlmRequest::new(judge_model, content);
    let mut verdict = None;
    for _ in 0..3 {
        let text = gateway.complete(&request)?;
        match extract_choice(&text, &["Yes", "No"]) {
            Ok(choice) => {
                verdict = Some(choice == "Yes");
                break;
            }
            Err(err) => log::warn!("judge {judge_model} reply unparseable: {err}"),
        }
    }
    Ok(verdict.unwrap_or_else(|| {
        log::warn!("judge {judge_model} never produced a verdict; counting as No");
        false
    }))
}

/// Judge an answer with every judge model and decide by majority.
pub fn judge_answer(
    question: &Question,
    gold: &str,
    candidate_answer: &str,
    qa_model: &str,
    judge_models: &[String],
    gateway: &Gateway,
) -> Result<EvalRecord, EvalError> {
    if judge_models.len().is_multiple_of(2) {
        return Err(EvalError::EvenJudgeCount(judge_models.len()));
    }
    let mut verdicts = Vec::with_capacity(judge_models.len());
    for judge in judge_models {
        let correct = judge_once(&question.text, gold, candidate_answer, judge, gateway)?;
        verdicts.push(JudgeVerdict {
            judge_id: judge.clone(),
            correct,
        });
    }
    let yes = verdicts.iter().filter(|v| v.correct).count();
    Ok(EvalRecord {
        question_id: question.id.clone(),
        qa_model_id: qa_model.to_string(),
        answer: candidate_answer.to_string(),
        judge_verdicts: verdicts,
        correct: yes * 2 > judge_models.len(),
    })
}

/// Partition scored questions at the median difficulty: `easy = {Diff ≤ τ}`,
/// `hard = {Diff > τ}`. With an even count τ is the mean of the two central
/// order statistics.
pub fn median_split(scores: &[(String, f64)]) -> Result<SplitResult, EvalError> {
    if scores.len() < 2 {
        return Err(EvalError::TooFewQuestions {
            needed: 2,
            got: scores.len(),
        });
    }
    let mut values: Vec<f64> = scores.iter().map(|(_, v)| *v).collect();
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = values.len() / 2;
    let threshold = if values.len().is_multiple_of(2) {
        (values[mid - 1] + values[mid]) / 2.0
    } else {
        values[mid]
    };
    let mut easy_ids = BTreeSet::new();
    let mut hard_ids = BTreeSet::new();
    for (id, value) in scores {
        if *value <= threshold {
            easy_ids.insert(id.clone());
        } else {
            hard_ids.insert(id.clone());
        }
    }
    Ok(SplitResult {
        threshold,
        easy_ids,
        hard_ids,
    })
}

/// Fraction of correct records; the group must be non-empty.
pub fn group_accuracy(records: &[&EvalRecord]) -> Result<f64, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyGroup);
    }
    let correct = records.iter().filter(|r| r.correct).count();
    Ok(correct as f64 / records.len() as f64)
}

fn population_stats(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m;
    (mean, variance.sqrt())
}

/// Standardized mean-accuracy difference between the easy and hard groups
/// across M models, with population standard deviations.
pub fn cohens_d(acc_easy: &[f64], acc_hard: &[f64]) -> Result<EffectReport, EvalError> {
    if acc_easy.len() != acc_hard.len() {
        return Err(EvalError::LengthMismatch {
            left: acc_easy.len(),
            right: acc_hard.len(),
        });
    }
    let m = acc_easy.len();
    if m < 2 {
        return Err(EvalError::TooFewQuestions { needed: 2, got: m });
    }
    let (mu_easy, sigma_easy) = population_stats(acc_easy);
    let (mu_hard, sigma_hard) = population_stats(acc_hard);
    let pooled = ((sigma_easy.powi(2) + sigma_hard.powi(2)) / 2.0).sqrt();
    if pooled == 0.0 {
        return Err(EvalError::ZeroVariance);
    }
    Ok(EffectReport {
        mu_easy,
        mu_hard,
        sigma_easy,
        sigma_hard,
        d: (mu_easy - mu_hard) / pooled,
        acc_easy: acc_easy.to_vec(),
        acc_hard: acc_hard.to_vec(),
        m,
    })
}

/// Average ranks (1-based) with ties sharing the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let shared = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = shared;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in x.iter().zip(y) {
        cov += (a - mx) * (b - my);
        vx += (a - mx).powi(2);
        vy += (b - my).powi(2);
    }
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}

/// Spearman's ρ with tied-rank averaging. Degenerate inputs (a constant
/// vector) return 0.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
    if x.len() != y.len() {
        return Err(EvalError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(EvalError::TooFewQuestions { needed: 2, got: x.len() });
    }
    Ok(pearson(&average_ranks(x), &average_ranks(y)))
}

/// Occupancy and mean difficulty of one model-count bucket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketStat {
    /// Number of models that answered correctly.
    pub correct_models: usize,
    /// Questions in the bucket.
    pub occupancy: usize,
    pub mean_difficulty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpearmanByCount {
    pub rho: f64,
    pub buckets: Vec<BucketStat>,
}

/// Bucket questions by how many models answered them correctly, average the
/// difficulty per non-empty bucket, and correlate bucket index with mean
/// difficulty. Empty buckets are skipped and reported via occupancy.
pub fn spearman_by_model_count(
    difficulties: &[(String, f64)],
    records: &[EvalRecord],
) -> Result<SpearmanByCount, EvalError> {
    let mut correct_counts: BTreeMap<&str, usize> = BTreeMap::new();
    for record in records {
        if record.correct {
            *correct_counts.entry(record.question_id.as_str()).or_insert(0) += 1;
        } else {
            correct_counts.entry(record.question_id.as_str()).or_insert(0);
        }
    }

    let mut buckets: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (id, difficulty) in difficulties {
        if let Some(&k) = correct_counts.get(id.as_str()) {
            buckets.entry(k).or_default().push(*difficulty);
        }
    }
    if buckets.len() < 2 {
        return Err(EvalError::TooFewCategories(buckets.len()));
    }

    let stats: Vec<BucketStat> = buckets
        .iter()
        .map(|(&k, diffs)| BucketStat {
            correct_models: k,
            occupancy: diffs.len(),
            mean_difficulty: diffs.iter().sum::<f64>() / diffs.len() as f64,
        })
        .collect();
    let ks: Vec<f64> = stats.iter().map(|b| b.correct_models as f64).collect();
    let means: Vec<f64> = stats.iter().map(|b| b.mean_difficulty).collect();
    Ok(SpearmanByCount {
        rho: spearman(&ks, &means)?,
        buckets: stats,
    })
}

/// Kendall's τ-b (tie-corrected) via the merge-sort inversion count.
///
/// With all of one side tied the denominator vanishes; that degenerate case
/// returns 0.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
    if x.len() != y.len() {
        return Err(EvalError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let n = x.len();
    if n < 2 {
        return Err(EvalError::TooFewQuestions { needed: 2, got: n });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        x[a].partial_cmp(&x[b])
            .unwrap()
            .then(y[a].partial_cmp(&y[b]).unwrap())
    });

    let pairs = |t: usize| (t * (t - 1) / 2) as f64;
    let n0 = pairs(n);

    // Tie corrections: joint ties (n3), x ties (n1), then y ties (n2).
    let mut n1 = 0.0;
    let mut n3 = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        n1 += pairs(j - i + 1);
        let mut a = i;
        while a <= j {
            let mut b = a;
            while b < j && y[order[b + 1]] == y[order[a]] {
                b += 1;
            }
            n3 += pairs(b - a + 1);
            a = b + 1;
        }
        i = j + 1;
    }

    let mut ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let mut n2 = 0.0;
    {
        let mut sorted = ys.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut i = 0;
        while i < n {
            let mut j = i;
            while j + 1 < n && sorted[j + 1] == sorted[i] {
                j += 1;
            }
            n2 += pairs(j - i + 1);
            i = j + 1;
        }
    }

    let swaps = count_inversions(&mut ys) as f64;
    let numerator = n0 - n1 - n2 + n3 - 2.0 * swaps;
    let denominator = ((n0 - n1) * (n0 - n2)).sqrt();
    if denominator == 0.0 {
        return Ok(0.0);
    }
    Ok(numerator / denominator)
}

/// Strict inversions (earlier > later) counted by merge sort.
fn count_inversions(values: &mut [f64]) -> u64 {
    let n = values.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let (left, right) = values.split_at_mut(mid);
    let mut inversions = count_inversions(left) + count_inversions(right);
    let mut merged = Vec::with_capacity(n);
    let (mut i, mut j) = (0, 0);
    while i < left.len() && j < right.len() {
        if left[i] <= right[j] {
            merged.push(left[i]);
            i += 1;
        } else {
            inversions += (left.len() - i) as u64;
            merged.push(right[j]);
            j += 1;
        }
    }
    merged.extend_from_slice(&left[i..]);
    merged.extend_from_slice(&right[j..]);
    values.copy_from_slice(&merged);
    inversions
}

/// Two-sided paired t-test; returns (t, p) with df = n − 1.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<(f64, f64), EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let n = a.len();
    if n < 2 {
        return Err(EvalError::TooFewQuestions { needed: 2, got: n });
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    if var == 0.0 {
        return Err(EvalError::ZeroVariance);
    }
    let t = mean / (var.sqrt() / (n as f64).sqrt());
    use statrs::distribution::{ContinuousCDF, StudentsT};
    let dist = StudentsT::new(0.0, 1.0, n as f64 - 1.0).expect("valid t distribution");
    let p = 2.0 * (1.0 - dist.cdf(t.abs()));
    Ok((t, p))
}

/// Candidate-order bias summary over a batch: rank correlations between
/// generation order, popularity, and plausibility, averaged per question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct BiasCorrelations {
    pub tau_order_popularity: f64,
    pub tau_order_plausibility: f64,
    pub tau_popularity_plausibility: f64,
    pub rho_order_popularity: f64,
    pub rho_order_plausibility: f64,
    pub rho_popularity_plausibility: f64,
    pub questions: usize,
}

pub fn popularity_bias_correlations(sets: &[&CandidateSet]) -> BiasCorrelations {
    let mut out = BiasCorrelations::default();
    let mut counted = 0usize;
    for set in sets {
        if set.candidates.len() < 2 {
            continue;
        }
        let ranks: Vec<f64> = set.candidates.iter().map(|c| c.rank as f64).collect();
        let pop: Vec<f64> = set.candidates.iter().map(|c| c.popularity).collect();
        let pls: Vec<f64> = set.candidates.iter().map(|c| c.plausibility).collect();
        let (Ok(t_op), Ok(t_ol), Ok(t_pl)) = (
            kendall_tau(&ranks, &pop),
            kendall_tau(&ranks, &pls),
            kendall_tau(&pop, &pls),
        ) else {
            continue;
        };
        let (Ok(r_op), Ok(r_ol), Ok(r_pl)) = (
            spearman(&ranks, &pop),
            spearman(&ranks, &pls),
            spearman(&pop, &pls),
        ) else {
            continue;
        };
        out.tau_order_popularity += t_op;
        out.tau_order_plausibility += t_ol;
        out.tau_popularity_plausibility += t_pl;
        out.rho_order_popularity += r_op;
        out.rho_order_plausibility += r_ol;
        out.rho_popularity_plausibility += r_pl;
        counted += 1;
    }
    if counted > 0 {
        let n = counted as f64;
        out.tau_order_popularity /= n;
        out.tau_order_plausibility /= n;
        out.tau_popularity_plausibility /= n;
        out.rho_order_popularity /= n;
        out.rho_order_plausibility /= n;
        out.rho_popularity_plausibility /= n;
    }
    out.questions = counted;
    out
}

/// Which metric a grid search optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridMetric {
    /// Maximize Cohen's d.
    CohensD,
    /// Minimize Spearman's ρ (more negative is better).
    Spearman,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub alpha: f64,
    pub n: usize,
    /// Metric value; `None` when the cell's split or variance is degenerate.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridTable {
    pub metric: GridMetric,
    pub rows: Vec<GridRow>,
    /// Best defined cell: argmax for d, argmin for ρ; ties broken by
    /// smaller N then smaller α.
    pub best: Option<GridRow>,
}

/// Evaluate the metric for one configuration over cached artifacts.
pub fn metric_for_config(
    sets: &[CandidateSet],
    records: &[EvalRecord],
    config: &ScoringConfig,
    metric: GridMetric,
) -> Result<f64, EvalError> {
    let mut difficulties = Vec::with_capacity(sets.len());
    for set in sets {
        let result = score_question(set, config)?;
        difficulties.push((set.question_id.clone(), result.difficulty));
    }
    match metric {
        GridMetric::CohensD => {
            let split = median_split(&difficulties)?;
            let models: BTreeSet<&str> =
                records.iter().map(|r| r.qa_model_id.as_str()).collect();
            let mut acc_easy = Vec::with_capacity(models.len());
            let mut acc_hard = Vec::with_capacity(models.len());
            for model in models {
                let easy: Vec<&EvalRecord> = records
                    .iter()
                    .filter(|r| r.qa_model_id == model && split.easy_ids.contains(&r.question_id))
                    .collect();
                let hard: Vec<&EvalRecord> = records
                    .iter()
                    .filter(|r| r.qa_model_id == model && split.hard_ids.contains(&r.question_id))
                    .collect();
                acc_easy.push(group_accuracy(&easy)?);
                acc_hard.push(group_accuracy(&hard)?);
            }
            Ok(cohens_d(&acc_easy, &acc_hard)?.d)
        }
        GridMetric::Spearman => Ok(spearman_by_model_count(&difficulties, records)?.rho),
    }
}

/// Replay the scoring math over every (α, N) cell. Cells whose metric is
/// undefined (degenerate split, zero variance, too few categories) record
/// no value; scoring errors (such as insufficient candidates) abort.
pub fn grid_search(
    sets: &[CandidateSet],
    records: &[EvalRecord],
    base: &ScoringConfig,
    alphas: &[f64],
    ns: &[usize],
    metric: GridMetric,
) -> Result<GridTable, EvalError> {
    let mut rows = Vec::with_capacity(alphas.len() * ns.len());
    for &alpha in alphas {
        for &n in ns {
            let config = ScoringConfig {
                alpha,
                n_candidates: n,
                ..base.clone()
            };
            let value = match metric_for_config(sets, records, &config, metric) {
                Ok(v) => Some(v),
                Err(EvalError::Score(err)) => return Err(EvalError::Score(err)),
                Err(EvalError::Gateway(err)) => return Err(EvalError::Gateway(err)),
                Err(_) => None,
            };
            rows.push(GridRow { alpha, n, value });
        }
    }

    let better = |a: &GridRow, b: &GridRow| -> bool {
        // Is a better than b?
        let (Some(va), Some(vb)) = (a.value, b.value) else {
            return b.value.is_none() && a.value.is_some();
        };
        let primary = match metric {
            GridMetric::CohensD => va > vb,
            GridMetric::Spearman => va < vb,
        };
        let equal = va == vb;
        primary || (equal && (a.n, a.alpha) < (b.n, b.alpha))
    };
    let mut best: Option<GridRow> = None;
    for row in &rows {
        if row.value.is_none() {
            continue;
        }
        match &best {
            None => best = Some(row.clone()),
            Some(current) if better(row, current) => best = Some(row.clone()),
            _ => {}
        }
    }

    Ok(GridTable { metric, rows, best })
}
