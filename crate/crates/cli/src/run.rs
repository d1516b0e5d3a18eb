//! Command implementations. Each command reads its inputs, fans work out
//! over a bounded thread pool, writes result files plus a run manifest into
//! the output directory, and reports per-question failures without aborting
//! the batch.

use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use qdaps::baselines;
use qdaps::bt::{fit_bradley_terry, strengths_to_plausibility, BtFit, DEFAULT_MAX_ITER, DEFAULT_SMOOTHING, DEFAULT_TOL};
use qdaps::datastore::{
    self, file_sha256, load_jsonl, load_questions, save_json, save_jsonl, CacheDescriptor,
    CandidateFile, LlmCache, ScoreRecord,
};
use qdaps::engine::{self, ComparisonMatrix, PairOrder};
use qdaps::eval::{self, EvalRecord};
use qdaps::gateway::{Gateway, HttpBackend, MockBackend};
use qdaps::normalize::NormalizedStringEquivalence;
use qdaps::popularity::{assign_popularity, PageviewClient};
use qdaps::scoring::score_question;
use qdaps::types::{CandidateSet, GoldPolicy, Mode, Question};

use crate::args::{Method, Resolved};

/// Per-question failure recorded in the manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FailedItem {
    pub id: String,
    pub error: String,
}

/// Written for every run; enough to reproduce the run given the cache.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub config: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset_sha256: Option<String>,
    pub llm_calls: u64,
    pub pageview_fetches: u64,
    pub cache_hits: u64,
    pub cache_misses: u64,
    pub wall_time_ms: u128,
    pub failed: Vec<FailedItem>,
}

struct ManifestBuilder {
    command: String,
    config: serde_json::Value,
    dataset_sha256: Option<String>,
    started: Instant,
    llm_calls: u64,
    pageview_fetches: u64,
    cache_hits: u64,
    cache_misses: u64,
    failed: Vec<FailedItem>,
}

impl ManifestBuilder {
    fn new(command: &str, resolved: &Resolved) -> Self {
        Self {
            command: command.to_string(),
            config: serde_json::to_value(resolved).expect("config serializes"),
            dataset_sha256: None,
            started: Instant::now(),
            llm_calls: 0,
            pageview_fetches: 0,
            cache_hits: 0,
            cache_misses: 0,
            failed: Vec::new(),
        }
    }

    fn write(self, output: &Path) -> Result<i32> {
        let failed = self.failed;
        let manifest = RunManifest {
            command: self.command,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config: self.config,
            dataset_sha256: self.dataset_sha256,
            llm_calls: self.llm_calls,
            pageview_fetches: self.pageview_fetches,
            cache_hits: self.cache_hits,
            cache_misses: self.cache_misses,
            wall_time_ms: self.started.elapsed().as_millis(),
            failed: failed.clone(),
        };
        save_json(&output.join("manifest.json"), &manifest)?;
        for item in &failed {
            log::warn!("{}: {}", item.id, item.error);
        }
        Ok(if failed.is_empty() { 0 } else { 2 })
    }
}

/// Apply `f` to every item on `workers` threads, preserving input order.
fn parallel_map<T, R, F>(items: Vec<T>, workers: usize, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync,
{
    let workers = workers.max(1);
    let queue: Mutex<std::collections::VecDeque<(usize, T)>> =
        Mutex::new(items.into_iter().enumerate().collect());
    let total = queue.lock().unwrap().len();
    let results: Mutex<Vec<Option<R>>> =
        Mutex::new((0..total).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers.min(total.max(1)) {
            scope.spawn(|| loop {
                let next = queue.lock().unwrap().pop_front();
                let Some((index, item)) = next else { break };
                let result = f(item);
                results.lock().unwrap()[index] = Some(result);
            });
        }
    });
    results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every item processed"))
        .collect()
}

fn build_gateway(resolved: &Resolved) -> Result<Gateway> {
    let gateway = if let Some(dir) = &resolved.fixtures {
        let backend = MockBackend::from_dir(dir)
            .with_context(|| format!("loading fixtures from {}", dir.display()))?;
        Gateway::new(Box::new(backend))
    } else {
        let backend = HttpBackend::from_env().map_err(|e| {
            anyhow::anyhow!("{e}; set QDAPS_LLM_BASE_URL or pass --fixtures <dir>")
        })?;
        Gateway::new(Box::new(backend))
    };
    let gateway = match std::env::var("QDAPS_LLM_BUDGET")
        .ok()
        .and_then(|v| v.parse::<u64>().ok())
    {
        Some(budget) => gateway.with_budget(budget),
        None => gateway,
    };
    Ok(gateway.with_in_flight_cap(8))
}

fn pageview_client(resolved: &Resolved) -> PageviewClient {
    let mut client = PageviewClient::from_env().offline(resolved.offline);
    if let Some(cache) = &resolved.cache_dir {
        client = client.with_cache_dir(cache.join("pageviews"));
    }
    if std::env::var(qdaps::popularity::PAGEVIEWS_BASE_URL_ENV).is_ok() {
        // Local test endpoints do not need the politeness delay.
        client = client.with_politeness(Duration::from_millis(0));
    }
    client
}

/// Filesystem-safe stem for a question id.
fn file_stem_for(id: &str) -> String {
    let safe: String = id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect();
    if safe == id {
        safe
    } else {
        format!("{safe}-{}", datastore::short_hash(id))
    }
}

fn candidate_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{}.candidates.json", file_stem_for(id)))
}

/// Load every candidate file from a directory, ordered by file name.
fn load_candidate_dir(dir: &Path) -> Result<Vec<CandidateFile>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading candidate directory {}", dir.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with(".candidates.json"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no *.candidates.json files in {}", dir.display());
    }
    paths
        .into_iter()
        .map(|p| datastore::load_json::<CandidateFile>(&p).map_err(Into::into))
        .collect()
}

/// Gold policy for one question: `--no-gold` forces the no-gold prompt,
/// otherwise the gold answer is used when present.
fn effective_policy(resolved: &Resolved, question: &Question) -> GoldPolicy {
    if resolved.no_gold || question.gold_answer.is_none() {
        GoldPolicy::WithoutGold
    } else {
        GoldPolicy::WithGold
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct PairwisePayload {
    set: CandidateSet,
    matrix: ComparisonMatrix,
    fit: BtFit,
}

struct StageCounters {
    hits: u64,
    misses: u64,
}

/// Produce (or fetch from cache) the candidate set for one question in the
/// requested mode. Pointwise and pairwise rescoring reuse the cached
/// listwise generation.
fn candidates_for_question(
    question: &Question,
    resolved: &Resolved,
    cache: Option<&LlmCache>,
    gateway: &Gateway,
    counters: &Mutex<StageCounters>,
) -> std::result::Result<CandidateSet, String> {
    let policy = effective_policy(resolved, question);
    let mut config = resolved.scoring_config();
    config.gold_policy = policy;
    // Candidate pools are always generated at the full width so any N in
    // [1, 20] can be scored later without new model calls.
    config.n_candidates = 20;

    let policy_for = |mode: &str| {
        CacheDescriptor::generation(&resolved.model, &question.text, policy, 20, mode)
    };
    let bump = |hit: bool, counters: &Mutex<StageCounters>| {
        let mut c = counters.lock().unwrap();
        if hit {
            c.hits += 1;
        } else {
            c.misses += 1;
        }
    };

    let listwise = |counters: &Mutex<StageCounters>| -> std::result::Result<CandidateSet, String> {
        let descriptor = policy_for("listwise");
        if let Some(cache) = cache {
            if let Some(entry) = cache.get_or_absent::<CandidateSet>(&descriptor) {
                bump(true, counters);
                return Ok(entry.payload);
            }
        }
        bump(false, counters);
        let (set, raw) =
            engine::generate_candidates_raw(question, &config, gateway, &NormalizedStringEquivalence)
                .map_err(|e| e.to_string())?;
        if let Some(cache) = cache {
            cache.put(&descriptor, &raw, &set).map_err(|e| e.to_string())?;
        }
        Ok(set)
    };

    match resolved.mode {
        Mode::Listwise => listwise(counters),
        Mode::Pointwise => {
            let descriptor = policy_for("pointwise");
            if let Some(cache) = cache {
                if let Some(entry) = cache.get_or_absent::<CandidateSet>(&descriptor) {
                    bump(true, counters);
                    return Ok(entry.payload);
                }
            }
            let base = listwise(counters)?;
            bump(false, counters);
            let rescored = engine::score_pointwise(question, base, &config, gateway)
                .map_err(|e| e.to_string())?;
            if let Some(cache) = cache {
                cache.put(&descriptor, "", &rescored).map_err(|e| e.to_string())?;
            }
            Ok(rescored)
        }
        Mode::Pairwise => {
            let descriptor = policy_for("pairwise");
            if let Some(cache) = cache {
                if let Some(entry) = cache.get_or_absent::<PairwisePayload>(&descriptor) {
                    bump(true, counters);
                    return Ok(entry.payload.set);
                }
            }
            let mut set = listwise(counters)?;
            bump(false, counters);
            let order = if resolved.randomize_pairs {
                PairOrder::Randomized { seed: resolved.seed }
            } else {
                PairOrder::ByRank
            };
            let matrix = engine::collect_pairwise(question, &set, &config, gateway, order)
                .map_err(|e| e.to_string())?;
            let fit = fit_bradley_terry(&matrix, DEFAULT_SMOOTHING, DEFAULT_TOL, DEFAULT_MAX_ITER)
                .map_err(|e| e.to_string())?;
            let plausibilities = strengths_to_plausibility(&fit);
            for (candidate, pls) in set.candidates.iter_mut().zip(&plausibilities) {
                candidate.plausibility = *pls;
            }
            set.mode = Mode::Pairwise;
            if let Some(cache) = cache {
                let payload = PairwisePayload {
                    set: set.clone(),
                    matrix,
                    fit,
                };
                cache.put(&descriptor, "", &payload).map_err(|e| e.to_string())?;
            }
            Ok(set)
        }
    }
}

pub fn cmd_generate(resolved: &Resolved) -> Result<i32> {
    let mut manifest = ManifestBuilder::new("generate", resolved);
    let mut questions = load_questions(&resolved.input)?;
    if let Some(k) = resolved.sample {
        questions = datastore::stratified_sample(&questions, k, resolved.seed)?;
    }
    manifest.dataset_sha256 = Some(file_sha256(&resolved.input)?);
    let gateway = build_gateway(resolved)?;
    let cache = resolved.cache_dir.as_ref().map(|dir| LlmCache::new(dir));
    std::fs::create_dir_all(&resolved.output)?;

    let counters = Mutex::new(StageCounters { hits: 0, misses: 0 });
    let outcomes = parallel_map(questions, resolved.parallelism, |question| {
        let outcome =
            candidates_for_question(&question, resolved, cache.as_ref(), &gateway, &counters);
        (question, outcome)
    });

    for (question, outcome) in outcomes {
        match outcome {
            Ok(set) => {
                let file = CandidateFile {
                    question: question.clone(),
                    set,
                    popularity_resolved: false,
                    popularity_convention: None,
                };
                save_json(&candidate_path(&resolved.output, &question.id), &file)?;
            }
            Err(error) => manifest.failed.push(FailedItem {
                id: question.id.clone(),
                error,
            }),
        }
    }

    let counters = counters.into_inner().unwrap();
    manifest.llm_calls = gateway.calls_made();
    manifest.cache_hits = counters.hits;
    manifest.cache_misses = counters.misses;
    manifest.write(&resolved.output)
}

pub fn cmd_popularity(resolved: &Resolved) -> Result<i32> {
    let mut manifest = ManifestBuilder::new("popularity", resolved);
    let files = load_candidate_dir(&resolved.input)?;
    let client = pageview_client(resolved);
    std::fs::create_dir_all(&resolved.output)?;

    let outcomes = parallel_map(files, resolved.parallelism.min(4), |mut file| {
        let mut pool = Vec::with_capacity(file.set.candidates.len());
        for candidate in &file.set.candidates {
            match client.fetch_monthly_views(&candidate.answer) {
                Ok(series) => pool.push(series),
                Err(err) => return (file.question.id.clone(), Err(err.to_string())),
            }
        }
        let assignment = assign_popularity(&pool);
        for (candidate, entry) in file.set.candidates.iter_mut().zip(&assignment.entries) {
            candidate.popularity = entry.popularity;
        }
        file.popularity_resolved = true;
        file.popularity_convention = Some(assignment.convention);
        (file.question.id.clone(), Ok(file))
    });

    for (id, outcome) in outcomes {
        match outcome {
            Ok(file) => save_json(&candidate_path(&resolved.output, &id), &file)?,
            Err(error) => manifest.failed.push(FailedItem { id, error }),
        }
    }
    manifest.pageview_fetches = client.fetches_made();
    manifest.write(&resolved.output)
}

pub fn cmd_score(resolved: &Resolved) -> Result<i32> {
    let mut manifest = ManifestBuilder::new("score", resolved);
    std::fs::create_dir_all(&resolved.output)?;
    let config = resolved.scoring_config();

    // Candidate-based methods read a candidates directory; text-only
    // baselines accept either that or a plain dataset file.
    let inputs: Vec<(Question, Option<CandidateFile>)> = if resolved.input.is_dir() {
        load_candidate_dir(&resolved.input)?
            .into_iter()
            .map(|f| (f.question.clone(), Some(f)))
            .collect()
    } else {
        manifest.dataset_sha256 = Some(file_sha256(&resolved.input)?);
        if matches!(resolved.method, Method::Qdaps | Method::Avg) {
            bail!(
                "--method {} needs a candidates directory as --input",
                resolved.method.as_str()
            );
        }
        load_questions(&resolved.input)?
            .into_iter()
            .map(|q| (q, None))
            .collect()
    };

    let mut records: Vec<ScoreRecord> = Vec::with_capacity(inputs.len());
    match resolved.method {
        Method::Qdaps | Method::Avg => {
            for (question, file) in &inputs {
                let file = file.as_ref().expect("candidate input");
                if config.debias && !file.popularity_resolved {
                    manifest.failed.push(FailedItem {
                        id: question.id.clone(),
                        error: "popularity not resolved; run the popularity stage or pass --no-debias"
                            .into(),
                    });
                    continue;
                }
                let outcome: std::result::Result<ScoreRecord, String> = match resolved.method {
                    Method::Qdaps => score_question(&file.set, &config)
                        .map(|result| ScoreRecord {
                            question: question.clone(),
                            method: "qdaps".into(),
                            difficulty: result.difficulty,
                            detail: Some(result),
                        })
                        .map_err(|e| e.to_string()),
                    _ => baselines::avg_plausibility(&file.set, &config)
                        .map(|value| ScoreRecord {
                            question: question.clone(),
                            method: "avg".into(),
                            difficulty: value,
                            detail: None,
                        })
                        .map_err(|e| e.to_string()),
                };
                match outcome {
                    Ok(record) => records.push(record),
                    Err(error) => manifest.failed.push(FailedItem {
                        id: question.id.clone(),
                        error,
                    }),
                }
            }
        }
        Method::Fk | Method::Fog => {
            for (question, _) in &inputs {
                let value = match resolved.method {
                    Method::Fk => baselines::flesch_kincaid_grade(&question.text),
                    _ => baselines::gunning_fog(&question.text),
                };
                match value {
                    Ok(difficulty) => records.push(ScoreRecord {
                        question: question.clone(),
                        method: resolved.method.as_str().into(),
                        difficulty,
                        detail: None,
                    }),
                    Err(err) => manifest.failed.push(FailedItem {
                        id: question.id.clone(),
                        error: err.to_string(),
                    }),
                }
            }
        }
        Method::Prompt => {
            let gateway = build_gateway(resolved)?;
            let cache = resolved.cache_dir.as_ref().map(|dir| LlmCache::new(dir));
            for (question, _) in &inputs {
                let descriptor =
                    CacheDescriptor::prompt_difficulty(&resolved.model, &question.text);
                let cached = cache
                    .as_ref()
                    .and_then(|c| c.get_or_absent::<f64>(&descriptor));
                let value = match cached {
                    Some(entry) => {
                        manifest.cache_hits += 1;
                        Ok(entry.payload)
                    }
                    None => {
                        manifest.cache_misses += 1;
                        match baselines::prompt_difficulty(&question.text, &config, &gateway) {
                            Ok(value) => {
                                if let Some(cache) = &cache {
                                    let _ = cache.put(&descriptor, "", &value);
                                }
                                Ok(value)
                            }
                            Err(err) => Err(err),
                        }
                    }
                };
                match value {
                    Ok(difficulty) => records.push(ScoreRecord {
                        question: question.clone(),
                        method: "prompt".into(),
                        difficulty,
                        detail: None,
                    }),
                    Err(err) => manifest.failed.push(FailedItem {
                        id: question.id.clone(),
                        error: err.to_string(),
                    }),
                }
            }
            manifest.llm_calls = gateway.calls_made();
        }
        Method::Popularity => {
            let client = pageview_client(resolved);
            let mut batch: Vec<(usize, qdaps::popularity::PageviewSeries)> = Vec::new();
            for (index, (question, _)) in inputs.iter().enumerate() {
                let Some(gold) = &question.gold_answer else {
                    manifest.failed.push(FailedItem {
                        id: question.id.clone(),
                        error: "popularity baseline needs a gold answer".into(),
                    });
                    continue;
                };
                match client.fetch_monthly_views(gold) {
                    Ok(series) => batch.push((index, series)),
                    Err(err) => manifest.failed.push(FailedItem {
                        id: question.id.clone(),
                        error: err.to_string(),
                    }),
                }
            }
            let series: Vec<_> = batch.iter().map(|(_, s)| s.clone()).collect();
            let proxies = baselines::popularity_baseline(&series);
            for ((index, _), proxy) in batch.iter().zip(proxies) {
                let (question, _) = &inputs[*index];
                records.push(ScoreRecord {
                    question: question.clone(),
                    method: "popularity".into(),
                    difficulty: proxy,
                    detail: None,
                });
            }
            manifest.pageview_fetches = client.fetches_made();
        }
    }

    save_jsonl(&resolved.output.join("results.jsonl"), &records)?;
    let mean = if records.is_empty() {
        0.0
    } else {
        records.iter().map(|r| r.difficulty).sum::<f64>() / records.len() as f64
    };
    save_json(
        &resolved.output.join("summary.json"),
        &serde_json::json!({
            "method": resolved.method.as_str(),
            "questions": records.len(),
            "mean_difficulty": mean,
            "alpha": resolved.alpha,
            "n": resolved.n,
            "debias": !resolved.no_debias,
        }),
    )?;
    manifest.write(&resolved.output)
}

#[derive(Debug, Serialize)]
struct ModelAccuracy {
    model: String,
    acc_easy: f64,
    acc_hard: f64,
}

pub fn cmd_evaluate(resolved: &Resolved) -> Result<i32> {
    let mut manifest = ManifestBuilder::new("evaluate", resolved);
    std::fs::create_dir_all(&resolved.output)?;
    let scores: Vec<ScoreRecord> = load_jsonl(&resolved.input)?;
    if scores.is_empty() {
        bail!("no score records in {}", resolved.input.display());
    }

    let records: Vec<EvalRecord> = match &resolved.records {
        Some(path) => load_jsonl(path)?,
        None => {
            if resolved.qa_models.is_empty() {
                bail!("--qa-models is required when --records is not given");
            }
            let judges = if resolved.judges.is_empty() {
                bail!("--judges is required when --records is not given");
            } else {
                resolved.judges.clone()
            };
            if judges.len() % 2 == 0 {
                bail!("judge count must be odd, got {}", judges.len());
            }
            let gateway = build_gateway(resolved)?;
            let cache = resolved.cache_dir.as_ref().map(|dir| LlmCache::new(dir));
            let counters = Mutex::new(StageCounters { hits: 0, misses: 0 });

            let mut work = Vec::new();
            for score in &scores {
                if score.question.gold_answer.is_none() {
                    manifest.failed.push(FailedItem {
                        id: score.question.id.clone(),
                        error: "evaluation needs a gold answer for judging".into(),
                    });
                    continue;
                }
                for model in &resolved.qa_models {
                    work.push((score.question.clone(), model.clone()));
                }
            }
            let outcomes = parallel_map(work, resolved.parallelism, |(question, model)| {
                let result = answer_and_judge(
                    &question,
                    &model,
                    &judges,
                    &gateway,
                    cache.as_ref(),
                    &counters,
                );
                (question.id.clone(), model, result)
            });
            let mut records = Vec::with_capacity(outcomes.len());
            for (id, model, outcome) in outcomes {
                match outcome {
                    Ok(record) => records.push(record),
                    Err(error) => manifest.failed.push(FailedItem {
                        id: format!("{id}/{model}"),
                        error,
                    }),
                }
            }
            let counters = counters.into_inner().unwrap();
            manifest.cache_hits = counters.hits;
            manifest.cache_misses = counters.misses;
            manifest.llm_calls = gateway.calls_made();
            records
        }
    };

    let evaluated_ids: std::collections::BTreeSet<&str> =
        records.iter().map(|r| r.question_id.as_str()).collect();
    let difficulties: Vec<(String, f64)> = scores
        .iter()
        .filter(|s| evaluated_ids.contains(s.question.id.as_str()))
        .map(|s| (s.question.id.clone(), s.difficulty))
        .collect();

    let split = eval::median_split(&difficulties)?;
    let models: Vec<String> = {
        let mut m: Vec<String> = records.iter().map(|r| r.qa_model_id.clone()).collect();
        m.sort();
        m.dedup();
        m
    };
    let mut acc_easy = Vec::with_capacity(models.len());
    let mut acc_hard = Vec::with_capacity(models.len());
    for model in &models {
        let easy: Vec<&EvalRecord> = records
            .iter()
            .filter(|r| r.qa_model_id == *model && split.easy_ids.contains(&r.question_id))
            .collect();
        let hard: Vec<&EvalRecord> = records
            .iter()
            .filter(|r| r.qa_model_id == *model && split.hard_ids.contains(&r.question_id))
            .collect();
        acc_easy.push(eval::group_accuracy(&easy)?);
        acc_hard.push(eval::group_accuracy(&hard)?);
    }
    let effect = eval::cohens_d(&acc_easy, &acc_hard)?;
    let spearman = eval::spearman_by_model_count(&difficulties, &records)?;

    let sets: Vec<&CandidateSet> = scores
        .iter()
        .filter_map(|s| s.detail.as_ref().map(|d| &d.candidates))
        .collect();
    let bias = (!sets.is_empty()).then(|| eval::popularity_bias_correlations(&sets));

    save_jsonl(&resolved.output.join("records.jsonl"), &records)?;
    let per_model: Vec<ModelAccuracy> = models
        .iter()
        .zip(acc_easy.iter().zip(&acc_hard))
        .map(|(model, (easy, hard))| ModelAccuracy {
            model: model.clone(),
            acc_easy: *easy,
            acc_hard: *hard,
        })
        .collect();
    save_json(
        &resolved.output.join("summary.json"),
        &serde_json::json!({
            "questions": difficulties.len(),
            "threshold": split.threshold,
            "easy": split.easy_ids.len(),
            "hard": split.hard_ids.len(),
            "mu_easy": effect.mu_easy,
            "mu_hard": effect.mu_hard,
            "sigma_easy": effect.sigma_easy,
            "sigma_hard": effect.sigma_hard,
            "cohens_d": effect.d,
            "spearman_rho": spearman.rho,
            "rho_buckets": spearman.buckets,
            "per_model": per_model,
            "popularity_bias": bias,
        }),
    )?;
    manifest.write(&resolved.output)
}

fn answer_and_judge(
    question: &Question,
    qa_model: &str,
    judges: &[String],
    gateway: &Gateway,
    cache: Option<&LlmCache>,
    counters: &Mutex<StageCounters>,
) -> std::result::Result<EvalRecord, String> {
    let gold = question.gold_answer.as_deref().expect("gold checked upstream");
    let bump = |hit: bool| {
        let mut c = counters.lock().unwrap();
        if hit {
            c.hits += 1;
        } else {
            c.misses += 1;
        }
    };

    let qa_descriptor = CacheDescriptor::qa(qa_model, &question.text);
    let answer = match cache.and_then(|c| c.get_or_absent::<String>(&qa_descriptor)) {
        Some(entry) => {
            bump(true);
            entry.payload
        }
        None => {
            bump(false);
            let answer =
                eval::answer_question(question, qa_model, gateway).map_err(|e| e.to_string())?;
            if let Some(cache) = cache {
                cache
                    .put(&qa_descriptor, &answer, &answer)
                    .map_err(|e| e.to_string())?;
            }
            answer
        }
    };

    let mut verdicts = Vec::with_capacity(judges.len());
    for judge in judges {
        let descriptor = CacheDescriptor::judge(judge, &question.text, gold, &answer);
        let raw = match cache.and_then(|c| c.get_or_absent::<String>(&descriptor)) {
            Some(entry) => {
                bump(true);
                entry.payload
            }
            None => {
                bump(false);
                // The raw reply is cached rather than the boolean so the
                // verdict extraction stays replayable.
                let content = qdaps::prompts::render_gpt_eval(&question.text, gold, &answer);
                let request = qdaps::gateway::LlmRequest::new(judge, content);
                let mut text = String::new();
                for _ in 0..3 {
                    text = gateway.complete(&request).map_err(|e| e.to_string())?;
                    if qdaps::gateway::extract_choice(&text, &["Yes", "No"]).is_ok() {
                        break;
                    }
                }
                if let Some(cache) = cache {
                    cache.put(&descriptor, &text, &text).map_err(|e| e.to_string())?;
                }
                text
            }
        };
        let correct = qdaps::gateway::extract_choice(&raw, &["Yes", "No"])
            .map(|choice| choice == "Yes")
            .unwrap_or_else(|_| {
                log::warn!(
                    "judge {judge} never produced a verdict for {}; counting as No",
                    question.id
                );
                false
            });
        verdicts.push(eval::JudgeVerdict {
            judge_id: judge.clone(),
            correct,
        });
    }
    let yes = verdicts.iter().filter(|v| v.correct).count();
    Ok(EvalRecord {
        question_id: question.id.clone(),
        qa_model_id: qa_model.to_string(),
        answer,
        judge_verdicts: verdicts,
        correct: yes * 2 > judges.len(),
    })
}

pub fn cmd_gridsearch(resolved: &Resolved) -> Result<i32> {
    let manifest = ManifestBuilder::new("gridsearch", resolved);
    std::fs::create_dir_all(&resolved.output)?;
    let files = load_candidate_dir(&resolved.input)?;
    let Some(records_path) = &resolved.records else {
        bail!("--records is required for gridsearch");
    };
    let records: Vec<EvalRecord> = load_jsonl(records_path)?;

    let sets: Vec<CandidateSet> = files.into_iter().map(|f| f.set).collect();
    let base = resolved.scoring_config();
    let alphas: Vec<f64> = (0..=100).map(|k| k as f64 / 100.0).collect();
    let ns: Vec<usize> = (1..=20).collect();
    let table = eval::grid_search(&sets, &records, &base, &alphas, &ns, resolved.metric)?;

    let mut csv = String::from("alpha,n,value\n");
    for row in &table.rows {
        match row.value {
            Some(v) => csv.push_str(&format!("{},{},{}\n", row.alpha, row.n, v)),
            None => csv.push_str(&format!("{},{},\n", row.alpha, row.n)),
        }
    }
    datastore::atomic_write(&resolved.output.join("grid.csv"), csv.as_bytes())?;
    save_json(
        &resolved.output.join("argbest.json"),
        &serde_json::json!({
            "metric": resolved.metric,
            "best": table.best,
            "rows": table.rows.len(),
            "table": "grid.csv",
        }),
    )?;
    manifest.write(&resolved.output)
}
