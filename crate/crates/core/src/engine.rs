//! Candidate generation: prompt construction for all three estimation modes
//! and both gold policies, validation of model output, and the
//! temperature-escalating retry loop.
//!
//! A failed attempt (parse failure or any validation failure) bumps the
//! request temperature by 0.1 and regenerates; the temperature of attempt
//! k (0-based) is exactly `base + 0.1 * k`. The loop is capped at
//! `max_attempts` so a persistently misbehaving model cannot stall a batch.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{
    extract_candidate_list, extract_choice, Gateway, GatewayError, LlmRequest, RawCandidateRecord,
};
use crate::normalize::AnswerEquivalence;
use crate::prompts;
use crate::types::{Candidate, CandidateSet, GoldPolicy, Mode, Question, ScoringConfig};

/// One validation failure; indices are 0-based positions in the parsed list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ValidationFailure {
    WrongCount { expected: usize, got: usize },
    NonNumeric { index: usize },
    OutOfRange { index: usize },
    Duplicate { first: usize, second: usize },
    ContainsGold { index: usize },
}

/// Outcome of validating a parsed candidate list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub failures: Vec<ValidationFailure>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Why a single generation attempt was rejected.
#[derive(Debug, Clone, PartialEq)]
pub enum AttemptFailure {
    Parse(String),
    Validation(ValidationReport),
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("gold answer required for this prompt but absent from question {0}")]
    MissingGold(String),
    #[error("retries exhausted after {attempts} attempts: {last:?}")]
    ExhaustedRetries {
        attempts: usize,
        last: AttemptFailure,
    },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("{0}")]
    Invalid(String),
}

/// Pairwise win counts: `wins[i][j]` is the number of times candidate `i`
/// was preferred over candidate `j`. The diagonal is always zero; cycles are
/// data, not errors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonMatrix {
    pub n: usize,
    pub wins: Vec<Vec<u32>>,
}

impl ComparisonMatrix {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            wins: vec![vec![0; n]; n],
        }
    }

    /// Total comparisons recorded for pair {i, j}.
    pub fn comparisons(&self, i: usize, j: usize) -> u32 {
        self.wins[i][j] + self.wins[j][i]
    }

    pub fn total_comparisons(&self) -> u32 {
        let mut total = 0;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                total += self.comparisons(i, j);
            }
        }
        total
    }
}

/// How pairwise comparisons present the two candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairOrder {
    /// Lower rank is always "Candidate Answer 1" (reproducible default).
    ByRank,
    /// Shuffle each pair's presentation with a seeded generator to mitigate
    /// position bias.
    Randomized { seed: u64 },
}

/// Render the generation request for a question under the given policy.
pub fn build_generation_prompt(
    question: &Question,
    n: usize,
    policy: GoldPolicy,
    config: &ScoringConfig,
    temperature: f64,
) -> Result<LlmRequest, EngineError> {
    if !(1..=20).contains(&n) {
        return Err(EngineError::Invalid(format!("n must be in [1, 20], got {n}")));
    }
    let content = match policy {
        GoldPolicy::WithGold => {
            let gold = question
                .gold_answer
                .as_deref()
                .ok_or_else(|| EngineError::MissingGold(question.id.clone()))?;
            prompts::render_listwise_with_gold(&question.text, gold, n)
        }
        GoldPolicy::WithoutGold => prompts::render_listwise_no_gold(&question.text, n),
    };
    let mut request = LlmRequest::new(&config.model_id, content);
    request.temperature = temperature;
    Ok(request)
}

/// Check a parsed candidate list against the generation contract. Failures
/// are collected in check order: count, numeric range, duplicates, gold
/// leakage. They are data, not errors.
pub fn validate(
    records: &[RawCandidateRecord],
    n: usize,
    gold: Option<&str>,
    equivalence: &dyn AnswerEquivalence,
) -> ValidationReport {
    let mut failures = Vec::new();
    if records.len() != n {
        failures.push(ValidationFailure::WrongCount {
            expected: n,
            got: records.len(),
        });
    }
    for (i, record) in records.iter().enumerate() {
        match record.plausibility {
            None => failures.push(ValidationFailure::NonNumeric { index: i }),
            Some(score) if score <= 0.0 || score > 100.0 => {
                failures.push(ValidationFailure::OutOfRange { index: i })
            }
            Some(_) => {}
        }
    }
    for i in 0..records.len() {
        for j in (i + 1)..records.len() {
            if equivalence.equivalent(&records[i].answer, &records[j].answer) {
                failures.push(ValidationFailure::Duplicate { first: i, second: j });
            }
        }
    }
    if let Some(gold) = gold {
        for (i, record) in records.iter().enumerate() {
            if equivalence.equivalent(&record.answer, gold) {
                failures.push(ValidationFailure::ContainsGold { index: i });
            }
        }
    }
    ValidationReport { failures }
}

/// Temperature of the attempt with the given 0-based index.
pub fn attempt_temperature(base: f64, attempt_index: usize) -> f64 {
    base + 0.1 * attempt_index as f64
}

/// Run the generate → extract → validate loop until a valid candidate list
/// is produced or `config.max_attempts` is reached.
pub fn generate_candidates(
    question: &Question,
    config: &ScoringConfig,
    gateway: &Gateway,
    equivalence: &dyn AnswerEquivalence,
) -> Result<CandidateSet, EngineError> {
    generate_candidates_raw(question, config, gateway, equivalence).map(|(set, _)| set)
}

/// [`generate_candidates`] plus the raw model text of the successful
/// attempt, for callers that persist the exchange.
pub fn generate_candidates_raw(
    question: &Question,
    config: &ScoringConfig,
    gateway: &Gateway,
    equivalence: &dyn AnswerEquivalence,
) -> Result<(CandidateSet, String), EngineError> {
    config.validate().map_err(EngineError::Invalid)?;
    let gold = match config.gold_policy {
        GoldPolicy::WithGold => Some(
            question
                .gold_answer
                .as_deref()
                .ok_or_else(|| EngineError::MissingGold(question.id.clone()))?,
        ),
        GoldPolicy::WithoutGold => None,
    };

    let mut last = AttemptFailure::Parse("no attempt made".into());
    for attempt in 0..config.max_attempts {
        let temperature = attempt_temperature(config.base_temperature, attempt);
        let request = build_generation_prompt(
            question,
            config.n_candidates,
            config.gold_policy,
            config,
            temperature,
        )?;
        let text = gateway.complete(&request)?;
        let records = match extract_candidate_list(&text) {
            Ok(records) => records,
            Err(err) => {
                last = AttemptFailure::Parse(err.to_string());
                continue;
            }
        };
        let report = validate(&records, config.n_candidates, gold, equivalence);
        if report.passed() {
            let candidates = records
                .into_iter()
                .enumerate()
                .map(|(i, r)| Candidate {
                    answer: r.answer,
                    rank: i + 1,
                    plausibility: r.plausibility.expect("validated numeric"),
                    justification: r.justification,
                    popularity: 0.0,
                    debiased: None,
                    share: None,
                })
                .collect();
            let set = CandidateSet {
                question_id: question.id.clone(),
                candidates,
                mode: Mode::Listwise,
                gold_provided: gold.is_some(),
                model_id: config.model_id.clone(),
                final_temperature: temperature,
                attempts: attempt + 1,
            };
            return Ok((set, text));
        }
        last = AttemptFailure::Validation(report);
    }
    Err(EngineError::ExhaustedRetries {
        attempts: config.max_attempts,
        last,
    })
}

/// Re-score each candidate with one pointwise prompt, keeping the generated
/// answers. Individual parse failures and out-of-range scores are retried
/// with the same temperature-bump loop.
pub fn score_pointwise(
    question: &Question,
    mut set: CandidateSet,
    config: &ScoringConfig,
    gateway: &Gateway,
) -> Result<CandidateSet, EngineError> {
    let gold = question
        .gold_answer
        .as_deref()
        .ok_or_else(|| EngineError::MissingGold(question.id.clone()))?;

    for candidate in &mut set.candidates {
        let content = prompts::render_pointwise(&question.text, gold, &candidate.answer);
        let mut last = AttemptFailure::Parse("no attempt made".into());
        let mut scored = false;
        for attempt in 0..config.max_attempts {
            let mut request = LlmRequest::new(&config.model_id, content.clone());
            request.temperature = attempt_temperature(config.base_temperature, attempt);
            let text = gateway.complete(&request)?;
            match pointwise_score(&text) {
                Ok((score, justification)) => {
                    candidate.plausibility = score;
                    candidate.justification = justification;
                    scored = true;
                    break;
                }
                Err(failure) => last = failure,
            }
        }
        if !scored {
            return Err(EngineError::ExhaustedRetries {
                attempts: config.max_attempts,
                last,
            });
        }
    }
    set.mode = Mode::Pointwise;
    Ok(set)
}

/// Pointwise replies may be a one-element list or a bare object.
fn pointwise_score(text: &str) -> Result<(f64, String), AttemptFailure> {
    let records = match extract_candidate_list(text) {
        Ok(records) => records,
        Err(_) => single_record(text).ok_or_else(|| {
            AttemptFailure::Parse("no candidate object in pointwise reply".into())
        })?,
    };
    let record = records
        .first()
        .ok_or_else(|| AttemptFailure::Parse("empty candidate list".into()))?;
    match record.plausibility {
        None => Err(AttemptFailure::Validation(ValidationReport {
            failures: vec![ValidationFailure::NonNumeric { index: 0 }],
        })),
        Some(score) if score <= 0.0 || score > 100.0 => {
            Err(AttemptFailure::Validation(ValidationReport {
                failures: vec![ValidationFailure::OutOfRange { index: 0 }],
            }))
        }
        Some(score) => Ok((score, record.justification.clone())),
    }
}

fn single_record(text: &str) -> Option<Vec<RawCandidateRecord>> {
    for (idx, _) in text.char_indices().filter(|&(_, c)| c == '{') {
        let mut stream =
            serde_json::Deserializer::from_str(&text[idx..]).into_iter::<serde_json::Value>();
        let Some(Ok(value)) = stream.next() else {
            continue;
        };
        let wrapped = serde_json::Value::Array(vec![value]);
        if let Ok(records) = extract_candidate_list(&wrapped.to_string()) {
            return Some(records);
        }
    }
    None
}

/// Compare every unordered candidate pair once and tally wins.
///
/// By default the lower-ranked candidate is presented as "Candidate Answer
/// 1"; `PairOrder::Randomized` shuffles presentation per pair with a seeded
/// generator. Verdict parse failures are retried with the temperature bump.
pub fn collect_pairwise(
    question: &Question,
    set: &CandidateSet,
    config: &ScoringConfig,
    gateway: &Gateway,
    order: PairOrder,
) -> Result<ComparisonMatrix, EngineError> {
    let gold = question
        .gold_answer
        .as_deref()
        .ok_or_else(|| EngineError::MissingGold(question.id.clone()))?;
    let n = set.candidates.len();
    if n < 2 {
        return Err(EngineError::Invalid(
            "pairwise comparison needs at least 2 candidates".into(),
        ));
    }

    let mut rng = match order {
        PairOrder::ByRank => None,
        PairOrder::Randomized { seed } => Some(rand_chacha::ChaCha8Rng::seed_from_u64(seed)),
    };
    let mut matrix = ComparisonMatrix::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let mut slots = [i, j];
            if let Some(rng) = rng.as_mut() {
                slots.shuffle(rng);
            }
            let content = prompts::render_pairwise(
                &question.text,
                gold,
                &set.candidates[slots[0]].answer,
                &set.candidates[slots[1]].answer,
            );
            let mut decided = false;
            let mut last = AttemptFailure::Parse("no attempt made".into());
            for attempt in 0..config.max_attempts {
                let mut request = LlmRequest::new(&config.model_id, content.clone());
                request.temperature = attempt_temperature(config.base_temperature, attempt);
                let text = gateway.complete(&request)?;
                match extract_choice(&text, &["1", "2"]) {
                    Ok(choice) => {
                        let winner = if choice == "1" { slots[0] } else { slots[1] };
                        let loser = if winner == slots[0] { slots[1] } else { slots[0] };
                        matrix.wins[winner][loser] += 1;
                        decided = true;
                        break;
                    }
                    Err(err) => last = AttemptFailure::Parse(err.to_string()),
                }
            }
            if !decided {
                return Err(EngineError::ExhaustedRetries {
                    attempts: config.max_attempts,
                    last,
                });
            }
        }
    }
    debug_assert_eq!(matrix.total_comparisons() as usize, n * (n - 1) / 2);
    Ok(matrix)
}
