//! Domain types shared by every stage of the pipeline.

use serde::{Deserialize, Serialize};

/// A question to be scored, with its optional gold answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_answer: Option<String>,
    /// Question-type tag (wh-word class) used for stratified sampling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qtype: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

impl Question {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            gold_answer: None,
            qtype: None,
            source: None,
        }
    }

    pub fn with_gold(mut self, gold: impl Into<String>) -> Self {
        self.gold_answer = Some(gold.into());
        self
    }
}

/// A generated candidate answer with its scores.
///
/// `popularity` defaults to 0 until the popularity stage resolves it;
/// `debiased` and `share` stay unset until the scoring stage selects and
/// normalizes the candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub answer: String,
    /// 1-based generation order.
    pub rank: usize,
    /// Raw plausibility score in (0, 100].
    pub plausibility: f64,
    pub justification: String,
    /// Popularity in [0, 1]; 0 until resolved.
    #[serde(default)]
    pub popularity: f64,
    /// Debiased plausibility in [0, plausibility]; unset until debiasing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub debiased: Option<f64>,
    /// Normalized share in [0, 1]; unset until normalization.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub share: Option<f64>,
}

impl Candidate {
    pub fn new(answer: impl Into<String>, rank: usize, plausibility: f64) -> Self {
        Self {
            answer: answer.into(),
            rank,
            plausibility,
            justification: String::new(),
            popularity: 0.0,
            debiased: None,
            share: None,
        }
    }
}

/// Plausibility elicitation mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Listwise,
    Pointwise,
    Pairwise,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Listwise => write!(f, "listwise"),
            Mode::Pointwise => write!(f, "pointwise"),
            Mode::Pairwise => write!(f, "pairwise"),
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "listwise" => Ok(Mode::Listwise),
            "pointwise" => Ok(Mode::Pointwise),
            "pairwise" => Ok(Mode::Pairwise),
            other => Err(format!("unknown mode: {other}")),
        }
    }
}

/// Whether the gold answer is shown to the generating model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoldPolicy {
    WithGold,
    WithoutGold,
}

/// A question's validated pool of candidates plus generation provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub question_id: String,
    pub candidates: Vec<Candidate>,
    pub mode: Mode,
    pub gold_provided: bool,
    pub model_id: String,
    pub final_temperature: f64,
    pub attempts: usize,
}

/// The scored output for one question: entropy, normalized difficulty, and
/// the fully annotated candidate breakdown that explains the number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifficultyResult {
    pub question_id: String,
    /// Shannon entropy H(q) of the normalized debiased shares, in bits.
    pub entropy: f64,
    /// entropy / log2(n_used), clamped to [0, 1].
    pub difficulty: f64,
    /// Number of candidates that entered the distribution.
    pub n_used: usize,
    pub alpha: f64,
    /// Whether popularity debiasing was applied.
    pub debiased: bool,
    /// Set when the debiased scores summed to zero and the uniform
    /// fallback distribution was used.
    #[serde(default)]
    pub degenerate_shares: bool,
    pub candidates: CandidateSet,
}

/// How the top-N candidates are chosen out of a larger generated pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionPolicy {
    /// Keep the N most plausible candidates (ties broken by lower rank).
    TopPlausibility,
    /// Keep the first N in generation order.
    FirstByRank,
}

/// Answer-equivalence backend used by validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquivalencePolicy {
    NormalizedString,
    Plugin,
}

/// Pipeline configuration with the defaults used throughout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoringConfig {
    /// Debiasing strength in [0, 1].
    pub alpha: f64,
    /// Number of candidates entering the distribution, in [1, 20].
    pub n_candidates: usize,
    pub mode: Mode,
    pub gold_policy: GoldPolicy,
    pub debias: bool,
    pub model_id: String,
    /// Cap on generation/rescoring attempts per unit of work.
    pub max_attempts: usize,
    /// Temperature of the first attempt; bumped by 0.1 per failure.
    pub base_temperature: f64,
    pub equivalence: EquivalencePolicy,
    #[serde(default = "SelectionPolicy::default_top")]
    pub selection: SelectionPolicy,
}

impl SelectionPolicy {
    fn default_top() -> Self {
        SelectionPolicy::TopPlausibility
    }
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            n_candidates: 8,
            mode: Mode::Listwise,
            gold_policy: GoldPolicy::WithGold,
            debias: true,
            model_id: String::new(),
            max_attempts: 10,
            base_temperature: 0.0,
            equivalence: EquivalencePolicy::NormalizedString,
            selection: SelectionPolicy::TopPlausibility,
        }
    }
}

impl ScoringConfig {
    /// Check the stated field ranges.
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(format!("alpha must be in [0, 1], got {}", self.alpha));
        }
        if !(1..=20).contains(&self.n_candidates) {
            return Err(format!(
                "n_candidates must be in [1, 20], got {}",
                self.n_candidates
            ));
        }
        if self.max_attempts == 0 {
            return Err("max_attempts must be positive".into());
        }
        if self.base_temperature < 0.0 {
            return Err(format!(
                "base_temperature must be >= 0, got {}",
                self.base_temperature
            ));
        }
        Ok(())
    }
}
