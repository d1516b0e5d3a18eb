//! Question difficulty estimation for LLM-based QA.
//!
//! The pipeline has three stages: generate candidate answers with
//! plausibility scores and validate them; measure each candidate's
//! Wikipedia popularity and debias the plausibility scores; normalize the
//! debiased scores and report the entropy, scaled to [0, 1], as the
//! question's difficulty. Alongside the pipeline live the comparison
//! baselines (readability, prompt-based, popularity, mean plausibility) and
//! the evaluation harness (QA answering, judge majority voting, median
//! split, Cohen's d, rank correlations, grid search).

pub mod baselines;
pub mod bt;
pub mod datastore;
pub mod engine;
pub mod eval;
pub mod gateway;
pub mod normalize;
pub mod popularity;
pub mod prompts;
pub mod scoring;
pub mod types;

pub use types::{
    Candidate, CandidateSet, DifficultyResult, EquivalencePolicy, GoldPolicy, Mode, Question,
    ScoringConfig, SelectionPolicy,
};
