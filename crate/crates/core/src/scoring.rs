//! The difficulty computation: popularity debiasing, share normalization,
//! Shannon entropy, and the [0, 1] difficulty scale.
//!
//! For a candidate with plausibility `Pls` and popularity `Pop`, the
//! debiased score is `Pls · (1 − α·Pop)`. Debiased scores are normalized to
//! a distribution, its entropy is taken in bits, and the entropy is divided
//! by `log2 N` so that a uniform distribution over N candidates scores
//! exactly 1 and a one-hot distribution scores 0.

use thiserror::Error;

use crate::types::{CandidateSet, DifficultyResult, ScoringConfig, SelectionPolicy};

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("question {question_id}: need {needed} candidates, set has {available}")]
    InsufficientCandidates {
        question_id: String,
        needed: usize,
        available: usize,
    },
    #[error("question {0}: popularity not resolved but debiasing requested")]
    PopularityUnresolved(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

/// Debias one plausibility score: `pls · (1 − alpha·pop)`.
///
/// For in-range inputs the result lies in `[0, pls]`; zero popularity is the
/// identity.
pub fn debias(pls: f64, pop: f64, alpha: f64) -> f64 {
    pls * (1.0 - alpha * pop)
}

/// Normalize nonnegative scores into a distribution.
///
/// Returns the shares and a degeneracy flag: when every score is zero the
/// uniform distribution over the pool is returned and the flag is set.
pub fn normalize_shares(depls: &[f64]) -> (Vec<f64>, bool) {
    assert!(!depls.is_empty(), "normalize_shares needs a non-empty list");
    let sum: f64 = depls.iter().sum();
    if sum == 0.0 {
        let uniform = 1.0 / depls.len() as f64;
        return (vec![uniform; depls.len()], true);
    }
    (depls.iter().map(|&v| v / sum).collect(), false)
}

/// Shannon entropy in bits; terms with share 0 contribute 0.
///
/// All-equal shares take the closed form `log2(n)` so that a uniform
/// distribution divides out to a difficulty of exactly 1.
pub fn entropy(shares: &[f64]) -> f64 {
    if !shares.is_empty() && shares.iter().all(|&p| p == shares[0]) && shares[0] > 0.0 {
        return (shares.len() as f64).log2();
    }
    -shares
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.log2())
        .sum::<f64>()
}

/// Scale entropy to [0, 1] by `log2 n`. A single candidate carries no
/// uncertainty, so `n = 1` maps to 0.
pub fn difficulty(h: f64, n: usize) -> f64 {
    if n <= 1 {
        return 0.0;
    }
    (h / (n as f64).log2()).clamp(0.0, 1.0)
}

/// Score one question's candidate set end to end.
///
/// Selects `config.n_candidates` candidates (top plausibility with rank
/// tie-break by default, first-by-rank optionally), debias each (identity
/// when debiasing is off), normalizes, and reports entropy plus difficulty.
/// The returned snapshot annotates the selected candidates with their
/// debiased scores and shares; unselected candidates keep them unset.
pub fn score_question(
    cset: &CandidateSet,
    config: &ScoringConfig,
) -> Result<DifficultyResult, ScoreError> {
    config.validate().map_err(ScoreError::InvalidConfig)?;
    let n = config.n_candidates;
    if cset.candidates.len() < n {
        return Err(ScoreError::InsufficientCandidates {
            question_id: cset.question_id.clone(),
            needed: n,
            available: cset.candidates.len(),
        });
    }

    let mut order: Vec<usize> = (0..cset.candidates.len()).collect();
    match config.selection {
        SelectionPolicy::TopPlausibility => {
            order.sort_by(|&a, &b| {
                let ca = &cset.candidates[a];
                let cb = &cset.candidates[b];
                cb.plausibility
                    .partial_cmp(&ca.plausibility)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(ca.rank.cmp(&cb.rank))
            });
        }
        SelectionPolicy::FirstByRank => {
            order.sort_by_key(|&i| cset.candidates[i].rank);
        }
    }
    let selected = &order[..n];

    let alpha = if config.debias { config.alpha } else { 0.0 };
    let depls: Vec<f64> = selected
        .iter()
        .map(|&i| {
            let c = &cset.candidates[i];
            debias(c.plausibility, if config.debias { c.popularity } else { 0.0 }, alpha)
        })
        .collect();
    let (shares, degenerate) = normalize_shares(&depls);
    let h = entropy(&shares);
    let diff = difficulty(h, n);

    let mut snapshot = cset.clone();
    for c in &mut snapshot.candidates {
        c.debiased = None;
        c.share = None;
    }
    for (pos, &idx) in selected.iter().enumerate() {
        snapshot.candidates[idx].debiased = Some(depls[pos]);
        snapshot.candidates[idx].share = Some(shares[pos]);
    }

    Ok(DifficultyResult {
        question_id: cset.question_id.clone(),
        entropy: h,
        difficulty: diff,
        n_used: n,
        alpha: config.alpha,
        debiased: config.debias,
        degenerate_shares: degenerate,
        candidates: snapshot,
    })
}
