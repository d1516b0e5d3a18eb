//! Bradley–Terry conversion of pairwise win counts into per-candidate
//! plausibility scores.
//!
//! The model puts `P(i beats j) = p_i / (p_i + p_j)` with positive strengths
//! `p`. Strengths are fitted by the minorization–maximization iteration
//!
//! ```text
//! p_i ← W_i / Σ_{j≠i} n_ij / (p_i + p_j)
//! ```
//!
//! where `W_i` is the total wins of candidate `i` and `n_ij` the number of
//! comparisons between `i` and `j`, renormalizing to sum 1 each round. Each
//! MM step is guaranteed not to decrease the log-likelihood; debug builds
//! assert this per iteration.
//!
//! With a single comparison per pair an undefeated candidate has no finite
//! maximum-likelihood strength, so a pseudo-count (default 0.5 per direction
//! per pair) is added to both directions of every pair before fitting.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::ComparisonMatrix;

#[derive(Debug, Error)]
pub enum BtError {
    #[error("degenerate comparison matrix: {0}")]
    DegenerateMatrix(String),
}

/// A fitted Bradley–Terry model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BtFit {
    /// Positive strengths, normalized to sum 1.
    pub strengths: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Pseudo-count that was added per direction per pair.
    pub smoothing: f64,
}

pub const DEFAULT_SMOOTHING: f64 = 0.5;
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Fit strengths to a win matrix via MM iteration.
///
/// `smoothing` pseudo-wins are added to both directions of every pair;
/// iteration stops when `max |Δp_i| < tol` or after `max_iter` rounds.
pub fn fit_bradley_terry(
    matrix: &ComparisonMatrix,
    smoothing: f64,
    tol: f64,
    max_iter: usize,
) -> Result<BtFit, BtError> {
    let n = matrix.n;
    if n < 2 {
        return Err(BtError::DegenerateMatrix(format!(
            "need at least 2 candidates, got {n}"
        )));
    }
    if tol <= 0.0 {
        return Err(BtError::DegenerateMatrix(format!("tol must be > 0, got {tol}")));
    }

    // Smoothed win counts.
    let mut wins = vec![vec![0.0f64; n]; n];
    let mut any = false;
    for (i, row) in wins.iter_mut().enumerate() {
        for (j, w) in row.iter_mut().enumerate() {
            if i != j {
                *w = matrix.wins[i][j] as f64 + smoothing;
                if *w > 0.0 {
                    any = true;
                }
            }
        }
    }
    if !any {
        return Err(BtError::DegenerateMatrix(
            "all pair counts zero after smoothing".into(),
        ));
    }

    let total_wins: Vec<f64> = (0..n).map(|i| wins[i].iter().sum()).collect();
    let mut p = vec![1.0 / n as f64; n];
    let mut iterations = 0;
    let mut converged = false;
    #[cfg(debug_assertions)]
    let mut prev_ll = log_likelihood(&wins, &p);

    for iter in 0..max_iter {
        iterations = iter + 1;
        let mut next = vec![0.0f64; n];
        for i in 0..n {
            let mut denom = 0.0;
            for j in 0..n {
                if j == i {
                    continue;
                }
                let n_ij = wins[i][j] + wins[j][i];
                if n_ij > 0.0 {
                    denom += n_ij / (p[i] + p[j]);
                }
            }
            next[i] = if denom > 0.0 { total_wins[i] / denom } else { p[i] };
        }
        let sum: f64 = next.iter().sum();
        for v in &mut next {
            *v /= sum;
        }

        #[cfg(debug_assertions)]
        {
            let ll = log_likelihood(&wins, &next);
            debug_assert!(
                ll >= prev_ll - 1e-9,
                "MM iteration decreased log-likelihood: {prev_ll} -> {ll}"
            );
            prev_ll = ll;
        }

        let max_delta = p
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        p = next;
        if max_delta < tol {
            converged = true;
            break;
        }
    }

    Ok(BtFit {
        strengths: p,
        iterations,
        converged,
        smoothing,
    })
}

/// Log-likelihood of strengths under smoothed win counts.
pub fn log_likelihood(wins: &[Vec<f64>], p: &[f64]) -> f64 {
    let n = p.len();
    let mut ll = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j && wins[i][j] > 0.0 {
                ll += wins[i][j] * (p[i] / (p[i] + p[j])).ln();
            }
        }
    }
    ll
}

/// Map strengths onto the (0, 100] plausibility scale.
///
/// The normalization of the scoring stage is scale-invariant, so any
/// positive rescale yields the same difficulty; pinning the maximum at 100
/// keeps reports comparable with listwise scores.
pub fn strengths_to_plausibility(fit: &BtFit) -> Vec<f64> {
    let max = fit.strengths.iter().cloned().fold(f64::MIN, f64::max);
    fit.strengths.iter().map(|&p| 100.0 * p / max).collect()
}
