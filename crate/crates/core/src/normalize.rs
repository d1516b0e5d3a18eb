//! Answer canonicalization and the default string-equivalence check.
//!
//! The equivalence function is an extension point: validation and duplicate
//! detection take any `&dyn AnswerEquivalence`, so a model-backed semantic
//! matcher can be injected. The default lowercases, NFC-normalizes, strips
//! punctuation and the English articles {a, an, the}, and collapses
//! whitespace.

use unicode_normalization::UnicodeNormalization;

/// Canonicalize an answer string for comparison.
///
/// Empty input maps to empty output. The function is idempotent.
pub fn normalize_answer(text: &str) -> String {
    let lowered: String = text.nfc().collect::<String>().to_lowercase();
    let depunct: String = lowered
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    depunct
        .split_whitespace()
        .filter(|w| !matches!(*w, "a" | "an" | "the"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// True iff the two answers canonicalize to the same string.
pub fn answers_equivalent(a: &str, b: &str) -> bool {
    normalize_answer(a) == normalize_answer(b)
}

/// Pluggable answer-equivalence check.
pub trait AnswerEquivalence: Send + Sync {
    fn equivalent(&self, a: &str, b: &str) -> bool;
}

/// The default normalized-string matcher.
#[derive(Debug, Clone, Copy, Default)]
pub struct NormalizedStringEquivalence;

impl AnswerEquivalence for NormalizedStringEquivalence {
    fn equivalent(&self, a: &str, b: &str) -> bool {
        answers_equivalent(a, b)
    }
}

impl<F> AnswerEquivalence for F
where
    F: Fn(&str, &str) -> bool + Send + Sync,
{
    fn equivalent(&self, a: &str, b: &str) -> bool {
        self(a, b)
    }
}
