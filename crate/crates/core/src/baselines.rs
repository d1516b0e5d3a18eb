//! Comparison methods: readability formulas, prompt-based difficulty, the
//! gold-answer popularity proxy, and mean plausibility.
//!
//! Syllables are counted with a vowel-group heuristic: maximal runs of
//! {a, e, i, o, u, y}, minus a silent final 'e' when the word has another
//! vowel group, minimum one per word. Sentences split on {., !, ?} followed
//! by whitespace or end of text. Complex words (Gunning) are words of three
//! or more syllables after stripping the -es/-ed/-ing suffixes, excluding
//! proper nouns (capitalized words not starting a sentence).

use thiserror::Error;

use crate::engine::AttemptFailure;
use crate::gateway::{Gateway, GatewayError, LlmRequest};
use crate::popularity::{assign_popularity, PageviewSeries};
use crate::prompts;
use crate::scoring::debias;
use crate::types::{CandidateSet, ScoringConfig, SelectionPolicy};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("text has no words")]
    EmptyText,
    #[error("question {0} has no gold answer")]
    MissingGold(String),
    #[error("retries exhausted after {attempts} attempts: {last:?}")]
    ExhaustedRetries {
        attempts: usize,
        last: AttemptFailure,
    },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("need {needed} candidates, set has {available}")]
    InsufficientCandidates { needed: usize, available: usize },
}

/// Sentence/word/syllable counts backing the readability formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TextStats {
    pub sentences: usize,
    pub words: usize,
    pub syllables: usize,
    pub complex_words: usize,
}

/// Count syllables in one word with the vowel-group heuristic.
pub fn count_syllables(word: &str) -> usize {
    let cleaned: String = word
        .chars()
        .filter(|c| c.is_alphabetic())
        .collect::<String>()
        .to_lowercase();
    if cleaned.is_empty() {
        return 0;
    }
    let is_vowel = |c: char| matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y');
    let mut groups = 0;
    let mut in_group = false;
    for c in cleaned.chars() {
        if is_vowel(c) {
            if !in_group {
                groups += 1;
            }
            in_group = true;
        } else {
            in_group = false;
        }
    }
    // Silent final 'e' only when another vowel group carries the word.
    if groups > 1 && cleaned.ends_with('e') && !cleaned.ends_with("le") {
        groups -= 1;
    }
    groups.max(1)
}

fn split_sentences(text: &str) -> usize {
    let mut sentences = 0;
    let mut chars = text.chars().peekable();
    let mut has_content = false;
    while let Some(c) = chars.next() {
        if matches!(c, '.' | '!' | '?') {
            let boundary = match chars.peek() {
                None => true,
                Some(next) => next.is_whitespace(),
            };
            if boundary && has_content {
                sentences += 1;
                has_content = false;
            }
        } else if !c.is_whitespace() {
            has_content = true;
        }
    }
    if has_content {
        sentences += 1;
    }
    sentences.max(1)
}

/// Strip one of the common suffixes before the complex-word syllable count.
fn strip_suffix(word: &str) -> &str {
    for suffix in ["ing", "ed", "es"] {
        if let Some(stem) = word.strip_suffix(suffix) {
            if stem.len() >= 2 {
                return stem;
            }
        }
    }
    word
}

/// Compute the counts backing both readability formulas.
pub fn text_stats(text: &str) -> Result<TextStats, BaselineError> {
    let words: Vec<&str> = text.split_whitespace().collect();
    if words.is_empty() {
        return Err(BaselineError::EmptyText);
    }
    let sentences = split_sentences(text);
    let syllables: usize = words.iter().map(|w| count_syllables(w)).sum();

    let mut complex_words = 0;
    let mut sentence_start = true;
    for word in &words {
        let alphabetic: String = word.chars().filter(|c| c.is_alphabetic()).collect();
        if alphabetic.is_empty() {
            continue;
        }
        let proper_noun =
            !sentence_start && alphabetic.chars().next().is_some_and(|c| c.is_uppercase());
        if !proper_noun && count_syllables(strip_suffix(&alphabetic.to_lowercase())) >= 3 {
            complex_words += 1;
        }
        sentence_start = word.ends_with(['.', '!', '?']);
    }

    Ok(TextStats {
        sentences,
        words: words.len(),
        syllables,
        complex_words,
    })
}

/// Flesch-Kincaid grade level:
/// `0.39·(words/sentences) + 11.8·(syllables/words) − 15.59`.
pub fn flesch_kincaid_grade(text: &str) -> Result<f64, BaselineError> {
    let stats = text_stats(text)?;
    let words = stats.words as f64;
    Ok(0.39 * (words / stats.sentences as f64) + 11.8 * (stats.syllables as f64 / words) - 15.59)
}

/// Gunning fog index:
/// `0.4·((words/sentences) + 100·(complex_words/words))`.
pub fn gunning_fog(text: &str) -> Result<f64, BaselineError> {
    let stats = text_stats(text)?;
    let words = stats.words as f64;
    Ok(0.4 * (words / stats.sentences as f64 + 100.0 * stats.complex_words as f64 / words))
}

/// Ask the model to rate difficulty 0..100 directly; the first number in
/// the reply is the rating. Parse failures retry with the temperature bump.
pub fn prompt_difficulty(
    question_text: &str,
    config: &ScoringConfig,
    gateway: &Gateway,
) -> Result<f64, BaselineError> {
    let content = prompts::render_prompt_difficulty(question_text);
    let mut last = AttemptFailure::Parse("no attempt made".into());
    for attempt in 0..config.max_attempts {
        let mut request = LlmRequest::new(&config.model_id, content.clone());
        request.temperature = crate::engine::attempt_temperature(config.base_temperature, attempt);
        let text = gateway.complete(&request)?;
        match first_number(&text) {
            Some(value) => return Ok(value.clamp(0.0, 100.0)),
            None => last = AttemptFailure::Parse(format!("no number in reply: {text:?}")),
        }
    }
    Err(BaselineError::ExhaustedRetries {
        attempts: config.max_attempts,
        last,
    })
}

/// First decimal number appearing in the text.
pub fn first_number(text: &str) -> Option<f64> {
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].is_ascii_digit() {
            let start = i;
            let mut end = i;
            let mut seen_dot = false;
            while end < bytes.len()
                && (bytes[end].is_ascii_digit() || (bytes[end] == b'.' && !seen_dot))
            {
                if bytes[end] == b'.' {
                    // A trailing period is sentence punctuation, not a decimal.
                    if end + 1 >= bytes.len() || !bytes[end + 1].is_ascii_digit() {
                        break;
                    }
                    seen_dot = true;
                }
                end += 1;
            }
            if let Ok(value) = text[start..end].parse::<f64>() {
                return Some(value);
            }
            i = end;
        }
        i += 1;
    }
    None
}

/// Difficulty proxies from gold-answer page views, normalized within the
/// batch: `1 − popularity`, so less popular gold answers read as harder.
/// Input series must align with the questions they belong to.
pub fn popularity_baseline(gold_series: &[PageviewSeries]) -> Vec<f64> {
    if gold_series.is_empty() {
        return Vec::new();
    }
    assign_popularity(gold_series)
        .entries
        .into_iter()
        .map(|e| 1.0 - e.popularity)
        .collect()
}

/// Mean of the selected candidates' (optionally debiased) plausibility,
/// scaled into [0, 1].
pub fn avg_plausibility(
    cset: &CandidateSet,
    config: &ScoringConfig,
) -> Result<f64, BaselineError> {
    let n = config.n_candidates;
    if cset.candidates.len() < n {
        return Err(BaselineError::InsufficientCandidates {
            needed: n,
            available: cset.candidates.len(),
        });
    }
    let mut order: Vec<usize> = (0..cset.candidates.len()).collect();
    match config.selection {
        SelectionPolicy::TopPlausibility => order.sort_by(|&a, &b| {
            let ca = &cset.candidates[a];
            let cb = &cset.candidates[b];
            cb.plausibility
                .partial_cmp(&ca.plausibility)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(ca.rank.cmp(&cb.rank))
        }),
        SelectionPolicy::FirstByRank => order.sort_by_key(|&i| cset.candidates[i].rank),
    }
    let mean = order[..n]
        .iter()
        .map(|&i| {
            let c = &cset.candidates[i];
            if config.debias {
                debias(c.plausibility, c.popularity, config.alpha)
            } else {
                c.plausibility
            }
        })
        .sum::<f64>()
        / n as f64;
    Ok(mean / 100.0)
}
