//! Lenient extraction of structured content from free-form model output.
//!
//! Models wrap output in code fences and prose despite "JSON list only"
//! instructions, so [`extract_candidate_list`] scans for the first
//! well-formed JSON array instead of parsing strictly. Verdict extraction
//! scans from the end of the text because judge and comparison prompts allow
//! a justification before the final token.

use serde_json::Value;

use super::{GatewayError, RawCandidateRecord};

const KEY_ANSWER: &str = "Candidate Answer";
const KEY_SCORE: &str = "PlausibilityScore";
const KEY_JUSTIFICATION: &str = "Justification";

/// Locate the first well-formed JSON array of candidate objects in `text`,
/// tolerating code fences and surrounding prose.
///
/// Every element must be an object carrying the "Candidate Answer",
/// "PlausibilityScore" and "Justification" keys. A non-numeric score parses
/// to `plausibility: None`; range checks happen downstream in validation.
pub fn extract_candidate_list(text: &str) -> Result<Vec<RawCandidateRecord>, GatewayError> {
    for (idx, _) in text.char_indices().filter(|&(_, c)| c == '[') {
        let Some(value) = parse_leading_value(&text[idx..]) else {
            continue;
        };
        let Value::Array(items) = value else {
            continue;
        };
        if let Some(records) = records_from_items(&items) {
            return Ok(records);
        }
    }
    Err(GatewayError::Parse(
        "no well-formed JSON array with candidate keys found".into(),
    ))
}

/// Parse a single JSON value starting at the beginning of `text`, ignoring
/// trailing content.
fn parse_leading_value(text: &str) -> Option<Value> {
    let mut stream = serde_json::Deserializer::from_str(text).into_iter::<Value>();
    stream.next()?.ok()
}

fn records_from_items(items: &[Value]) -> Option<Vec<RawCandidateRecord>> {
    let mut records = Vec::with_capacity(items.len());
    for item in items {
        let obj = item.as_object()?;
        let answer = obj.get(KEY_ANSWER)?.as_str()?.to_string();
        let score = obj.get(KEY_SCORE)?;
        let justification = obj.get(KEY_JUSTIFICATION)?.as_str()?.to_string();
        records.push(RawCandidateRecord {
            answer,
            plausibility: numeric(score),
            justification,
        });
    }
    Some(records)
}

/// Numbers pass through; numeric strings like "85" are accepted too.
fn numeric(value: &Value) -> Option<f64> {
    match value {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().parse::<f64>().ok(),
        _ => None,
    }
}

/// Canonical serialization of candidate records; inverse of
/// [`extract_candidate_list`] on its own output.
pub fn serialize_candidate_list(records: &[RawCandidateRecord]) -> String {
    let items: Vec<Value> = records
        .iter()
        .map(|r| {
            let score = match r.plausibility {
                Some(p) => serde_json::json!(p),
                None => Value::Null,
            };
            serde_json::json!({
                KEY_ANSWER: r.answer,
                KEY_SCORE: score,
                KEY_JUSTIFICATION: r.justification,
            })
        })
        .collect();
    serde_json::to_string_pretty(&Value::Array(items)).expect("records serialize")
}

/// Extract a verdict from `text` given the allowed `choices`.
///
/// Two-phase rule, case-insensitive and word-bounded:
/// 1. if the text ends with one of the choices (trailing punctuation and
///    quotes ignored), that choice wins — the trailing verdict overrides any
///    choices mentioned inside a justification;
/// 2. otherwise the choice is accepted only if exactly one distinct choice
///    occurs anywhere in the text.
pub fn extract_choice(text: &str, choices: &[&str]) -> Result<String, GatewayError> {
    if choices.is_empty() {
        return Err(GatewayError::InvalidRequest("no choices given".into()));
    }
    let trimmed = text.trim_end_matches(|c: char| !c.is_alphanumeric());
    for choice in choices {
        if ends_with_token(trimmed, choice) {
            return Ok((*choice).to_string());
        }
    }
    let present: Vec<&str> = choices
        .iter()
        .copied()
        .filter(|c| contains_token(text, c))
        .collect();
    match present.as_slice() {
        [only] => Ok((*only).to_string()),
        [] => Err(GatewayError::Parse(format!(
            "no choice token from {choices:?} found in reply"
        ))),
        many => Err(GatewayError::Parse(format!(
            "ambiguous reply mentions multiple choices {many:?} with no trailing verdict"
        ))),
    }
}

fn ends_with_token(text: &str, token: &str) -> bool {
    let lower = text.to_lowercase();
    let tok = token.to_lowercase();
    if !lower.ends_with(&tok) {
        return false;
    }
    match lower[..lower.len() - tok.len()].chars().next_back() {
        None => true,
        Some(prev) => !prev.is_alphanumeric(),
    }
}

fn contains_token(text: &str, token: &str) -> bool {
    let lower = text.to_lowercase();
    let tok = token.to_lowercase();
    let mut start = 0;
    while let Some(pos) = lower[start..].find(&tok) {
        let abs = start + pos;
        let before_ok = lower[..abs]
            .chars()
            .next_back()
            .is_none_or(|c| !c.is_alphanumeric());
        let after_ok = lower[abs + tok.len()..]
            .chars()
            .next()
            .is_none_or(|c| !c.is_alphanumeric());
        if before_ok && after_ok {
            return true;
        }
        start = abs + tok.len().max(1);
    }
    false
}
