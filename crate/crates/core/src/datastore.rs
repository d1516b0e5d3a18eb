//! Dataset ingestion, deterministic sampling, the LLM response cache, and
//! result persistence. Everything on disk is JSONL or JSON; writes are
//! atomic (temp file + rename) and cache keys are content-addressed.

use std::collections::HashSet;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::gateway::hex_encode;
use crate::types::{CandidateSet, DifficultyResult, GoldPolicy, Question};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("schema error at {path}:{line}: {message}")]
    Schema {
        path: String,
        line: usize,
        message: String,
    },
    #[error("requested {requested} questions but only {available} available")]
    InsufficientQuestions { requested: usize, available: usize },
    #[error("corrupt cache entry {key}: {message}")]
    Cache { key: String, message: String },
}

fn io_err(path: &Path, source: std::io::Error) -> DataError {
    DataError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Deserialize)]
struct QuestionLine {
    question: String,
    #[serde(default)]
    id: Option<serde_json::Value>,
    #[serde(default)]
    answer: Option<String>,
    #[serde(default, rename = "type")]
    qtype: Option<String>,
    #[serde(default)]
    source: Option<String>,
}

/// Load a JSONL dataset: one object per line with required key "question"
/// and optional "id" (line index when absent), "answer", "type", "source".
pub fn load_questions(path: &Path) -> Result<Vec<Question>, DataError> {
    let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let mut questions = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let parsed: QuestionLine =
            serde_json::from_str(&line).map_err(|e| DataError::Schema {
                path: path.display().to_string(),
                line: lineno,
                message: e.to_string(),
            })?;
        if parsed.question.trim().is_empty() {
            return Err(DataError::Schema {
                path: path.display().to_string(),
                line: lineno,
                message: "\"question\" is empty".into(),
            });
        }
        let id = match parsed.id {
            Some(serde_json::Value::String(s)) => s,
            Some(serde_json::Value::Number(n)) => n.to_string(),
            Some(other) => {
                return Err(DataError::Schema {
                    path: path.display().to_string(),
                    line: lineno,
                    message: format!("\"id\" must be a string or number, got {other}"),
                })
            }
            None => idx.to_string(),
        };
        if !seen.insert(id.clone()) {
            return Err(DataError::Schema {
                path: path.display().to_string(),
                line: lineno,
                message: format!("duplicate id \"{id}\""),
            });
        }
        questions.push(Question {
            id,
            text: parsed.question,
            gold_answer: parsed.answer,
            qtype: parsed.qtype,
            source: parsed.source,
        });
    }
    Ok(questions)
}

/// Wh-word class of a question, used as the stratification key when no
/// explicit type tag is present.
pub fn question_type(question: &Question) -> String {
    if let Some(qtype) = &question.qtype {
        return qtype.clone();
    }
    let first = question
        .text
        .split_whitespace()
        .next()
        .unwrap_or("")
        .trim_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase();
    match first.as_str() {
        "who" | "what" | "when" | "where" | "which" | "why" | "how" => first,
        _ => "other".to_string(),
    }
}

/// Draw `k` questions with per-stratum proportional allocation
/// (largest-remainder rounding) and a seeded generator. Deterministic for a
/// fixed (input, k, seed); `k == total` returns the whole set ordered by id.
pub fn stratified_sample(
    questions: &[Question],
    k: usize,
    seed: u64,
) -> Result<Vec<Question>, DataError> {
    if k > questions.len() {
        return Err(DataError::InsufficientQuestions {
            requested: k,
            available: questions.len(),
        });
    }
    let mut by_id: Vec<&Question> = questions.iter().collect();
    by_id.sort_by(|a, b| a.id.cmp(&b.id));
    if k == questions.len() {
        return Ok(by_id.into_iter().cloned().collect());
    }

    let mut strata: Vec<(String, Vec<&Question>)> = Vec::new();
    for q in by_id {
        let key = question_type(q);
        match strata.iter_mut().find(|(k, _)| *k == key) {
            Some((_, bucket)) => bucket.push(q),
            None => strata.push((key, vec![q])),
        }
    }
    strata.sort_by(|a, b| a.0.cmp(&b.0));

    let total = questions.len() as f64;
    let mut allocations: Vec<usize> = Vec::with_capacity(strata.len());
    let mut remainders: Vec<(usize, f64)> = Vec::with_capacity(strata.len());
    for (idx, (_, bucket)) in strata.iter().enumerate() {
        let exact = k as f64 * bucket.len() as f64 / total;
        let floor = exact.floor() as usize;
        allocations.push(floor.min(bucket.len()));
        remainders.push((idx, exact - floor as f64));
    }
    let mut assigned: usize = allocations.iter().sum();
    // Hand out the leftover slots by largest remainder, skipping full strata.
    remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let mut cursor = 0;
    while assigned < k {
        let (idx, _) = remainders[cursor % remainders.len()];
        if allocations[idx] < strata[idx].1.len() {
            allocations[idx] += 1;
            assigned += 1;
        }
        cursor += 1;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sample = Vec::with_capacity(k);
    for ((_, bucket), quota) in strata.iter().zip(&allocations) {
        let mut indices: Vec<usize> = (0..bucket.len()).collect();
        indices.shuffle(&mut rng);
        let mut chosen: Vec<&Question> = indices[..*quota].iter().map(|&i| bucket[i]).collect();
        chosen.sort_by(|a, b| a.id.cmp(&b.id));
        sample.extend(chosen.into_iter().cloned());
    }
    Ok(sample)
}

/// Write bytes atomically: temp file in the same directory, then rename.
/// Concurrent writers of identical content are safe because the final
/// rename is atomic and the contents agree.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path)?;
    Ok(())
}

/// Serialize a value to pretty JSON and write it atomically.
pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<(), DataError> {
    let json = serde_json::to_string_pretty(value).expect("value serializes");
    atomic_write(path, json.as_bytes()).map_err(|e| io_err(path, e))
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T, DataError> {
    let data = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&data).map_err(|e| DataError::Schema {
        path: path.display().to_string(),
        line: 0,
        message: e.to_string(),
    })
}

/// Write one JSON object per line, atomically.
pub fn save_jsonl<T: Serialize>(path: &Path, values: &[T]) -> Result<(), DataError> {
    let mut out = String::new();
    for value in values {
        out.push_str(&serde_json::to_string(value).expect("value serializes"));
        out.push('\n');
    }
    atomic_write(path, out.as_bytes()).map_err(|e| io_err(path, e))
}

pub fn load_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, DataError> {
    let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let mut values = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        values.push(
            serde_json::from_str(&line).map_err(|e| DataError::Schema {
                path: path.display().to_string(),
                line: idx + 1,
                message: e.to_string(),
            })?,
        );
    }
    Ok(values)
}

/// On-disk schema for one question's generated candidates: the question
/// snapshot travels with the set so downstream stages are self-contained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateFile {
    pub question: Question,
    pub set: CandidateSet,
    /// True once the popularity stage has annotated the pool.
    #[serde(default)]
    pub popularity_resolved: bool,
    /// Outlier/normalization convention used by the popularity stage.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub popularity_convention: Option<String>,
}

/// One line of a results file: the difficulty (or baseline proxy) for a
/// question, with the full scoring breakdown when the method produces one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub question: Question,
    pub method: String,
    pub difficulty: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<DifficultyResult>,
}

/// Identifies one cached LLM work unit. The stage distinguishes generation
/// from QA answering, judging, and the prompt-difficulty baseline; `text`
/// is the stage's distinguishing input (question text, or question + gold +
/// candidate for judge entries).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CacheDescriptor {
    pub model_id: String,
    pub template_version: String,
    pub text: String,
    pub gold_policy: String,
    pub n: usize,
    pub mode: String,
}

impl CacheDescriptor {
    pub fn generation(
        model_id: &str,
        question_text: &str,
        gold_policy: GoldPolicy,
        n: usize,
        mode: &str,
    ) -> Self {
        Self {
            model_id: model_id.to_string(),
            template_version: crate::prompts::TEMPLATE_VERSION.to_string(),
            text: question_text.to_string(),
            gold_policy: match gold_policy {
                GoldPolicy::WithGold => "with_gold".into(),
                GoldPolicy::WithoutGold => "without_gold".into(),
            },
            n,
            mode: mode.to_string(),
        }
    }

    pub fn qa(model_id: &str, question_text: &str) -> Self {
        Self {
            model_id: model_id.to_string(),
            template_version: crate::prompts::TEMPLATE_VERSION.to_string(),
            text: question_text.to_string(),
            gold_policy: "none".into(),
            n: 0,
            mode: "qa".into(),
        }
    }

    pub fn judge(model_id: &str, question_text: &str, gold: &str, candidate: &str) -> Self {
        Self {
            model_id: model_id.to_string(),
            template_version: crate::prompts::TEMPLATE_VERSION.to_string(),
            text: format!("{question_text}\u{1f}{gold}\u{1f}{candidate}"),
            gold_policy: "none".into(),
            n: 0,
            mode: "judge".into(),
        }
    }

    pub fn prompt_difficulty(model_id: &str, question_text: &str) -> Self {
        Self {
            model_id: model_id.to_string(),
            template_version: crate::prompts::TEMPLATE_VERSION.to_string(),
            text: question_text.to_string(),
            gold_policy: "none".into(),
            n: 0,
            mode: "prompt_difficulty".into(),
        }
    }

    /// SHA-256 hex of the canonical descriptor serialization.
    pub fn key(&self) -> String {
        let canonical = serde_json::to_string(self).expect("descriptor serializes");
        hex_encode(&Sha256::digest(canonical.as_bytes()))
    }
}

/// A stored stage result: the raw text of the final successful attempt plus
/// the stage's parsed payload.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CacheEntry<P> {
    pub raw_text: String,
    pub payload: P,
    pub timestamp: u64,
}

/// Content-addressed store under `{cache_dir}/llm/{key}.json`.
pub struct LlmCache {
    dir: PathBuf,
}

impl LlmCache {
    pub fn new(cache_dir: &Path) -> Self {
        Self {
            dir: cache_dir.join("llm"),
        }
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    /// Fetch an entry; corrupt entries are reported as `Cache` errors so the
    /// caller can warn and treat them as absent.
    pub fn get<P: DeserializeOwned>(
        &self,
        descriptor: &CacheDescriptor,
    ) -> Result<Option<CacheEntry<P>>, DataError> {
        let key = descriptor.key();
        let path = self.path(&key);
        if !path.exists() {
            return Ok(None);
        }
        let data = std::fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        match serde_json::from_str(&data) {
            Ok(entry) => Ok(Some(entry)),
            Err(e) => Err(DataError::Cache {
                key,
                message: e.to_string(),
            }),
        }
    }

    /// Like `get`, but a corrupt entry logs a warning and reads as absent.
    pub fn get_or_absent<P: DeserializeOwned>(
        &self,
        descriptor: &CacheDescriptor,
    ) -> Option<CacheEntry<P>> {
        match self.get(descriptor) {
            Ok(found) => found,
            Err(err) => {
                log::warn!("{err}; treating entry as absent");
                None
            }
        }
    }

    pub fn put<P: Serialize>(
        &self,
        descriptor: &CacheDescriptor,
        raw_text: &str,
        payload: &P,
    ) -> Result<(), DataError> {
        let entry = CacheEntry {
            raw_text: raw_text.to_string(),
            payload,
            timestamp: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        };
        let path = self.path(&descriptor.key());
        let json = serde_json::to_string_pretty(&entry).expect("entry serializes");
        atomic_write(&path, json.as_bytes()).map_err(|e| io_err(&path, e))
    }
}

/// SHA-256 hex of a file's bytes, for run manifests.
pub fn file_sha256(path: &Path) -> Result<String, DataError> {
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    Ok(hex_encode(&Sha256::digest(&bytes)))
}

/// Short content hash used to keep sanitized file names collision-free.
pub fn short_hash(text: &str) -> String {
    hex_encode(&Sha256::digest(text.as_bytes()))[..8].to_string()
}
