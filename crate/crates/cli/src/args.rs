//! Flag parsing and configuration resolution.
//!
//! Precedence: built-in defaults, then the optional key-value config file,
//! then command-line flags. Config keys mirror flag names without the
//! leading dashes (`alpha = 0.25`, `no-debias = true`).

use std::collections::HashMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use qdaps::eval::GridMetric;
use qdaps::types::Mode;

#[derive(Parser)]
#[command(name = "qdaps", version, about = "Question difficulty estimation for LLM-based QA")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate validated candidate answers with plausibility scores.
    Generate(RawArgs),
    /// Annotate candidate pools with Wikipedia popularity.
    Popularity(RawArgs),
    /// Compute difficulty scores (or a named baseline) over candidates.
    Score(RawArgs),
    /// Run QA models and judges, then compute d, rho, and tau.
    Evaluate(RawArgs),
    /// Replay the scoring math over the full alpha/N grid from caches.
    Gridsearch(RawArgs),
}

impl Command {
    pub fn raw(&self) -> &RawArgs {
        match self {
            Command::Generate(raw)
            | Command::Popularity(raw)
            | Command::Score(raw)
            | Command::Evaluate(raw)
            | Command::Gridsearch(raw) => raw,
        }
    }

}

#[derive(Args, Debug, Default)]
pub struct RawArgs {
    /// Input dataset (JSONL) or candidates directory, depending on command.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output directory for result files and the run manifest.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Cache directory ({cache}/llm, {cache}/pageviews).
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Model id sent to the backend and recorded in cache keys.
    #[arg(long)]
    pub model: Option<String>,
    /// Plausibility elicitation mode.
    #[arg(long, value_parser = ["listwise", "pointwise", "pairwise"])]
    pub mode: Option<String>,
    /// Debiasing strength in [0, 1].
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Number of candidates entering the distribution, in [1, 20].
    #[arg(long)]
    pub n: Option<usize>,
    /// Skip popularity debiasing.
    #[arg(long)]
    pub no_debias: bool,
    /// Never show the gold answer to the generating model.
    #[arg(long)]
    pub no_gold: bool,
    /// Scoring method.
    #[arg(long, value_parser = ["qdaps", "avg", "fk", "fog", "prompt", "popularity"])]
    pub method: Option<String>,
    /// Grid-search metric.
    #[arg(long, value_parser = ["cohens-d", "spearman"])]
    pub metric: Option<String>,
    /// Comma-separated judge model ids (odd count).
    #[arg(long)]
    pub judges: Option<String>,
    /// Comma-separated QA model ids.
    #[arg(long)]
    pub qa_models: Option<String>,
    /// Precomputed evaluation records (JSONL), skipping QA and judging.
    #[arg(long)]
    pub records: Option<PathBuf>,
    /// Cache-only mode: no network calls; uncached pages are unresolved.
    #[arg(long)]
    pub offline: bool,
    /// Seed for sampling and randomized presentation order.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: logical cores, capped by the gateway's
    /// in-flight limit).
    #[arg(long)]
    pub parallelism: Option<usize>,
    /// Cap on generation attempts per work unit.
    #[arg(long)]
    pub max_attempts: Option<usize>,
    /// Temperature of the first attempt.
    #[arg(long)]
    pub base_temperature: Option<f64>,
    /// Key-value config file mirroring these flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Mock backend fixture directory (fixture name = request hash).
    #[arg(long)]
    pub fixtures: Option<PathBuf>,
    /// Stratified-sample this many questions (by wh-word class) before
    /// generation, using --seed.
    #[arg(long)]
    pub sample: Option<usize>,
    /// Randomize pairwise presentation order (position-bias mitigation).
    #[arg(long)]
    pub randomize_pairs: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Qdaps,
    Avg,
    Fk,
    Fog,
    Prompt,
    Popularity,
}

impl Method {
    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "qdaps" => Method::Qdaps,
            "avg" => Method::Avg,
            "fk" => Method::Fk,
            "fog" => Method::Fog,
            "prompt" => Method::Prompt,
            "popularity" => Method::Popularity,
            other => bail!("unknown method: {other}"),
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Qdaps => "qdaps",
            Method::Avg => "avg",
            Method::Fk => "fk",
            Method::Fog => "fog",
            Method::Prompt => "prompt",
            Method::Popularity => "popularity",
        }
    }
}

/// Fully resolved run configuration (defaults < config file < flags).
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub input: PathBuf,
    pub output: PathBuf,
    pub cache_dir: Option<PathBuf>,
    pub model: String,
    pub mode: Mode,
    pub alpha: f64,
    pub n: usize,
    pub no_debias: bool,
    pub no_gold: bool,
    pub method: Method,
    pub metric: GridMetric,
    pub judges: Vec<String>,
    pub qa_models: Vec<String>,
    pub records: Option<PathBuf>,
    pub offline: bool,
    pub seed: u64,
    pub parallelism: usize,
    pub max_attempts: usize,
    pub base_temperature: f64,
    pub fixtures: Option<PathBuf>,
    pub sample: Option<usize>,
    pub randomize_pairs: bool,
}

fn parse_config_file(path: &PathBuf) -> Result<HashMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config file {}", path.display()))?;
    let mut map = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!(
                "config file {}:{} is not `key = value`",
                path.display(),
                lineno + 1
            );
        };
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        other => bail!("config key {key} expects a boolean, got {other:?}"),
    }
}

fn split_models(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

pub fn resolve(raw: &RawArgs) -> Result<Resolved> {
    let file = match &raw.config {
        Some(path) => parse_config_file(path)?,
        None => HashMap::new(),
    };
    let get = |key: &str| file.get(key).cloned();

    macro_rules! pick {
        ($flag:expr, $key:literal, $parse:expr, $default:expr) => {
            match (&$flag, get($key)) {
                (Some(v), _) => v.clone(),
                (None, Some(text)) => $parse(&text)
                    .with_context(|| format!("config key {} = {:?}", $key, text))?,
                (None, None) => $default,
            }
        };
    }

    let input = pick!(raw.input, "input", |t: &str| Ok::<_, anyhow::Error>(PathBuf::from(t)), bail!("--input is required"));
    let output = pick!(raw.output, "output", |t: &str| Ok::<_, anyhow::Error>(PathBuf::from(t)), bail!("--output is required"));

    let cache_dir = raw
        .cache_dir
        .clone()
        .or_else(|| get("cache-dir").map(PathBuf::from));
    let records = raw.records.clone().or_else(|| get("records").map(PathBuf::from));
    let fixtures = raw.fixtures.clone().or_else(|| get("fixtures").map(PathBuf::from));

    let model = pick!(raw.model, "model", |t: &str| Ok::<_, anyhow::Error>(t.to_string()), "mock".to_string());
    let mode_text = pick!(raw.mode, "mode", |t: &str| Ok::<_, anyhow::Error>(t.to_string()), "listwise".to_string());
    let mode: Mode = mode_text.parse().map_err(anyhow::Error::msg)?;
    let alpha = pick!(raw.alpha, "alpha", |t: &str| t.parse::<f64>().map_err(anyhow::Error::from), 0.5);
    let n = pick!(raw.n, "n", |t: &str| t.parse::<usize>().map_err(anyhow::Error::from), 8);
    let seed = pick!(raw.seed, "seed", |t: &str| t.parse::<u64>().map_err(anyhow::Error::from), 0);
    let max_attempts = pick!(raw.max_attempts, "max-attempts", |t: &str| t.parse::<usize>().map_err(anyhow::Error::from), 10);
    let base_temperature = pick!(raw.base_temperature, "base-temperature", |t: &str| t.parse::<f64>().map_err(anyhow::Error::from), 0.0);

    let default_parallelism = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(4)
        .min(8);
    let parallelism = pick!(raw.parallelism, "parallelism", |t: &str| t.parse::<usize>().map_err(anyhow::Error::from), default_parallelism)
        .max(1);

    let sample = match (&raw.sample, get("sample")) {
        (Some(k), _) => Some(*k),
        (None, Some(text)) => Some(text.parse::<usize>().context("config key sample")?),
        (None, None) => None,
    };
    let no_debias = raw.no_debias
        || get("no-debias").map(|v| parse_bool("no-debias", &v)).transpose()?.unwrap_or(false);
    let no_gold = raw.no_gold
        || get("no-gold").map(|v| parse_bool("no-gold", &v)).transpose()?.unwrap_or(false);
    let offline = raw.offline
        || get("offline").map(|v| parse_bool("offline", &v)).transpose()?.unwrap_or(false);
    let randomize_pairs = raw.randomize_pairs
        || get("randomize-pairs")
            .map(|v| parse_bool("randomize-pairs", &v))
            .transpose()?
            .unwrap_or(false);

    let method_text = pick!(raw.method, "method", |t: &str| Ok::<_, anyhow::Error>(t.to_string()), "qdaps".to_string());
    let method = Method::parse(&method_text)?;
    let metric_text = pick!(raw.metric, "metric", |t: &str| Ok::<_, anyhow::Error>(t.to_string()), "cohens-d".to_string());
    let metric = match metric_text.as_str() {
        "cohens-d" => GridMetric::CohensD,
        "spearman" => GridMetric::Spearman,
        other => bail!("unknown metric: {other}"),
    };

    let judges = raw
        .judges
        .clone()
        .or_else(|| get("judges"))
        .map(|v| split_models(&v))
        .unwrap_or_default();
    let qa_models = raw
        .qa_models
        .clone()
        .or_else(|| get("qa-models"))
        .map(|v| split_models(&v))
        .unwrap_or_default();

    if !(0.0..=1.0).contains(&alpha) {
        bail!("--alpha must be in [0, 1], got {alpha}");
    }
    if !(1..=20).contains(&n) {
        bail!("--n must be in [1, 20], got {n}");
    }

    Ok(Resolved {
        input,
        output,
        cache_dir,
        model,
        mode,
        alpha,
        n,
        no_debias,
        no_gold,
        method,
        metric,
        judges,
        qa_models,
        records,
        offline,
        seed,
        parallelism,
        max_attempts,
        base_temperature,
        fixtures,
        sample,
        randomize_pairs,
    })
}

impl Resolved {
    pub fn scoring_config(&self) -> qdaps::ScoringConfig {
        qdaps::ScoringConfig {
            alpha: self.alpha,
            n_candidates: self.n,
            mode: self.mode,
            gold_policy: if self.no_gold {
                qdaps::GoldPolicy::WithoutGold
            } else {
                qdaps::GoldPolicy::WithGold
            },
            debias: !self.no_debias,
            model_id: self.model.clone(),
            max_attempts: self.max_attempts,
            base_temperature: self.base_temperature,
            equivalence: qdaps::EquivalencePolicy::NormalizedString,
            selection: qdaps::SelectionPolicy::TopPlausibility,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn defaults_resolve() {
        let raw = RawArgs {
            input: Some(PathBuf::from("in.jsonl")),
            output: Some(PathBuf::from("out")),
            ..RawArgs::default()
        };
        let resolved = resolve(&raw).unwrap();
        assert_eq!(resolved.alpha, 0.5);
        assert_eq!(resolved.n, 8);
        assert_eq!(resolved.mode, Mode::Listwise);
        assert!(!resolved.no_debias);
        assert_eq!(resolved.max_attempts, 10);
        assert_eq!(resolved.base_temperature, 0.0);
    }

    #[test]
    fn file_overrides_defaults_and_flags_override_file() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "# run settings").unwrap();
        writeln!(file, "alpha = 0.25").unwrap();
        writeln!(file, "n = 12").unwrap();
        writeln!(file, "no-debias = true").unwrap();
        file.flush().unwrap();

        let raw = RawArgs {
            input: Some(PathBuf::from("in.jsonl")),
            output: Some(PathBuf::from("out")),
            alpha: Some(0.9),
            config: Some(file.path().to_path_buf()),
            ..RawArgs::default()
        };
        let resolved = resolve(&raw).unwrap();
        assert_eq!(resolved.alpha, 0.9, "flag beats file");
        assert_eq!(resolved.n, 12, "file beats default");
        assert!(resolved.no_debias);
    }

    #[test]
    fn range_checks() {
        let raw = RawArgs {
            input: Some(PathBuf::from("in.jsonl")),
            output: Some(PathBuf::from("out")),
            alpha: Some(1.5),
            ..RawArgs::default()
        };
        assert!(resolve(&raw).is_err());
    }

    #[test]
    fn model_lists_split_on_commas() {
        let raw = RawArgs {
            input: Some(PathBuf::from("in.jsonl")),
            output: Some(PathBuf::from("out")),
            judges: Some("j1, j2,j3".into()),
            qa_models: Some("m1".into()),
            ..RawArgs::default()
        };
        let resolved = resolve(&raw).unwrap();
        assert_eq!(resolved.judges, vec!["j1", "j2", "j3"]);
        assert_eq!(resolved.qa_models, vec!["m1"]);
    }
}
