//! Wikipedia popularity over a fixed monthly window: fetch per-article page
//! views, winsorize outliers with the IQR rule, and min-max normalize to
//! [0, 1] within each question's candidate pool.
//!
//! Title resolution is exact-match only (underscore/space canonicalization,
//! first letter uppercased); an answer without an article is unresolved and
//! gets popularity 0. Totals above `Q3 + 1.5·IQR` (type-7 linear
//! interpolation quantiles over the pool's resolved totals) are clamped to
//! that bound rather than deleted, so every candidate keeps a popularity
//! value. Winsorization happens before normalization; the convention string
//! is recorded in every assignment.

use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::gateway::hex_encode;

/// First month of the fixed window, inclusive.
pub const WINDOW_START: &str = "201501";
/// Last month of the fixed window, inclusive.
pub const WINDOW_END: &str = "202412";
/// Months in the fixed window.
pub const WINDOW_MONTHS: usize = 120;

pub const DEFAULT_PAGEVIEWS_BASE_URL: &str = "https://wikimedia.org/api/rest_v1";
pub const PAGEVIEWS_BASE_URL_ENV: &str = "QDAPS_PAGEVIEWS_BASE_URL";

const USER_AGENT: &str = concat!(
    "qdaps/",
    env!("CARGO_PKG_VERSION"),
    " (question difficulty estimation; batch pageview lookups)"
);

/// Winsorize-then-normalize convention identifier recorded in results.
pub const POPULARITY_CONVENTION: &str = "iqr-winsorize-then-minmax";

/// Monthly page views for one resolved (or unresolved) article.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageviewSeries {
    /// Canonical article title ("Ernst_Hilgard" form).
    pub title: String,
    /// (YYYYMM, views) covering the full window when resolved.
    pub monthly_views: Vec<(String, u64)>,
    /// False when no article exists for the title.
    pub resolved: bool,
}

impl PageviewSeries {
    pub fn unresolved(title: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            monthly_views: Vec::new(),
            resolved: false,
        }
    }

    pub fn total(&self) -> u64 {
        self.monthly_views.iter().map(|(_, v)| v).sum()
    }
}

/// Per-candidate popularity after winsorization and normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopularityEntry {
    pub raw_total: u64,
    pub winsorized_total: f64,
    /// In [0, 1]; exactly 0 for unresolved candidates.
    pub popularity: f64,
}

/// Popularity for one candidate pool, aligned with the input order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopularityAssignment {
    pub entries: Vec<PopularityEntry>,
    pub convention: String,
}

#[derive(Debug, Error)]
pub enum PopularityError {
    #[error("pageview fetch for {title} failed after {attempts} attempts: {message}")]
    Transport {
        title: String,
        attempts: usize,
        message: String,
    },
    #[error("corrupt cache entry {path}: {message}")]
    Cache { path: String, message: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Canonicalize an answer string to an article title: collapse whitespace,
/// spaces to underscores, first letter uppercased. No search fallback.
pub fn canonical_title(answer: &str) -> String {
    let collapsed = answer.split_whitespace().collect::<Vec<_>>().join("_");
    let mut chars = collapsed.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

/// Linear-interpolation quantile (the common "type 7" convention) of sorted
/// data, `p` in [0, 1].
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    if sorted.len() == 1 {
        return sorted[0];
    }
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Assign popularity within one candidate pool.
///
/// Quantiles are computed over the resolved candidates' raw totals; totals
/// above `Q3 + 1.5·IQR` are clamped down to that bound; the clamped totals
/// are min-max normalized. Unresolved candidates get exactly 0. A constant
/// resolved pool maps to 1 so the pool maximum is always 1 when anything
/// resolved.
pub fn assign_popularity(pool: &[PageviewSeries]) -> PopularityAssignment {
    assert!(!pool.is_empty(), "assign_popularity needs at least one candidate");
    let resolved_totals: Vec<f64> = pool
        .iter()
        .filter(|s| s.resolved)
        .map(|s| s.total() as f64)
        .collect();

    let bound = if resolved_totals.is_empty() {
        None
    } else {
        let mut sorted = resolved_totals.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q1 = quantile_type7(&sorted, 0.25);
        let q3 = quantile_type7(&sorted, 0.75);
        Some(q3 + 1.5 * (q3 - q1))
    };

    let winsorized: Vec<Option<f64>> = pool
        .iter()
        .map(|s| {
            if !s.resolved {
                return None;
            }
            let total = s.total() as f64;
            Some(match bound {
                Some(b) if total > b => b,
                _ => total,
            })
        })
        .collect();

    let (min, max) = winsorized
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });

    let entries = pool
        .iter()
        .zip(&winsorized)
        .map(|(series, w)| {
            let raw_total = series.total();
            match w {
                None => PopularityEntry {
                    raw_total,
                    winsorized_total: 0.0,
                    popularity: 0.0,
                },
                Some(w) => {
                    let popularity = if max == min {
                        1.0
                    } else {
                        (w - min) / (max - min)
                    };
                    PopularityEntry {
                        raw_total,
                        winsorized_total: *w,
                        popularity,
                    }
                }
            }
        })
        .collect();

    PopularityAssignment {
        entries,
        convention: POPULARITY_CONVENTION.to_string(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CachedSeries {
    title: String,
    window_start: String,
    window_end: String,
    fetched_at: u64,
    resolved: bool,
    monthly_views: Vec<(String, u64)>,
}

/// Pageview fetcher with an on-disk cache, politeness delay, and an
/// offline (cache-only) mode.
pub struct PageviewClient {
    base_url: String,
    cache_dir: Option<PathBuf>,
    offline: bool,
    retry_delay: Duration,
    max_tries: usize,
    politeness: Duration,
    last_request: Mutex<Option<Instant>>,
    fetches: AtomicU64,
    client: reqwest::blocking::Client,
}

impl PageviewClient {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            cache_dir: None,
            offline: false,
            retry_delay: Duration::from_secs(1),
            max_tries: 5,
            politeness: Duration::from_millis(100),
            last_request: Mutex::new(None),
            fetches: AtomicU64::new(0),
            client: reqwest::blocking::Client::builder()
                .user_agent(USER_AGENT)
                .build()
                .expect("client builds"),
        }
    }

    /// Base URL from `QDAPS_PAGEVIEWS_BASE_URL`, falling back to the
    /// public endpoint.
    pub fn from_env() -> Self {
        let base = std::env::var(PAGEVIEWS_BASE_URL_ENV)
            .unwrap_or_else(|_| DEFAULT_PAGEVIEWS_BASE_URL.to_string());
        Self::new(base)
    }

    pub fn with_cache_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.cache_dir = Some(dir.into());
        self
    }

    /// Cache-only mode: uncached titles become unresolved with a warning.
    pub fn offline(mut self, offline: bool) -> Self {
        self.offline = offline;
        self
    }

    pub fn with_retry(mut self, delay: Duration, max_tries: usize) -> Self {
        self.retry_delay = delay;
        self.max_tries = max_tries.max(1);
        self
    }

    pub fn with_politeness(mut self, delay: Duration) -> Self {
        self.politeness = delay;
        self
    }

    /// HTTP fetches issued so far (cache hits excluded).
    pub fn fetches_made(&self) -> u64 {
        self.fetches.load(Ordering::SeqCst)
    }

    fn cache_path(&self, title: &str) -> Option<PathBuf> {
        let dir = self.cache_dir.as_ref()?;
        let digest = Sha256::digest(title.as_bytes());
        Some(dir.join(format!("{}.json", hex_encode(&digest))))
    }

    fn read_cache(&self, title: &str) -> Result<Option<PageviewSeries>, PopularityError> {
        let Some(path) = self.cache_path(title) else {
            return Ok(None);
        };
        if !path.exists() {
            return Ok(None);
        }
        let data = std::fs::read_to_string(&path)?;
        match serde_json::from_str::<CachedSeries>(&data) {
            Ok(cached) => Ok(Some(PageviewSeries {
                title: cached.title,
                monthly_views: cached.monthly_views,
                resolved: cached.resolved,
            })),
            Err(err) => Err(PopularityError::Cache {
                path: path.display().to_string(),
                message: err.to_string(),
            }),
        }
    }

    fn write_cache(&self, series: &PageviewSeries) -> Result<(), PopularityError> {
        let Some(path) = self.cache_path(&series.title) else {
            return Ok(());
        };
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let cached = CachedSeries {
            title: series.title.clone(),
            window_start: WINDOW_START.to_string(),
            window_end: WINDOW_END.to_string(),
            fetched_at: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            resolved: series.resolved,
            monthly_views: series.monthly_views.clone(),
        };
        crate::datastore::atomic_write(&path, serde_json::to_string(&cached).unwrap().as_bytes())?;
        Ok(())
    }

    /// Resolve an answer to its article and fetch the monthly view series
    /// over the fixed window, serving from cache when possible.
    pub fn fetch_monthly_views(&self, answer: &str) -> Result<PageviewSeries, PopularityError> {
        let title = canonical_title(answer);
        if title.is_empty() {
            return Ok(PageviewSeries::unresolved(title));
        }
        let cached = match self.read_cache(&title) {
            Ok(found) => found,
            Err(err @ PopularityError::Cache { .. }) => {
                log::warn!("{err}; treating entry as absent");
                None
            }
            Err(err) => return Err(err),
        };
        if let Some(series) = cached {
            return Ok(series);
        }
        if self.offline {
            log::warn!("offline mode: no cached pageviews for {title}; treating as unresolved");
            return Ok(PageviewSeries::unresolved(title));
        }

        let series = self.fetch_remote(&title)?;
        self.write_cache(&series)?;
        Ok(series)
    }

    fn fetch_remote(&self, title: &str) -> Result<PageviewSeries, PopularityError> {
        let url = format!(
            "{}/metrics/pageviews/per-article/en.wikipedia/all-access/user/{}/monthly/{}0100/{}3100",
            self.base_url,
            urlencode(title),
            WINDOW_START,
            WINDOW_END,
        );
        let mut last = String::new();
        for attempt in 1..=self.max_tries {
            if attempt > 1 {
                std::thread::sleep(self.retry_delay * 2u32.saturating_pow(attempt as u32 - 2));
            }
            self.pause_for_politeness();
            self.fetches.fetch_add(1, Ordering::SeqCst);
            let response = match self.client.get(&url).send() {
                Ok(r) => r,
                Err(e) => {
                    last = e.to_string();
                    continue;
                }
            };
            let status = response.status();
            if status == reqwest::StatusCode::NOT_FOUND {
                return Ok(PageviewSeries::unresolved(title));
            }
            if status.is_success() {
                let body: PageviewResponse = response.json().map_err(|e| {
                    PopularityError::Transport {
                        title: title.to_string(),
                        attempts: attempt,
                        message: format!("malformed pageview response: {e}"),
                    }
                })?;
                return Ok(series_from_items(title, &body.items));
            }
            last = format!("HTTP {status}");
            if !(status.is_server_error() || status == reqwest::StatusCode::TOO_MANY_REQUESTS) {
                return Err(PopularityError::Transport {
                    title: title.to_string(),
                    attempts: attempt,
                    message: last,
                });
            }
        }
        Err(PopularityError::Transport {
            title: title.to_string(),
            attempts: self.max_tries,
            message: last,
        })
    }

    fn pause_for_politeness(&self) {
        let mut last = self.last_request.lock().unwrap();
        if let Some(at) = *last {
            let since = at.elapsed();
            if since < self.politeness {
                std::thread::sleep(self.politeness - since);
            }
        }
        *last = Some(Instant::now());
    }
}

#[derive(Debug, Deserialize)]
struct PageviewResponse {
    #[serde(default)]
    items: Vec<PageviewItem>,
}

#[derive(Debug, Deserialize)]
struct PageviewItem {
    timestamp: String,
    views: u64,
}

/// Expand API items into the full contiguous window, zero-filling months
/// the API omitted.
fn series_from_items(title: &str, items: &[PageviewItem]) -> PageviewSeries {
    let mut monthly_views: Vec<(String, u64)> = window_months()
        .into_iter()
        .map(|m| (m, 0u64))
        .collect();
    for item in items {
        if item.timestamp.len() < 6 {
            continue;
        }
        let month = &item.timestamp[..6];
        if let Some(slot) = monthly_views.iter_mut().find(|(m, _)| m == month) {
            slot.1 += item.views;
        }
    }
    PageviewSeries {
        title: title.to_string(),
        monthly_views,
        resolved: true,
    }
}

/// The 120 months of the fixed window, in order.
pub fn window_months() -> Vec<String> {
    let mut months = Vec::with_capacity(WINDOW_MONTHS);
    for year in 2015..=2024 {
        for month in 1..=12 {
            months.push(format!("{year}{month:02}"));
        }
    }
    months
}

fn urlencode(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for byte in s.bytes() {
        match byte {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'_' | b'-' | b'.' | b'~' => {
                out.push(byte as char)
            }
            other => out.push_str(&format!("%{other:02X}")),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolved(title: &str, total: u64) -> PageviewSeries {
        PageviewSeries {
            title: title.into(),
            monthly_views: vec![("201501".into(), total)],
            resolved: true,
        }
    }

    #[test]
    fn title_canonicalization() {
        assert_eq!(canonical_title("Ernst Hilgard"), "Ernst_Hilgard");
        assert_eq!(canonical_title("  beijing "), "Beijing");
        assert_eq!(canonical_title("B.F. Skinner"), "B.F._Skinner");
        assert_eq!(canonical_title(""), "");
    }

    #[test]
    fn quantiles_linear_interpolation() {
        let sorted = [1.0, 2.0, 3.0, 1000.0];
        assert!((quantile_type7(&sorted, 0.25) - 1.75).abs() < 1e-12);
        assert!((quantile_type7(&sorted, 0.75) - 252.25).abs() < 1e-12);
        assert_eq!(quantile_type7(&[7.0], 0.5), 7.0);
    }

    #[test]
    fn winsorizes_the_outlier() {
        // Q1 = 1.75, Q3 = 252.25, bound = 252.25 + 1.5*250.5 = 628.0.
        let pool = vec![
            resolved("a", 1),
            resolved("b", 2),
            resolved("c", 3),
            resolved("d", 1000),
        ];
        let assignment = assign_popularity(&pool);
        assert!((assignment.entries[3].winsorized_total - 628.0).abs() < 1e-9);
        assert_eq!(assignment.entries[0].popularity, 0.0);
        assert!((assignment.entries[1].popularity - 1.0 / 627.0).abs() < 1e-12);
        assert!((assignment.entries[2].popularity - 2.0 / 627.0).abs() < 1e-12);
        assert_eq!(assignment.entries[3].popularity, 1.0);
        assert_eq!(assignment.convention, POPULARITY_CONVENTION);
    }

    #[test]
    fn constant_pool_maps_to_one() {
        let pool = vec![resolved("a", 10), resolved("b", 10), resolved("c", 10)];
        let assignment = assign_popularity(&pool);
        for e in &assignment.entries {
            assert_eq!(e.popularity, 1.0);
        }
    }

    #[test]
    fn unresolved_is_zero_and_all_unresolved_pool_is_zero() {
        let pool = vec![
            PageviewSeries::unresolved("Zzxqv_Qwerty"),
            resolved("b", 500),
        ];
        let assignment = assign_popularity(&pool);
        assert_eq!(assignment.entries[0].popularity, 0.0);
        assert_eq!(assignment.entries[1].popularity, 1.0);

        let none = vec![
            PageviewSeries::unresolved("x"),
            PageviewSeries::unresolved("y"),
        ];
        for e in assign_popularity(&none).entries {
            assert_eq!(e.popularity, 0.0);
            assert_eq!(e.raw_total, 0);
        }
    }

    #[test]
    fn monotone_in_raw_totals() {
        let pool = vec![
            resolved("a", 10),
            resolved("b", 500),
            resolved("c", 500),
            resolved("d", 20_000),
        ];
        let entries = assign_popularity(&pool).entries;
        for pair in entries.windows(2) {
            assert!(pair[0].popularity <= pair[1].popularity);
        }
    }

    #[test]
    fn scaling_invariance() {
        let pool_a = vec![resolved("a", 10), resolved("b", 70), resolved("c", 400)];
        let pool_b = vec![resolved("a", 100), resolved("b", 700), resolved("c", 4000)];
        let a = assign_popularity(&pool_a);
        let b = assign_popularity(&pool_b);
        for (x, y) in a.entries.iter().zip(&b.entries) {
            assert!((x.popularity - y.popularity).abs() < 1e-12);
        }
    }

    #[test]
    fn offline_mode_misses_become_unresolved() {
        let dir = tempfile::tempdir().unwrap();
        let client = PageviewClient::new("http://127.0.0.1:1")
            .with_cache_dir(dir.path())
            .offline(true);
        let series = client.fetch_monthly_views("Uncached Thing").unwrap();
        assert!(!series.resolved);
        assert_eq!(client.fetches_made(), 0);
    }

    #[test]
    fn window_has_120_contiguous_months() {
        let months = window_months();
        assert_eq!(months.len(), WINDOW_MONTHS);
        assert_eq!(months.first().unwrap(), WINDOW_START);
        assert_eq!(months.last().unwrap(), WINDOW_END);
    }
}
