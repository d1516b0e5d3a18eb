//! Deterministic mock backend for offline runs and tests.
//!
//! Fixtures are keyed by the canonical request hash. On disk a fixture file
//! is named by the SHA-256 hex of the canonical request serialization (a
//! `.txt` suffix is tolerated) and its content is the assistant reply
//! verbatim; fixtures can also be registered in memory. The fixture map is
//! immutable once the backend is handed to a gateway.

use std::collections::HashMap;
use std::path::Path;

use super::{BackendError, ChatBackend, LlmRequest};

#[derive(Debug, Default)]
pub struct MockBackend {
    fixtures: HashMap<String, String>,
}

impl MockBackend {
    pub fn new() -> Self {
        Self::default()
    }

    /// Load every fixture from a directory; the file name (minus an
    /// optional `.txt` suffix) is the request hash.
    pub fn from_dir(dir: &Path) -> std::io::Result<Self> {
        let mut fixtures = HashMap::new();
        for entry in std::fs::read_dir(dir)? {
            let entry = entry?;
            let path = entry.path();
            if !path.is_file() {
                continue;
            }
            let Some(name) = path.file_name().and_then(|s| s.to_str()) else {
                continue;
            };
            let key = name.strip_suffix(".txt").unwrap_or(name);
            fixtures.insert(key.to_string(), std::fs::read_to_string(&path)?);
        }
        Ok(Self { fixtures })
    }

    /// Register the reply for a specific request.
    pub fn insert(&mut self, request: &LlmRequest, reply: impl Into<String>) {
        self.fixtures.insert(request.hash(), reply.into());
    }

    /// Register a reply under a precomputed hash.
    pub fn insert_hash(&mut self, hash: impl Into<String>, reply: impl Into<String>) {
        self.fixtures.insert(hash.into(), reply.into());
    }

    /// Write a fixture file for `request` into `dir`.
    pub fn write_fixture(
        dir: &Path,
        request: &LlmRequest,
        reply: &str,
    ) -> std::io::Result<std::path::PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(request.hash());
        std::fs::write(&path, reply)?;
        Ok(path)
    }

    pub fn len(&self) -> usize {
        self.fixtures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fixtures.is_empty()
    }
}

impl ChatBackend for MockBackend {
    fn complete(&self, request: &LlmRequest) -> Result<String, BackendError> {
        let hash = request.hash();
        self.fixtures
            .get(&hash)
            .cloned()
            .ok_or_else(|| BackendError::Fatal(format!("no fixture for request hash {hash}")))
    }

    fn name(&self) -> &str {
        "mock"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::Gateway;

    #[test]
    fn fixture_lookup_is_deterministic() {
        let req = LlmRequest::new("mock", "What is the capital of China?");
        let mut backend = MockBackend::new();
        backend.insert(&req, "Beijing");
        let gw = Gateway::new(Box::new(backend));
        assert_eq!(gw.complete(&req).unwrap(), "Beijing");
        assert_eq!(gw.complete(&req).unwrap(), "Beijing");
    }

    #[test]
    fn missing_fixture_is_fatal() {
        let gw = Gateway::new(Box::new(MockBackend::new()));
        let req = LlmRequest::new("mock", "unseen");
        assert!(gw.complete(&req).is_err());
    }

    #[test]
    fn loads_fixture_directory() {
        let dir = tempfile::tempdir().unwrap();
        let req = LlmRequest::new("mock", "hello");
        MockBackend::write_fixture(dir.path(), &req, "world").unwrap();
        let backend = MockBackend::from_dir(dir.path()).unwrap();
        assert_eq!(backend.len(), 1);
        let gw = Gateway::new(Box::new(backend));
        assert_eq!(gw.complete(&req).unwrap(), "world");
    }
}
