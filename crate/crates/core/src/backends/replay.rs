use std::fs;
use std::path::PathBuf;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{BackendError, BackendKind, ChatBackend, GenerationRequest};
use crate::dataset::write_atomic;

#[derive(Serialize, Deserialize)]
struct Entry {
    request: GenerationRequest,
    response: String,
}

/// Responses stored one file per request digest. Without an inner backend
/// a miss is an error; with one, misses are fetched and recorded.
pub struct ReplayCache {
    dir: PathBuf,
    record: Option<Box<dyn ChatBackend>>,
    writes: Mutex<()>,
}

impl ReplayCache {
    pub fn replay(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: dir.into(),
            record: None,
            writes: Mutex::new(()),
        }
    }

    pub fn recording(dir: impl Into<PathBuf>, inner: Box<dyn ChatBackend>) -> Self {
        Self {
            record: Some(inner),
            ..Self::replay(dir)
        }
    }

    fn path(&self, digest: &str) -> PathBuf {
        self.dir.join(format!("{digest}.json"))
    }
}

impl ChatBackend for ReplayCache {
    fn generate(&self, request: &GenerationRequest) -> Result<String, BackendError> {
        request.validate()?;
        let digest = request.digest();
        let path = self.path(&digest);
        if let Ok(text) = fs::read_to_string(&path) {
            let entry: Entry = serde_json::from_str(&text)
                .map_err(|e| BackendError::Malformed(format!("{}: {e}", path.display())))?;
            return Ok(entry.response);
        }
        let Some(inner) = &self.record else {
            return Err(BackendError::CacheMiss { digest });
        };
        let response = inner.generate(request)?;
        let entry = Entry {
            request: request.clone(),
            response: response.clone(),
        };
        let bytes = serde_json::to_vec_pretty(&entry).map_err(|e| BackendError::Malformed(e.to_string()))?;
        let _guard = self.writes.lock().unwrap_or_else(|e| e.into_inner());
        write_atomic(&path, &bytes).map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(response)
    }

    fn kind(&self) -> BackendKind {
        BackendKind::ReplayCache
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{ChatMessage, Matcher, ScriptedMock};

    #[test]
    fn record_then_replay() {
        let dir = tempfile::tempdir().unwrap();
        let req = GenerationRequest::new(vec![ChatMessage::user("hello")], "m");
        let replay = ReplayCache::replay(dir.path());
        assert!(matches!(replay.generate(&req), Err(BackendError::CacheMiss { .. })));

        let mut mock = ScriptedMock::default();
        mock.push(vec![Matcher::Always], "world");
        let recorder = ReplayCache::recording(dir.path(), Box::new(mock));
        assert_eq!(recorder.generate(&req).unwrap(), "world");
        assert!(dir.path().join(format!("{}.json", req.digest())).is_file());

        assert_eq!(replay.generate(&req).unwrap(), "world");
        assert_eq!(replay.generate(&req).unwrap(), replay.generate(&req).unwrap());
    }
}
