use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BackendError, BackendKind, ChatBackend, GenerationRequest};
use crate::dataset;

/// A condition on the concatenated request text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matcher {
    Contains(String),
    NotContains(String),
    /// The needle occurs exactly `count` times. Iterative prompts repeat a
    /// heading per prior attempt, so this selects a response per iteration.
    Occurrences { needle: String, count: usize },
    Always,
}

impl Matcher {
    fn matches(&self, text: &str) -> bool {
        match self {
            Matcher::Contains(s) => text.contains(s.as_str()),
            Matcher::NotContains(s) => !text.contains(s.as_str()),
            Matcher::Occurrences { needle, count } => text.matches(needle.as_str()).count() == *count,
            Matcher::Always => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    /// All must hold; an empty list always matches.
    #[serde(default)]
    pub when: Vec<Matcher>,
    pub respond: String,
}

/// Deterministic backend: the first rule whose matchers all hold wins.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ScriptedMock {
    pub rules: Vec<Rule>,
}

impl ScriptedMock {
    pub fn new(rules: Vec<Rule>) -> Self {
        Self { rules }
    }

    pub fn push(&mut self, when: Vec<Matcher>, respond: impl Into<String>) -> &mut Self {
        self.rules.push(Rule {
            when,
            respond: respond.into(),
        });
        self
    }

    /// Reads a rule table from JSON (`{"rules": [...]}`).
    pub fn from_file(path: &Path) -> Result<Self, BackendError> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))
    }

    /// One rule per `golden/{id}/` directory: a request containing the
    /// datapoint's APL source is answered with `reference.cs`.
    pub fn from_golden(dir: &Path) -> Result<Self, BackendError> {
        let mut entries: Vec<_> = fs::read_dir(dir)?.collect::<Result<_, _>>()?;
        entries.sort_by_key(|e| e.file_name());
        let mut mock = Self::default();
        for entry in entries {
            let path = entry.path();
            let (dp, cs) = (path.join("datapoint.jsonl"), path.join("reference.cs"));
            if !dp.is_file() || !cs.is_file() {
                continue;
            }
            let loaded = dataset::load(&dp, dataset::Role::Train)
                .map_err(|e| BackendError::Config(e.to_string()))?;
            let reference = fs::read_to_string(&cs)?;
            for point in loaded.points {
                mock.push(vec![Matcher::Contains(point.apl.trim().to_string())], reference.clone());
            }
        }
        Ok(mock)
    }
}

impl ChatBackend for ScriptedMock {
    fn generate(&self, request: &GenerationRequest) -> Result<String, BackendError> {
        request.validate()?;
        let text = request.text();
        self.rules
            .iter()
            .find(|r| r.when.iter().all(|m| m.matches(&text)))
            .map(|r| r.respond.clone())
            .ok_or(BackendError::NoRule)
    }

    fn kind(&self) -> BackendKind {
        BackendKind::ScriptedMock
    }
}
