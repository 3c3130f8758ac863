//! Scripted backend: canned responses keyed by (image_ref, question).

use std::collections::BTreeMap;

use serde::Deserialize;

use super::{AdapterBackend, AdapterError, AdapterRequest, AdapterResponse};

/// Separator between image_ref and question in fixture keys.
pub const FIXTURE_KEY_SEP: char = '\u{0}';

/// A fixture entry is one canned response, or several when a key must answer
/// more than one role (slow-path scripts).
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum FixtureEntry {
    One(AdapterResponse),
    Many(Vec<AdapterResponse>),
}

impl FixtureEntry {
    fn responses(&self) -> &[AdapterResponse] {
        match self {
            FixtureEntry::One(r) => std::slice::from_ref(r),
            FixtureEntry::Many(rs) => rs,
        }
    }
}

/// Read-only map of canned responses. Safe to share across threads.
pub struct FixtureBackend {
    entries: BTreeMap<String, FixtureEntry>,
}

impl FixtureBackend {
    /// Parses the fixture file format: a JSON map from
    /// `"<image_ref>\u0000<question>"` keys to canned response objects
    /// (single object or array of objects).
    pub fn from_json(json: &str) -> Result<Self, AdapterError> {
        let entries: BTreeMap<String, FixtureEntry> = serde_json::from_str(json)
            .map_err(|e| AdapterError::Parse(format!("fixture file: {e}")))?;
        Ok(Self { entries })
    }

    pub fn key_for(image_ref: &str, question: &str) -> String {
        format!("{image_ref}{FIXTURE_KEY_SEP}{question}")
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl AdapterBackend for FixtureBackend {
    fn call(&self, req: &AdapterRequest) -> Result<AdapterResponse, AdapterError> {
        let key = Self::key_for(&req.query.image_ref, &req.query.question);
        let entry = self.entries.get(&key).ok_or_else(|| {
            AdapterError::Backend(format!(
                "no fixture for image {:?} question {:?}",
                req.query.image_ref, req.query.question
            ))
        })?;
        entry
            .responses()
            .iter()
            .find(|r| r.role == req.role)
            .cloned()
            .ok_or_else(|| {
                AdapterError::Backend(format!(
                    "no fixture for role {} under image {:?} question {:?}",
                    req.role, req.query.image_ref, req.query.question
                ))
            })
    }

    fn name(&self) -> &str {
        "fixture"
    }
}
