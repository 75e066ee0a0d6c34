use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::KgError;

const DEFAULT_VOCABULARY: &str = include_str!("../../assets/relations.txt");

/// A relation label drawn from a loaded [`Vocabulary`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RelationType(String);

impl RelationType {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for RelationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Ordered, duplicate-free list of canonical relation labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    labels: Vec<String>,
}

impl Vocabulary {
    /// Parses one label per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, KgError> {
        let mut labels = Vec::new();
        let mut seen = HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(idx) => &raw[..idx],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let label = line.to_lowercase();
            if !seen.insert(label.clone()) {
                return Err(KgError::Vocabulary(format!(
                    "duplicate label '{label}' on line {}",
                    lineno + 1
                )));
            }
            labels.push(label);
        }
        if labels.is_empty() {
            return Err(KgError::Vocabulary("vocabulary is empty".into()));
        }
        Ok(Self { labels })
    }

    pub fn load(path: &Path) -> Result<Self, KgError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| KgError::Vocabulary(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.labels.iter().any(|l| l == label)
    }

    /// Resolves a label to a [`RelationType`], rejecting anything outside the vocabulary.
    pub fn relation_type(&self, label: &str) -> Result<RelationType, KgError> {
        if self.contains(label) {
            Ok(RelationType(label.to_string()))
        } else {
            Err(KgError::UnknownRelationLabel(label.to_string()))
        }
    }
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::parse(DEFAULT_VOCABULARY).expect("bundled vocabulary is valid")
    }
}
