use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use super::text::tokenize;
use super::{ExtractionError, Mention};
use crate::kg::EntityType;

const DEFAULT_GAZETTEER: &str = include_str!("../../assets/gazetteer.tsv");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GazetteerEntry {
    pub canonical: String,
    pub entity_type: EntityType,
}

/// Case-insensitive term dictionary with leftmost-longest matching over tokens.
#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    terms: HashMap<String, GazetteerEntry>,
    surface: BTreeMap<String, BTreeSet<String>>,
    max_tokens: usize,
}

fn term_key(term: &str) -> String {
    tokenize(term)
        .iter()
        .map(|t| t.text.to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
}

impl Gazetteer {
    /// Parses `term<TAB>canonical_name<TAB>entity_type` lines; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self, ExtractionError> {
        let mut g = Gazetteer::default();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let bad = |msg: &str| ExtractionError::Gazetteer {
                line: idx + 1,
                message: msg.to_string(),
            };
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(bad("expected three tab-separated columns"));
            }
            let entity_type = EntityType::parse(cols[2]).map_err(|e| bad(&e.to_string()))?;
            g.insert(cols[0], cols[1], entity_type).map_err(|m| bad(&m))?;
        }
        Ok(g)
    }

    pub fn load(path: &Path) -> Result<Self, ExtractionError> {
        let text = std::fs::read_to_string(path).map_err(|e| ExtractionError::Gazetteer {
            line: 0,
            message: format!("{}: {e}", path.display()),
        })?;
        Self::parse(&text)
    }

    pub fn insert(&mut self, term: &str, canonical: &str, entity_type: EntityType) -> Result<(), String> {
        let key = term_key(term);
        let canonical = canonical.trim();
        if key.is_empty() || canonical.is_empty() {
            return Err("term and canonical name must be non-empty".into());
        }
        let entry = GazetteerEntry {
            canonical: canonical.to_string(),
            entity_type,
        };
        if let Some(prev) = self.terms.get(&key) {
            if prev != &entry {
                return Err(format!("term '{term}' already maps to '{}'", prev.canonical));
            }
            return Ok(());
        }
        self.max_tokens = self.max_tokens.max(key.split(' ').count());
        self.surface
            .entry(canonical.to_string())
            .or_default()
            .insert(term.trim().to_string());
        self.terms.insert(key, entry);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn lookup(&self, term: &str) -> Option<&GazetteerEntry> {
        self.terms.get(&term_key(term))
    }

    pub fn canonical_names(&self) -> impl Iterator<Item = &str> {
        self.surface.keys().map(String::as_str)
    }

    /// Every surface term that maps to `canonical`.
    pub fn aliases_of(&self, canonical: &str) -> impl Iterator<Item = &str> {
        self.surface
            .get(canonical)
            .into_iter()
            .flatten()
            .map(String::as_str)
    }

    /// Non-overlapping leftmost-longest matches, sorted by start.
    ///
    /// A multi-token match never runs across punctuation stripped from
    /// between its tokens, so "EGFR. Pathway" is not "EGFR pathway".
    pub fn extract_entities(&self, text: &str, pmid: &str) -> Vec<Mention> {
        let tokens = tokenize(text);
        let mut out = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            let mut matched = None;
            let longest = self.max_tokens.min(tokens.len() - i);
            for len in (1..=longest).rev() {
                let span = &tokens[i..i + len];
                let broken = span[..len - 1].iter().any(|t| t.trail_punct)
                    || span[1..].iter().any(|t| t.lead_punct);
                if broken {
                    continue;
                }
                let key = span
                    .iter()
                    .map(|t| t.text.to_lowercase())
                    .collect::<Vec<_>>()
                    .join(" ");
                if let Some(entry) = self.terms.get(&key) {
                    matched = Some((len, entry));
                    break;
                }
            }
            match matched {
                Some((len, entry)) => {
                    out.push(Mention {
                        canonical: entry.canonical.clone(),
                        entity_type: entry.entity_type.clone(),
                        start: tokens[i].start,
                        end: tokens[i + len - 1].end,
                        pmid: pmid.to_string(),
                    });
                    i += len;
                }
                None => i += 1,
            }
        }
        out
    }
}

impl Gazetteer {
    pub fn bundled() -> Self {
        Self::parse(DEFAULT_GAZETTEER).expect("bundled gazetteer is valid")
    }
}
