use std::collections::HashSet;
use std::path::Path;

use super::text::{sentences, tokenize};
use super::{ExtractionError, Mention, RawTriple};

const DEFAULT_VERBS: &str = include_str!("../../assets/verbs.txt");

pub const MAX_PHRASE_TOKENS: usize = 6;

/// Verb forms that license a relation between two mentions.
#[derive(Debug, Clone)]
pub struct VerbLexicon {
    verbs: HashSet<String>,
}

impl VerbLexicon {
    pub fn parse(text: &str) -> Result<Self, ExtractionError> {
        let verbs: HashSet<String> = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim().to_lowercase())
            .filter(|l| !l.is_empty())
            .collect();
        if verbs.is_empty() {
            return Err(ExtractionError::Lexicon("verb lexicon is empty".into()));
        }
        Ok(Self { verbs })
    }

    pub fn load(path: &Path) -> Result<Self, ExtractionError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExtractionError::Lexicon(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.verbs.contains(&word.to_lowercase())
    }
}

impl Default for VerbLexicon {
    fn default() -> Self {
        Self::parse(DEFAULT_VERBS).expect("bundled verb lexicon is valid")
    }
}

/// Pattern triples from adjacent mention pairs within one sentence.
///
/// The phrase runs from the first lexicon verb in the gap to the end of the
/// gap, capped at [`MAX_PHRASE_TOKENS`]. A gap ending in "by" after the verb
/// is read as passive and the pair is swapped ("EGFR is inhibited by X").
pub fn extract_relations(text: &str, mentions: &[Mention], lexicon: &VerbLexicon) -> Vec<RawTriple> {
    let mut out = Vec::new();
    for (s, e) in sentences(text) {
        let inside: Vec<&Mention> = mentions.iter().filter(|m| m.start >= s && m.end <= e).collect();
        for pair in inside.windows(2) {
            let (left, right) = (pair[0], pair[1]);
            if left.canonical == right.canonical {
                continue;
            }
            let gap = tokenize(&text[left.end..right.start]);
            let Some(first) = gap.iter().position(|t| lexicon.contains(t.text)) else {
                continue;
            };
            let mut words: Vec<&str> = gap[first..].iter().map(|t| t.text).collect();
            let passive = words.len() > 1 && words.last().is_some_and(|w| w.eq_ignore_ascii_case("by"));
            if passive {
                words.pop();
            }
            words.truncate(MAX_PHRASE_TOKENS);
            let phrase = words.join(" ");
            let (subject, object) = if passive { (right, left) } else { (left, right) };
            out.push(RawTriple {
                subject: subject.clone(),
                phrase,
                object: object.clone(),
                pmid: left.pmid.clone(),
            });
        }
    }
    out
}
