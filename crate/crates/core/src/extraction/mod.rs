//! Abstract text to typed triples: gazetteer mentions, verb-pattern
//! relations and embedding-based normalization onto the relation vocabulary.

mod embedder;
mod gazetteer;
mod normalize;
mod relations;
pub mod text;

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::kg::{Document, EntityType, RelationType, Vocabulary};

pub use embedder::{humanize, EmbedError, TextEmbeddingProvider, TrigramHashEmbedder};
pub use gazetteer::{Gazetteer, GazetteerEntry};
pub use normalize::{normalize_relation, text_cosine, Rejection, RelationNormalizer, DEFAULT_THRESHOLD};
pub use relations::{extract_relations, VerbLexicon, MAX_PHRASE_TOKENS};

pub const EXTRACTION_VERSION: &str = "gazetteer-pattern-1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtractionError {
    #[error("gazetteer line {line}: {message}")]
    Gazetteer { line: usize, message: String },
    #[error("verb lexicon: {0}")]
    Lexicon(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Mention {
    pub canonical: String,
    pub entity_type: EntityType,
    pub start: usize,
    pub end: usize,
    pub pmid: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RawTriple {
    pub subject: Mention,
    pub phrase: String,
    pub object: Mention,
    pub pmid: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalizedTriple {
    pub raw: RawTriple,
    pub relation_type: RelationType,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectedTriple {
    pub raw: RawTriple,
    pub rejection: Rejection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ExtractionOutcome {
    pub triples: Vec<NormalizedTriple>,
    pub rejected: Vec<RejectedTriple>,
    /// Every mention, including ones that took part in no triple.
    pub mentions: Vec<Mention>,
}

pub struct Extractor {
    gazetteer: Gazetteer,
    lexicon: VerbLexicon,
    normalizer: RelationNormalizer,
}

impl Extractor {
    pub fn new(gazetteer: Gazetteer, lexicon: VerbLexicon, normalizer: RelationNormalizer) -> Self {
        Self {
            gazetteer,
            lexicon,
            normalizer,
        }
    }

    /// Bundled gazetteer and lexicon with the hashing embedder.
    pub fn bundled(vocabulary: Vocabulary, threshold: f64) -> Self {
        let provider: Arc<dyn TextEmbeddingProvider> = Arc::new(TrigramHashEmbedder::default());
        Self::new(
            Gazetteer::bundled(),
            VerbLexicon::default(),
            RelationNormalizer::new(vocabulary, provider, threshold),
        )
    }

    pub fn gazetteer(&self) -> &Gazetteer {
        &self.gazetteer
    }

    pub fn normalizer(&self) -> &RelationNormalizer {
        &self.normalizer
    }

    /// Identifies everything that changes extraction output; part of the graph cache key.
    pub fn version(&self) -> String {
        format!(
            "{EXTRACTION_VERSION}+{}@{}",
            self.normalizer.provider_id(),
            self.normalizer.threshold()
        )
    }

    pub fn extract_document(&self, doc: &Document) -> ExtractionOutcome {
        let mentions = self.gazetteer.extract_entities(&doc.text, &doc.pmid);
        let mut out = ExtractionOutcome::default();
        for raw in extract_relations(&doc.text, &mentions, &self.lexicon) {
            match self.normalizer.normalize(&raw.phrase) {
                Ok((relation_type, similarity)) => out.triples.push(NormalizedTriple {
                    raw,
                    relation_type,
                    similarity,
                }),
                Err(rejection) => {
                    tracing::debug!(pmid = %raw.pmid, phrase = %raw.phrase, ?rejection, "relation rejected");
                    out.rejected.push(RejectedTriple { raw, rejection })
                }
            }
        }
        out.mentions = mentions;
        out
    }

    /// Extracts every document in parallel; output is ordered by (pmid, span start).
    pub fn extract_all(&self, docs: &[Document]) -> ExtractionOutcome {
        let parts: Vec<ExtractionOutcome> = docs.par_iter().map(|d| self.extract_document(d)).collect();
        let mut out = ExtractionOutcome::default();
        for p in parts {
            out.triples.extend(p.triples);
            out.rejected.extend(p.rejected);
            out.mentions.extend(p.mentions);
        }
        let key = |r: &RawTriple| (r.pmid.clone(), r.subject.start.min(r.object.start), r.phrase.clone());
        out.triples.sort_by_key(|t| key(&t.raw));
        out.rejected.sort_by_key(|t| key(&t.raw));
        out.mentions.sort_by(|a, b| (&a.pmid, a.start).cmp(&(&b.pmid, b.start)));
        out
    }
}
