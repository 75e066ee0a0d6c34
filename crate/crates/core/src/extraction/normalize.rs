use std::sync::Arc;

use serde::Serialize;

use super::embedder::{humanize, EmbedError, TextEmbeddingProvider};
use crate::kg::{RelationType, Vocabulary};

pub const DEFAULT_THRESHOLD: f64 = 0.35;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Rejection {
    BelowThreshold { best_label: String, similarity: f64 },
    Provider { message: String },
}

impl From<EmbedError> for Rejection {
    fn from(e: EmbedError) -> Self {
        Rejection::Provider { message: e.to_string() }
    }
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, y)| f64::from(*x) * f64::from(*y)).sum()
}

fn norm(a: &[f32]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine of two vectors of equal length; 0 when either is zero.
pub fn text_cosine(a: &[f32], b: &[f32]) -> f64 {
    let d = norm(a) * norm(b);
    if d == 0.0 {
        0.0
    } else {
        (dot(a, b) / d).clamp(-1.0, 1.0)
    }
}

/// Maps free-text relation phrases onto vocabulary labels.
///
/// Label vectors are computed once. A label whose embedding fails is never chosen.
pub struct RelationNormalizer {
    vocabulary: Vocabulary,
    provider: Arc<dyn TextEmbeddingProvider>,
    label_vectors: Vec<Option<Vec<f32>>>,
    threshold: f64,
}

impl RelationNormalizer {
    pub fn new(vocabulary: Vocabulary, provider: Arc<dyn TextEmbeddingProvider>, threshold: f64) -> Self {
        let label_vectors = vocabulary.labels().iter().map(|l| provider.embed(l).ok()).collect();
        Self {
            vocabulary,
            provider,
            label_vectors,
            threshold,
        }
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn provider_id(&self) -> &str {
        self.provider.id()
    }

    pub fn normalize(&self, phrase: &str) -> Result<(RelationType, f64), Rejection> {
        let human = humanize(phrase);
        let labels = self.vocabulary.labels();
        if let Some(label) = labels.iter().find(|l| humanize(l) == human) {
            return Ok((self.relation_type(label), 1.0));
        }
        let v = self.provider.embed(phrase)?;
        let mut best: Option<(usize, f64)> = None;
        for (idx, lv) in self.label_vectors.iter().enumerate() {
            let Some(lv) = lv else { continue };
            let sim = text_cosine(&v, lv);
            if best.is_none_or(|(_, b)| sim > b) {
                best = Some((idx, sim));
            }
        }
        let Some((idx, sim)) = best else {
            return Err(Rejection::Provider {
                message: "no vocabulary label could be embedded".into(),
            });
        };
        if sim < self.threshold {
            return Err(Rejection::BelowThreshold {
                best_label: labels[idx].clone(),
                similarity: sim,
            });
        }
        Ok((self.relation_type(&labels[idx]), sim))
    }

    fn relation_type(&self, label: &str) -> RelationType {
        self.vocabulary
            .relation_type(label)
            .expect("label comes from the vocabulary")
    }
}

/// One-shot form of [`RelationNormalizer::normalize`].
pub fn normalize_relation(
    phrase: &str,
    vocabulary: &Vocabulary,
    provider: Arc<dyn TextEmbeddingProvider>,
    threshold: f64,
) -> Result<(RelationType, f64), Rejection> {
    RelationNormalizer::new(vocabulary.clone(), provider, threshold).normalize(phrase)
}
