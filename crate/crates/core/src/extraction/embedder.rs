use thiserror::Error;

use crate::embedding::fnv1a;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbedError {
    #[error("text '{0}' has no features to embed")]
    Degenerate(String),
    #[error("embedding provider failed: {0}")]
    Provider(String),
}

/// Maps text to a unit-norm vector of fixed dimension.
pub trait TextEmbeddingProvider: Send + Sync {
    fn id(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Vec<f32>, EmbedError>;
}

/// Signed feature hashing of padded character trigrams, L2-normalized.
#[derive(Debug, Clone)]
pub struct TrigramHashEmbedder {
    id: String,
    dim: usize,
}

impl TrigramHashEmbedder {
    pub const DEFAULT_DIM: usize = 256;

    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self {
            id: format!("trigram-hash-{dim}"),
            dim,
        }
    }
}

impl Default for TrigramHashEmbedder {
    fn default() -> Self {
        Self::new(Self::DEFAULT_DIM)
    }
}

/// Lowercased words, with `_` treated as a space.
pub fn humanize(text: &str) -> String {
    text.replace('_', " ")
        .split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

impl TextEmbeddingProvider for TrigramHashEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f32>, EmbedError> {
        let mut v = vec![0.0f32; self.dim];
        for word in humanize(text).split(' ').filter(|w| !w.is_empty()) {
            let padded: Vec<char> = std::iter::once('#')
                .chain(word.chars())
                .chain(std::iter::once('#'))
                .collect();
            for gram in padded.windows(3) {
                let s: String = gram.iter().collect();
                let h = fnv1a(&[s.as_bytes()]);
                let idx = (h % self.dim as u64) as usize;
                v[idx] += if h >> 63 == 1 { -1.0 } else { 1.0 };
            }
        }
        let norm = v.iter().map(|x| f64::from(*x) * f64::from(*x)).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(EmbedError::Degenerate(text.to_string()));
        }
        v.iter_mut().for_each(|x| *x = (f64::from(*x) / norm) as f32);
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_text_is_degenerate() {
        assert!(TrigramHashEmbedder::default().embed("   ").is_err());
    }

    #[test]
    fn underscores_read_as_spaces() {
        let e = TrigramHashEmbedder::default();
        assert_eq!(e.embed("member_of_pathway").unwrap(), e.embed("member of pathway").unwrap());
    }

    proptest! {
        #[test]
        fn output_is_unit_norm_and_deterministic(s in "[a-zA-Z ]{1,40}") {
            let e = TrigramHashEmbedder::default();
            if let Ok(v) = e.embed(&s) {
                prop_assert_eq!(v.len(), 256);
                let n: f64 = v.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt();
                prop_assert!((n - 1.0).abs() < 1e-6);
                prop_assert_eq!(v, e.embed(&s).unwrap());
            }
        }
    }
}
