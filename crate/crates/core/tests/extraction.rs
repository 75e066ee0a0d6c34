use std::sync::Arc;

use codhy_core::extraction::{RelationNormalizer, TextEmbeddingProvider, TrigramHashEmbedder, DEFAULT_THRESHOLD};
use codhy_core::kg::Vocabulary;

fn phrases() -> Vec<String> {
    let text = include_str!("data/relation_phrases.txt");
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect()
}

/// Scans every label and keeps the first strict maximum of the cosine.
fn oracle(phrase: &str, labels: &[String], e: &dyn TextEmbeddingProvider) -> (String, f64) {
    let cos = |a: &[f32], b: &[f32]| {
        let mut ab = 0.0;
        let mut aa = 0.0;
        let mut bb = 0.0;
        for i in 0..a.len() {
            ab += f64::from(a[i]) * f64::from(b[i]);
            aa += f64::from(a[i]) * f64::from(a[i]);
            bb += f64::from(b[i]) * f64::from(b[i]);
        }
        ab / (aa.sqrt() * bb.sqrt())
    };
    let p = e.embed(phrase).unwrap();
    let mut best = (String::new(), f64::NEG_INFINITY);
    for l in labels {
        let s = cos(&p, &e.embed(l).unwrap());
        if s > best.1 {
            best = (l.clone(), s);
        }
    }
    best
}

#[test]
fn normalizer_agrees_with_exhaustive_scan() {
    let list = phrases();
    assert_eq!(list.len(), 50);
    let vocab = Vocabulary::default();
    let e = TrigramHashEmbedder::default();
    let open = RelationNormalizer::new(vocab.clone(), Arc::new(e.clone()), 0.0);
    let strict = RelationNormalizer::new(vocab.clone(), Arc::new(e.clone()), DEFAULT_THRESHOLD);
    for phrase in &list {
        let (label, sim) = oracle(phrase, vocab.labels(), &e);
        let (got, got_sim) = open.normalize(phrase).unwrap();
        assert_eq!(got.as_str(), label, "{phrase}");
        assert!((got_sim - sim).abs() < 1e-9, "{phrase}: {got_sim} vs {sim}");
        assert_eq!(strict.normalize(phrase).is_ok(), sim >= DEFAULT_THRESHOLD, "{phrase}");
    }
}

#[test]
fn vocabulary_labels_map_to_themselves() {
    let vocab = Vocabulary::default();
    let n = RelationNormalizer::new(vocab.clone(), Arc::new(TrigramHashEmbedder::default()), DEFAULT_THRESHOLD);
    for label in vocab.labels() {
        let (got, sim) = n.normalize(label).unwrap();
        assert_eq!((got.as_str(), sim), (label.as_str(), 1.0));
    }
}
