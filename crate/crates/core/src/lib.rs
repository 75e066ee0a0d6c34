//! Evidence-grounded drug-combination hypothesis engine.
//!
//! The pipeline builds a task-specific knowledge graph for a (biomarker,
//! cancer type) pair from curated sources and literature abstracts, learns
//! structural node embeddings, asks a language-model provider for drug-pair
//! hypotheses over a hybrid graph + embedding context, validates them against
//! targeted literature probes, and ranks them by a composite of graph evidence
//! and safety. The [`evaluation`] module scores runs with ranking and novelty
//! metrics and replays stored run logs.

pub mod agents;
pub mod embedding;
pub mod evaluation;
pub mod extraction;
pub mod ingestion;
pub mod kg;
pub mod pipeline;
pub mod ranking;
