//! Node2vec-style structural embeddings.
//!
//! Second-order biased random walks feed a skip-gram model trained with
//! negative sampling. Only structure is encoded; relation types are ignored.
//! A relation-aware model would plug in by producing an [`EmbeddingTable`]
//! from the same graph view.

mod skipgram;
mod table;
mod walks;

use thiserror::Error;

use crate::kg::{EntityType, KnowledgeGraph};

pub use skipgram::{train_embeddings, TrainConfig, TrainOutcome};
pub use table::{cosine, fingerprint, EmbeddingTable};
pub use walks::{generate_walks, next_step, WalkConfig, WalkCorpus, WalkGraph};
pub(crate) use walks::fnv1a;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbeddingError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("walk corpus is empty")]
    EmptyCorpus,
    #[error("training diverged (non-finite values)")]
    NonFinite,
    #[error("node '{0}' has no embedding")]
    UnknownNode(String),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("cosine of a zero vector is undefined")]
    ZeroVector,
    #[error("embedding table format: {0}")]
    Format(String),
}

/// Walks and trains over `graph`, stamping the table with its fingerprint.
pub fn embed_graph(
    graph: &KnowledgeGraph,
    snapshot_hash: &str,
    walk: &WalkConfig,
    train: &TrainConfig,
) -> Result<TrainOutcome, EmbeddingError> {
    let view = WalkGraph::from_knowledge_graph(graph);
    let corpus = generate_walks(&view, walk)?;
    let mut outcome = train_embeddings(&corpus, train)?;
    outcome.table = outcome
        .table
        .with_fingerprint(fingerprint(walk, train, snapshot_hash));
    Ok(outcome)
}

/// [`EmbeddingTable::top_k_similar`] restricted to entities of one type.
pub fn top_k_similar(
    table: &EmbeddingTable,
    graph: &KnowledgeGraph,
    node_id: &str,
    k: usize,
    type_filter: Option<&EntityType>,
) -> Result<Vec<(String, f64)>, EmbeddingError> {
    table.top_k_similar(node_id, k, |candidate| match type_filter {
        None => true,
        Some(t) => graph
            .entity(&candidate.into())
            .is_some_and(|e| &e.entity_type == t),
    })
}
