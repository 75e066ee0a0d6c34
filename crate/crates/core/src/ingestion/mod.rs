//! Curated-source adapters, literature retrieval and graph assembly for one run.

mod adapters;
mod build;
mod eutils;
mod literature;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adapters::{
    AdapterError, AdapterRegistry, CuratedTriple, FixtureAdapter, SourceAdapter, UnavailableAdapter, ROSTER,
};
pub use build::{build_graph, BuildOutcome, DegradedSource, RejectionRecord};
pub use eutils::{EutilsClient, EutilsConfig, TokenBucket};
pub use literature::{
    fetch_literature, literature_query, quote_term, Abstract, FixtureLiterature, LiteratureClient, LiteratureError,
    LiteratureRecord,
};

pub const DEFAULT_ABSTRACTS: usize = 50;
pub const DEFAULT_HYPOTHESES: usize = 4;

/// Which channels of the pipeline a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    #[default]
    Full,
    /// Explicit graph evidence only, no latent neighbours.
    NoEmbeddings,
    /// No graph and no embeddings; the provider sees only the scenario text.
    LlmOnly,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Full, Variant::NoEmbeddings, Variant::LlmOnly];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoEmbeddings => "no_embeddings",
            Variant::LlmOnly => "llm_only",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.as_str() == s.trim())
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

fn default_abstracts() -> usize {
    DEFAULT_ABSTRACTS
}
fn default_hypotheses() -> usize {
    DEFAULT_HYPOTHESES
}
fn default_provider() -> String {
    "mock".into()
}
fn default_seed() -> u64 {
    42
}
fn default_sources() -> Vec<String> {
    AdapterRegistry::DEFAULT_SOURCES.iter().map(|s| s.to_string()).collect()
}
fn default_max_tokens() -> u32 {
    1024
}
fn default_temperature() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub biomarker: String,
    pub cancer_type: String,
    #[serde(default = "default_abstracts")]
    pub n_abstracts: usize,
    #[serde(default = "default_hypotheses")]
    pub n_hypotheses: usize,
    #[serde(default = "default_provider")]
    pub provider_id: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_sources")]
    pub source_set: Vec<String>,
    #[serde(default)]
    pub variant: Variant,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
}

impl RunConfig {
    pub fn new(biomarker: &str, cancer_type: &str) -> Self {
        Self {
            biomarker: biomarker.to_string(),
            cancer_type: cancer_type.to_string(),
            n_abstracts: DEFAULT_ABSTRACTS,
            n_hypotheses: DEFAULT_HYPOTHESES,
            provider_id: default_provider(),
            seed: default_seed(),
            source_set: default_sources(),
            variant: Variant::Full,
            max_tokens: default_max_tokens(),
            temperature: default_temperature(),
        }
    }

    /// Checks every field, collecting all problems rather than stopping at the first.
    pub fn validate(&self, providers: &[String], sources: &[String]) -> Result<(), Vec<FieldError>> {
        let mut errs = Vec::new();
        let mut push = |field: &str, message: String| errs.push(FieldError {
            field: field.to_string(),
            message,
        });
        if self.biomarker.trim().is_empty() {
            push("biomarker", "must not be empty".into());
        }
        if self.cancer_type.trim().is_empty() {
            push("cancer_type", "must not be empty".into());
        }
        if self.n_hypotheses < 1 {
            push("n_hypotheses", "must be at least 1".into());
        }
        if !providers.iter().any(|p| p == &self.provider_id) {
            push(
                "provider_id",
                format!("unknown provider '{}' (known: {})", self.provider_id, providers.join(", ")),
            );
        }
        for s in &self.source_set {
            if !sources.iter().any(|k| k == s) {
                push("source_set", format!("unknown source '{s}'"));
            }
        }
        if self.max_tokens == 0 {
            push("max_tokens", "must be positive".into());
        }
        if !(self.temperature.is_finite() && (0.0..=2.0).contains(&self.temperature)) {
            push("temperature", "must lie in [0, 2]".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for FieldError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("empty evidence base: {0}")]
    EmptyEvidence(String),
    #[error("graph assembly failed: {0}")]
    Graph(String),
}
