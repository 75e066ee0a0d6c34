//! Hypothesis generation and validation over a pluggable language-model provider.

mod context;
mod generation;
mod llm;
mod mock;
pub mod prompts;
mod validation;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use context::{build_discovery_context, ContextParams, DiscoveryContext, LatentNeighbor, Snippet};
pub use generation::{generate_hypotheses, generate_unassisted, parse_generation, ProposedPair};
pub use llm::{ChatCompletionsProvider, LlmError, LlmParams, LlmProvider, ProviderRegistry, ScriptedProvider};
pub use mock::MockProvider;
pub use validation::{
    exact_probe, context_probe, parse_assessment, validate_all, validate_hypothesis, Assessment, ValidationParams,
};

/// Reprompts allowed after the first malformed provider answer.
pub const MAX_REPAIRS: usize = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("biomarker '{name}' is not in the graph (nearest: {})", nearest.join(", "))]
    UnknownBiomarker { name: String, nearest: Vec<String> },
    #[error("hypothesis generation failed: {message}")]
    Generation { message: String, raw_responses: Vec<String> },
    #[error(transparent)]
    Provider(#[from] LlmError),
    #[error("prompt rendering failed: {0}")]
    Prompt(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RationaleType {
    DirectGraphEvidence,
    InferredSimilarity,
}

impl fmt::Display for RationaleType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RationaleType::DirectGraphEvidence => "Direct Graph Evidence",
            RationaleType::InferredSimilarity => "Inferred Similarity",
        })
    }
}

/// An unordered drug pair with its proposed mechanism. The pair is stored in
/// lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub drug_a: String,
    pub drug_b: String,
    pub mechanism: String,
    pub rationale_type: RationaleType,
    pub supporting_pmids: Vec<String>,
    pub supporting_node_ids: Vec<String>,
}

impl Hypothesis {
    pub fn new(
        drug_a: &str,
        drug_b: &str,
        mechanism: &str,
        rationale_type: RationaleType,
    ) -> Result<Self, AgentError> {
        let (a, b) = canonical_pair(drug_a, drug_b)?;
        Ok(Self {
            drug_a: a,
            drug_b: b,
            mechanism: mechanism.trim().to_string(),
            rationale_type,
            supporting_pmids: Vec::new(),
            supporting_node_ids: Vec::new(),
        })
    }

    pub fn pair(&self) -> (&str, &str) {
        (&self.drug_a, &self.drug_b)
    }

    /// Case-insensitive identity of the pair.
    pub fn pair_key(&self) -> (String, String) {
        (self.drug_a.to_lowercase(), self.drug_b.to_lowercase())
    }
}

/// Trims both names and orders them; identical or empty names are rejected.
pub fn canonical_pair(a: &str, b: &str) -> Result<(String, String), AgentError> {
    let (a, b) = (a.trim(), b.trim());
    if a.is_empty() || b.is_empty() {
        return Err(AgentError::InvalidArgument("drug names must be non-empty".into()));
    }
    if a.eq_ignore_ascii_case(b) {
        return Err(AgentError::InvalidArgument(format!("drug pair repeats '{a}'")));
    }
    Ok(if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Verdict {
    Proceed,
    Caution,
    Reject,
}

impl Verdict {
    /// Accepts the three verdicts in any case; "Proceed (with Caution)" reads as Caution.
    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim().to_lowercase();
        if s.contains("caution") {
            return Some(Verdict::Caution);
        }
        match s.as_str() {
            "proceed" => Some(Verdict::Proceed),
            "reject" => Some(Verdict::Reject),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Proceed => "Proceed",
            Verdict::Caution => "Caution",
            Verdict::Reject => "Reject",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceStatus {
    Validated,
    Inferred,
    PartiallySupported,
}

impl fmt::Display for EvidenceStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvidenceStatus::Validated => "Validated (Literature Exists)",
            EvidenceStatus::Inferred => "Inferred (Novel Combination)",
            EvidenceStatus::PartiallySupported => "Partially Supported (Preclinical Only)",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceLevel {
    Clinical,
    Preclinical,
    None,
}

/// Outcome of validating one hypothesis.
///
/// Novelty flags are `None` when the literature probes could not be run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationResult {
    pub verdict: Verdict,
    pub safety_score: u8,
    pub toxicity_risk: String,
    pub novelty_exact: Option<bool>,
    pub novelty_in_context: Option<bool>,
    pub evidence_status: EvidenceStatus,
    pub evidence_level: EvidenceLevel,
    /// Union of both probes' hits, sorted.
    pub literature_hits: Vec<String>,
    pub exact_hits: Vec<String>,
    pub context_hits: Vec<String>,
    pub rationale: String,
    /// Why the verdict was forced, if it was.
    pub failure: Option<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_is_canonical() {
        let ab = Hypothesis::new("Palbociclib", "Afatinib", "m", RationaleType::DirectGraphEvidence).unwrap();
        let ba = Hypothesis::new(" Afatinib ", "Palbociclib", "m", RationaleType::DirectGraphEvidence).unwrap();
        assert_eq!(ab, ba);
        assert_eq!(ab.pair(), ("Afatinib", "Palbociclib"));
        assert!(Hypothesis::new("X", "x", "m", RationaleType::InferredSimilarity).is_err());
    }

    #[test]
    fn verdict_parsing() {
        assert_eq!(Verdict::parse("Proceed (with Caution)"), Some(Verdict::Caution));
        assert_eq!(Verdict::parse(" proceed"), Some(Verdict::Proceed));
        assert_eq!(Verdict::parse("REJECT"), Some(Verdict::Reject));
        assert_eq!(Verdict::parse("maybe"), None);
        assert!(Verdict::Proceed < Verdict::Caution && Verdict::Caution < Verdict::Reject);
    }
}
