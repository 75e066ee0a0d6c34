use std::collections::BTreeMap;
use std::fmt::Write as _;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{EvidenceLevel, EvidenceStatus, RationaleType, Verdict};
use crate::evaluation::HypothesisOutcome;
use crate::ingestion::{DegradedSource, RunConfig};
use crate::kg::KnowledgeGraph;
use crate::ranking::ScoreBreakdown;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("report is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("report schema version {found} is not supported (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynergySummary {
    pub max_synergy: f64,
    pub min_synergy: f64,
    pub n_observations: usize,
}

/// Per-hypothesis validation detail kept alongside the headline fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationRecord {
    pub novelty_exact: Option<bool>,
    pub novelty_in_context: Option<bool>,
    pub evidence_level: EvidenceLevel,
    pub literature_hits: Vec<String>,
    pub exact_hits: Vec<String>,
    pub context_hits: Vec<String>,
    /// Pmids cited by the graph edges of either drug.
    pub graph_pmids: Vec<String>,
    pub rationale: String,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportRecord {
    pub rank: usize,
    pub drug_a: String,
    pub drug_b: String,
    pub composite_score: f64,
    pub verdict: Verdict,
    pub rationale_type: RationaleType,
    pub mechanism: String,
    /// Graph pmids and literature hits, sorted and unique.
    pub supporting_pmids: Vec<String>,
    pub evidence_status: EvidenceStatus,
    pub safety_score: u8,
    pub toxicity_risk: String,
    pub synergy: Option<SynergySummary>,
    pub score_breakdown: ScoreBreakdown,
    pub supporting_node_ids: Vec<String>,
    pub validation: ValidationRecord,
}

impl ReportRecord {
    pub fn outcome(&self) -> HypothesisOutcome {
        HypothesisOutcome {
            drug_a: self.drug_a.clone(),
            drug_b: self.drug_b.clone(),
            verdict: self.verdict,
            novelty_exact: self.validation.novelty_exact,
            novelty_in_context: self.validation.novelty_in_context,
            supporting_pmids: self.supporting_pmids.clone(),
        }
    }
}

/// The time-stamped result of one run. Serialized with a fixed key order;
/// [`RunReport::to_canonical_json`] is byte-stable for identical runs apart
/// from `run_id` and `created_at`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    pub schema_version: u32,
    pub run_id: String,
    pub created_at: DateTime<Utc>,
    pub config: RunConfig,
    pub prompt_version: String,
    pub extraction_version: String,
    pub embedding_fingerprint: Option<String>,
    pub no_embeddings: bool,
    pub hypotheses: Vec<ReportRecord>,
    pub degraded_sources: Vec<DegradedSource>,
    pub literature_error: Option<String>,
    pub warnings: Vec<String>,
}

impl RunReport {
    pub fn to_canonical_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("report serializes");
        out.push(b'\n');
        out
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, ReportError> {
        #[derive(Deserialize)]
        struct Probe {
            schema_version: u32,
        }
        let probe: Probe = serde_json::from_slice(bytes)?;
        if probe.schema_version != REPORT_SCHEMA_VERSION {
            return Err(ReportError::SchemaVersion {
                found: probe.schema_version,
                expected: REPORT_SCHEMA_VERSION,
            });
        }
        Ok(serde_json::from_slice(bytes)?)
    }

    /// Copy with the run id and timestamp blanked, for comparing runs.
    pub fn stripped(&self) -> Self {
        Self {
            run_id: String::new(),
            created_at: DateTime::<Utc>::UNIX_EPOCH,
            ..self.clone()
        }
    }

    pub fn outcomes(&self) -> Vec<HypothesisOutcome> {
        self.hypotheses.iter().map(ReportRecord::outcome).collect()
    }

    /// Plain-text listing with one block per hypothesis.
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} / {} ({} hypotheses, run {})",
            self.config.biomarker,
            self.config.cancer_type,
            self.hypotheses.len(),
            self.run_id
        );
        for r in &self.hypotheses {
            let _ = writeln!(s, "\nH{} - {} + {}", r.rank, r.drug_a, r.drug_b);
            let _ = writeln!(s, "Score: {:.2}  Verdict: {}", r.composite_score, r.verdict);
            let _ = writeln!(s, "Rationale Type: {}", r.rationale_type);
            let _ = writeln!(s, "Mechanism: {}", r.mechanism);
            let evidence = if r.supporting_pmids.is_empty() {
                "No direct clinical study found (novel combination)".to_string()
            } else {
                format!("PMIDs {}", r.supporting_pmids.join(", "))
            };
            let _ = writeln!(s, "Supporting Evidence: {evidence}");
            let _ = writeln!(s, "Evidence Status: {}", r.evidence_status);
            let _ = writeln!(s, "Safety Score: {}", r.safety_score);
            let _ = writeln!(s, "Toxicity Risk: {}", r.toxicity_risk);
            match &r.synergy {
                Some(x) => {
                    let _ = writeln!(s, "Synergy: max {} / min {}", x.max_synergy, x.min_synergy);
                }
                None => {
                    let _ = writeln!(s, "Synergy: no synergy data");
                }
            }
        }
        if !self.degraded_sources.is_empty() {
            let ids: Vec<&str> = self.degraded_sources.iter().map(|d| d.source_id.as_str()).collect();
            let _ = writeln!(s, "\nDegraded sources: {}", ids.join(", "));
        }
        s
    }
}

/// Entity and relation counts of a run's graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSummary {
    pub entities: usize,
    pub relations: usize,
    pub documents: usize,
    pub entity_counts: BTreeMap<String, usize>,
    pub relation_counts: BTreeMap<String, usize>,
    pub cache_hit: bool,
    pub cache_key: String,
    pub snapshot_hash: String,
    pub embedding_cache_hit: Option<bool>,
}

impl GraphSummary {
    pub fn of(graph: &KnowledgeGraph, cache_hit: bool, cache_key: String, snapshot_hash: String) -> Self {
        let mut entity_counts = BTreeMap::new();
        for e in graph.entities() {
            *entity_counts.entry(e.entity_type.as_str().to_string()).or_insert(0) += 1;
        }
        let mut relation_counts = BTreeMap::new();
        for r in graph.relations() {
            *relation_counts.entry(r.relation_type.as_str().to_string()).or_insert(0) += 1;
        }
        Self {
            entities: graph.entity_count(),
            relations: graph.relation_count(),
            documents: graph.documents().count(),
            entity_counts,
            relation_counts,
            cache_hit,
            cache_key,
            snapshot_hash,
            embedding_cache_hit: None,
        }
    }
}
