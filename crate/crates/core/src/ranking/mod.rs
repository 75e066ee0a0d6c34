//! Graph-evidence scoring, composite score and hypothesis ordering.

mod synergy;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{DiscoveryContext, Hypothesis, ValidationResult};
use crate::embedding::{cosine, EmbeddingTable};

pub use synergy::{SynergyRecord, SynergyTable, SYNERGY_ENV};

/// Edge counts at or above this saturate the edge-support component.
pub const E_CAP: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RankingError {
    #[error("invalid score weights: {0}")]
    Weights(String),
    #[error("synergy table line {line}: {message}")]
    Synergy { line: usize, message: String },
    #[error("synergy table unreadable: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreWeights {
    pub w_e: f64,
    pub w_s: f64,
    pub w_c: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        Self {
            w_e: 1.0 / 3.0,
            w_s: 1.0 / 3.0,
            w_c: 1.0 / 3.0,
        }
    }
}

impl ScoreWeights {
    pub fn new(w_e: f64, w_s: f64, w_c: f64) -> Result<Self, RankingError> {
        let w = Self { w_e, w_s, w_c };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), RankingError> {
        let ws = [self.w_e, self.w_s, self.w_c];
        if ws.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(RankingError::Weights(format!("{ws:?} must be finite and non-negative")));
        }
        if (ws.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(RankingError::Weights(format!("{ws:?} must sum to 1")));
        }
        Ok(())
    }
}

/// How G_raw is scaled into G_norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Divide by the largest G_raw in the run.
    #[default]
    RunLocal,
    /// Use G_raw as is; it already lies in [0, 1].
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub edge_support: usize,
    pub similarity_strength: f64,
    pub evidence_indicator: u8,
    pub weights: ScoreWeights,
    pub g_raw: f64,
    pub g_norm: f64,
    pub safety: u8,
    pub composite: f64,
}

/// `w_e·min(e, E_CAP)/E_CAP + w_s·s + w_c·c`.
pub fn g_raw(e: usize, s: f64, c: u8, w: &ScoreWeights) -> f64 {
    w.w_e * (e.min(E_CAP) as f64 / E_CAP as f64) + w.w_s * s + w.w_c * f64::from(c)
}

/// `10·(0.5·G_norm + 0.5·S/10)`, computed as `5·G_norm + S/2`.
pub fn composite(g_norm: f64, safety: u8) -> f64 {
    5.0 * g_norm + 0.5 * f64::from(safety)
}

fn clipped_cosine(table: &EmbeddingTable, a: &str, focus: &str) -> f64 {
    match (table.get(a), table.get(focus)) {
        (Some(u), Some(v)) => cosine(u, v).map_or(0.0, |c| c.max(0.0)),
        _ => 0.0,
    }
}

/// Edge support, similarity strength and evidence indicator for one
/// validated hypothesis. G_norm and the composite are filled in by
/// [`normalize_and_compose`].
pub fn graph_evidence_score(
    h: &Hypothesis,
    ctx: Option<&DiscoveryContext>,
    embeddings: Option<&EmbeddingTable>,
    validation: &ValidationResult,
    weights: &ScoreWeights,
) -> ScoreBreakdown {
    let mut e = 0;
    let mut s = 0.0;
    if let Some(ctx) = ctx {
        let ids: Vec<_> = [&h.drug_a, &h.drug_b].into_iter().filter_map(|d| ctx.drug_id(d)).collect();
        e = ctx
            .subgraph
            .relations
            .values()
            .filter(|r| ids.iter().any(|id| r.touches(id)))
            .count();
        if let Some(table) = embeddings {
            let focus = ctx.focus.as_str();
            let sim = |name: &str| {
                ctx.drug_id(name)
                    .map_or(0.0, |id| clipped_cosine(table, id.as_str(), focus))
            };
            s = (sim(&h.drug_a) + sim(&h.drug_b)) / 2.0;
        }
    }
    let c = u8::from(!h.supporting_pmids.is_empty() || !validation.literature_hits.is_empty());
    ScoreBreakdown {
        edge_support: e,
        similarity_strength: s,
        evidence_indicator: c,
        weights: *weights,
        g_raw: g_raw(e, s, c, weights),
        g_norm: 0.0,
        safety: validation.safety_score,
        composite: 0.0,
    }
}

/// Fills G_norm and the composite for every breakdown of one run.
pub fn normalize_and_compose(breakdowns: &mut [ScoreBreakdown], normalization: Normalization) {
    let max = breakdowns.iter().map(|b| b.g_raw).fold(0.0_f64, f64::max);
    for b in breakdowns.iter_mut() {
        b.g_norm = match normalization {
            Normalization::RunLocal if max > 0.0 => (b.g_raw / max).clamp(0.0, 1.0),
            Normalization::RunLocal => 0.0,
            Normalization::Fixed => b.g_raw.clamp(0.0, 1.0),
        };
        b.composite = composite(b.g_norm, b.safety);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredHypothesis {
    pub hypothesis: Hypothesis,
    pub validation: ValidationResult,
    pub breakdown: ScoreBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedHypothesis {
    pub rank: usize,
    #[serde(flatten)]
    pub scored: ScoredHypothesis,
}

fn rank_order(x: &ScoredHypothesis, y: &ScoredHypothesis) -> Ordering {
    y.breakdown
        .composite
        .total_cmp(&x.breakdown.composite)
        .then_with(|| x.validation.verdict.cmp(&y.validation.verdict))
        .then_with(|| y.breakdown.g_raw.total_cmp(&x.breakdown.g_raw))
        .then_with(|| x.hypothesis.pair().cmp(&y.hypothesis.pair()))
}

/// Orders by composite, then verdict, then G_raw, then pair, and numbers 1..n.
pub fn rank(mut items: Vec<ScoredHypothesis>) -> Vec<RankedHypothesis> {
    items.sort_by(rank_order);
    items
        .into_iter()
        .enumerate()
        .map(|(i, scored)| RankedHypothesis { rank: i + 1, scored })
        .collect()
}
