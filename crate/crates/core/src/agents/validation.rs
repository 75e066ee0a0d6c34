use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::warn;

use super::generation::{complete_parsed, strip_fence};
use super::llm::{LlmParams, LlmProvider};
use super::prompts::{self, bullet_list};
use super::{EvidenceLevel, EvidenceStatus, Hypothesis, ValidationResult, Verdict};
use crate::ingestion::{quote_term, LiteratureClient, LiteratureError};
use crate::kg::{EntityType, KnowledgeGraph};

const EXCERPT_CHARS: usize = 600;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationParams {
    /// Maximum ids requested per literature probe.
    pub probe_limit: usize,
    pub llm: LlmParams,
}

impl Default for ValidationParams {
    fn default() -> Self {
        Self {
            probe_limit: 20,
            llm: LlmParams::default(),
        }
    }
}

/// `"{a}" AND "{b}"`.
pub fn exact_probe(drug_a: &str, drug_b: &str) -> String {
    format!("{} AND {}", quote_term(drug_a), quote_term(drug_b))
}

/// The exact probe restricted to the cancer type.
pub fn context_probe(drug_a: &str, drug_b: &str, cancer_type: &str) -> String {
    format!("{} AND {}", exact_probe(drug_a, drug_b), quote_term(cancer_type))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAssessment {
    verdict: String,
    safety_score: i64,
    toxicity_risk: String,
    evidence_level: String,
    rationale: String,
}

/// The provider's judgement of one hypothesis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assessment {
    pub verdict: Verdict,
    pub safety_score: u8,
    pub toxicity_risk: String,
    pub evidence_level: EvidenceLevel,
    pub rationale: String,
}

/// Strict parse of a validation answer: one JSON object with exactly the five keys.
pub fn parse_assessment(text: &str) -> Result<Assessment, String> {
    let body = strip_fence(text)?;
    let raw: RawAssessment = serde_json::from_str(body).map_err(|e| format!("not a valid assessment object: {e}"))?;
    let verdict = Verdict::parse(&raw.verdict)
        .ok_or_else(|| format!("verdict '{}' is not Proceed, Caution or Reject", raw.verdict))?;
    let safety_score = u8::try_from(raw.safety_score)
        .ok()
        .filter(|s| *s <= 10)
        .ok_or_else(|| format!("safety_score {} outside 0-10", raw.safety_score))?;
    let evidence_level = match raw.evidence_level.trim().to_lowercase().as_str() {
        "clinical" => EvidenceLevel::Clinical,
        "preclinical" => EvidenceLevel::Preclinical,
        "none" => EvidenceLevel::None,
        other => return Err(format!("evidence_level '{other}' is not clinical, preclinical or none")),
    };
    if raw.toxicity_risk.trim().is_empty() {
        return Err("toxicity_risk is empty".into());
    }
    Ok(Assessment {
        verdict,
        safety_score,
        toxicity_risk: raw.toxicity_risk.trim().to_string(),
        evidence_level,
        rationale: raw.rationale.trim().to_string(),
    })
}

struct Probes {
    exact: Vec<String>,
    context: Vec<String>,
}

fn run_probes(
    h: &Hypothesis,
    cancer_type: &str,
    literature: &dyn LiteratureClient,
    limit: usize,
) -> Result<Probes, LiteratureError> {
    let exact = literature.search(&exact_probe(&h.drug_a, &h.drug_b), limit)?;
    let context = literature.search(&context_probe(&h.drug_a, &h.drug_b, cancer_type), limit)?;
    Ok(Probes { exact, context })
}

fn excerpt(text: &str) -> String {
    let t = text.split_whitespace().collect::<Vec<_>>().join(" ");
    match t.char_indices().nth(EXCERPT_CHARS) {
        Some((i, _)) => format!("{}...", &t[..i]),
        None => t,
    }
}

fn known(graph: Option<&KnowledgeGraph>, drug: &str) -> &'static str {
    match graph {
        None => "n/a",
        Some(g) => {
            if g.resolve(drug).is_some_and(|e| e.entity_type == EntityType::Drug) {
                "yes"
            } else {
                "no"
            }
        }
    }
}

/// Probes the literature for the pair, then asks the provider for a verdict
/// with the hits in the prompt.
///
/// Never fails: a literature fault leaves novelty unknown and caps the
/// verdict at Caution, and an unusable provider answer becomes a Reject with
/// the cause in `failure`.
pub fn validate_hypothesis(
    h: &Hypothesis,
    biomarker: &str,
    cancer_type: &str,
    literature: &dyn LiteratureClient,
    provider: &dyn LlmProvider,
    graph: Option<&KnowledgeGraph>,
    params: &ValidationParams,
) -> ValidationResult {
    let probes = run_probes(h, cancer_type, literature, params.probe_limit);
    let (exact, context, lit_error) = match probes {
        Ok(p) => (p.exact, p.context, None),
        Err(e) => {
            warn!(a = %h.drug_a, b = %h.drug_b, error = %e, "literature probe failed");
            (Vec::new(), Vec::new(), Some(e.to_string()))
        }
    };
    let hits: Vec<String> = exact
        .iter()
        .chain(&context)
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let mut hit_rows: Vec<String> = hits.iter().map(|p| format!("{p} | - | -")).collect();
    if !hits.is_empty() {
        match literature.fetch(&hits) {
            Ok(abstracts) => {
                let by_pmid: BTreeMap<&str, _> = abstracts.iter().map(|a| (a.pmid.as_str(), a)).collect();
                hit_rows = hits
                    .iter()
                    .map(|p| match by_pmid.get(p.as_str()) {
                        Some(a) => format!("{p} | {} | {}", a.title.trim(), excerpt(&a.text)),
                        None => format!("{p} | - | -"),
                    })
                    .collect();
            }
            Err(e) => warn!(error = %e, "could not fetch hit abstracts"),
        }
    }

    let status = match &lit_error {
        None => "ok".to_string(),
        Some(e) => format!("unavailable ({e})"),
    };
    let vars = BTreeMap::from([
        ("biomarker", biomarker.trim().to_string()),
        ("cancer_type", cancer_type.trim().to_string()),
        ("drug_a", h.drug_a.clone()),
        ("drug_b", h.drug_b.clone()),
        ("a_known", known(graph, &h.drug_a).to_string()),
        ("b_known", known(graph, &h.drug_b).to_string()),
        ("mechanism", h.mechanism.clone()),
        ("literature_status", status),
        ("hits", bullet_list(hit_rows)),
    ]);
    let assessment = prompts::render(prompts::VALIDATE, &vars)
        .and_then(|prompt| complete_parsed(provider, &prompt, &params.llm, parse_assessment));

    let (novelty_exact, novelty_in_context) = match lit_error {
        Some(_) => (None, None),
        // context hits are a subset of exact hits, so an exact miss implies a context miss
        None => (Some(exact.is_empty()), Some(context.is_empty() || exact.is_empty())),
    };
    let mut result = ValidationResult {
        verdict: Verdict::Reject,
        safety_score: 0,
        toxicity_risk: "Unknown (assessment unavailable)".into(),
        novelty_exact,
        novelty_in_context,
        evidence_status: if hits.is_empty() {
            EvidenceStatus::Inferred
        } else {
            EvidenceStatus::Validated
        },
        evidence_level: EvidenceLevel::None,
        literature_hits: hits,
        exact_hits: exact,
        context_hits: context,
        rationale: String::new(),
        failure: None,
    };
    match assessment {
        Ok(a) => {
            result.verdict = a.verdict;
            result.safety_score = a.safety_score;
            result.toxicity_risk = a.toxicity_risk;
            result.evidence_level = a.evidence_level;
            result.rationale = a.rationale;
            if !result.literature_hits.is_empty() && a.evidence_level == EvidenceLevel::Preclinical {
                result.evidence_status = EvidenceStatus::PartiallySupported;
            }
            if let Some(e) = &lit_error {
                if result.verdict == Verdict::Proceed {
                    result.verdict = Verdict::Caution;
                }
                result.failure = Some(format!("literature unavailable: {e}"));
            }
        }
        Err(e) => {
            warn!(a = %h.drug_a, b = %h.drug_b, error = %e, "validation assessment failed");
            result.failure = Some(e.to_string());
        }
    }
    result
}

/// Validates each hypothesis independently, in parallel, keeping input order.
pub fn validate_all(
    hypotheses: &[Hypothesis],
    biomarker: &str,
    cancer_type: &str,
    literature: &dyn LiteratureClient,
    provider: &dyn LlmProvider,
    graph: Option<&KnowledgeGraph>,
    params: &ValidationParams,
) -> Vec<ValidationResult> {
    hypotheses
        .par_iter()
        .map(|h| validate_hypothesis(h, biomarker, cancer_type, literature, provider, graph, params))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probes_quote_terms() {
        assert_eq!(exact_probe("Lapatinib", "AZD9291"), r#""Lapatinib"[tiab] AND "AZD9291"[tiab]"#);
        assert_eq!(
            context_probe("A", "B", "Breast Invasive Carcinoma"),
            r#""A"[tiab] AND "B"[tiab] AND "Breast Invasive Carcinoma"[tiab]"#
        );
    }

    #[test]
    fn assessment_parsing_is_strict() {
        let ok = r#"{"verdict":"Proceed (with Caution)","safety_score":8,"toxicity_risk":"Moderate","evidence_level":"clinical","rationale":"r"}"#;
        let a = parse_assessment(ok).unwrap();
        assert_eq!((a.verdict, a.safety_score), (Verdict::Caution, 8));
        for bad in [
            r#"{"verdict":"Go","safety_score":8,"toxicity_risk":"x","evidence_level":"none","rationale":"r"}"#,
            r#"{"verdict":"Proceed","safety_score":11,"toxicity_risk":"x","evidence_level":"none","rationale":"r"}"#,
            r#"{"verdict":"Proceed","safety_score":7.5,"toxicity_risk":"x","evidence_level":"none","rationale":"r"}"#,
            r#"{"verdict":"Proceed","safety_score":7,"toxicity_risk":"x","evidence_level":"some","rationale":"r"}"#,
            r#"{"verdict":"Proceed","safety_score":7,"toxicity_risk":"x","evidence_level":"none"}"#,
            r#"[]"#,
        ] {
            assert!(parse_assessment(bad).is_err(), "{bad}");
        }
    }
}
