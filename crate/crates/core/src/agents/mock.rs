use std::collections::BTreeMap;

use regex::Regex;
use serde_json::{json, Value};

use super::llm::{LlmError, LlmParams, LlmProvider};

const MEMORY: &str = include_str!("../../assets/mock_memory.tsv");

const TOXICITY_KEYWORDS: &[&str] = &[
    "dose-limiting",
    "toxicity",
    "toxicities",
    "hepatotoxicity",
    "cardiotoxicity",
    "pneumonitis",
    "adverse events",
];
const CLINICAL_KEYWORDS: &[&str] = &["patients", "phase", "trial", "clinical", "cohort"];

/// Deterministic offline provider that answers the bundled prompt templates.
///
/// Generation pairs the explicit drug with the most provenance against the
/// other candidates, rotated by the seed. Validation follows a fixed rule
/// table over the literature hits embedded in the prompt.
#[derive(Debug, Clone)]
pub struct MockProvider {
    memory: BTreeMap<String, Vec<String>>,
}

impl Default for MockProvider {
    fn default() -> Self {
        Self::new()
    }
}

fn line_value(prompt: &str, prefix: &str) -> Option<String> {
    prompt
        .lines()
        .find_map(|l| l.strip_prefix(prefix))
        .map(|v| v.trim().to_string())
}

// Rows of a "- a | b | c" list that follows the line starting with `header`.
fn section(prompt: &str, header: &str) -> Vec<Vec<String>> {
    let mut lines = prompt.lines().skip_while(|l| !l.starts_with(header));
    lines.next();
    lines
        .take_while(|l| !l.trim().is_empty())
        .filter_map(|l| l.strip_prefix("- "))
        .map(|l| l.split(" | ").map(|c| c.trim().to_string()).collect())
        .collect()
}

fn task(prompt: &str) -> Option<String> {
    let re = Regex::new(r"(?m)^\[task: ([a-z_]+)\]").expect("static regex");
    re.captures(prompt).map(|c| c[1].to_string())
}

fn unwrap_repair(prompt: &str) -> &str {
    const MARK: &str = "Original request:\n<<<\n";
    match prompt.find(MARK) {
        Some(i) => {
            let rest = &prompt[i + MARK.len()..];
            rest.rfind("\n>>>").map_or(rest, |end| &rest[..end])
        }
        None => prompt,
    }
}

fn rotate(mut v: Vec<String>, seed: u64) -> Vec<String> {
    if !v.is_empty() {
        let k = (seed % v.len() as u64) as usize;
        v.rotate_left(k);
    }
    v
}

/// Anchor against each partner first, then partner-partner pairs, up to `h`.
fn pair_up(anchor: &str, partners: &[String], h: usize) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = partners.iter().map(|p| (anchor.to_string(), p.clone())).collect();
    for i in 0..partners.len() {
        for j in i + 1..partners.len() {
            out.push((partners[i].clone(), partners[j].clone()));
        }
    }
    out.truncate(h);
    out
}

impl MockProvider {
    pub const ID: &'static str = "mock";

    pub fn new() -> Self {
        let mut memory = BTreeMap::new();
        for line in MEMORY.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
            if let Some((k, v)) = line.split_once('\t') {
                memory.insert(
                    k.trim().to_uppercase(),
                    v.split(',').map(|d| d.trim().to_string()).filter(|d| !d.is_empty()).collect(),
                );
            }
        }
        Self { memory }
    }

    fn generate(&self, prompt: &str, seed: u64) -> String {
        let biomarker = line_value(prompt, "Focus biomarker:").unwrap_or_default();
        let cancer = line_value(prompt, "Cancer type:").unwrap_or_default();
        let h: usize = line_value(prompt, "Hypotheses requested:").and_then(|v| v.parse().ok()).unwrap_or(1);
        let explicit: Vec<String> = section(prompt, "Drugs in the explicit subgraph")
            .into_iter()
            .map(|r| r[0].clone())
            .collect();
        let latent: Vec<String> = section(prompt, "Drugs close to the biomarker")
            .into_iter()
            .map(|r| r[0].clone())
            .filter(|d| !explicit.contains(d))
            .collect();
        let Some(anchor) = explicit.first().or(latent.first()).cloned() else {
            return "[]".into();
        };
        // Each list is rotated on its own so the interleave still alternates.
        let e_rest = rotate(explicit.iter().skip(1).cloned().collect(), seed);
        let l_rest = rotate(latent.iter().filter(|d| **d != anchor).cloned().collect(), seed);
        let mut partners = Vec::new();
        for i in 0..e_rest.len().max(l_rest.len()) {
            partners.extend(l_rest.get(i).cloned());
            partners.extend(e_rest.get(i).cloned());
        }
        let items: Vec<Value> = pair_up(&anchor, &partners, h)
            .into_iter()
            .map(|(a, b)| {
                let (mechanism, rationale) = if explicit.contains(&b) && explicit.contains(&a) {
                    (
                        format!("Dual blockade of {biomarker}-driven signalling: {a} and {b} both act on the explicit {biomarker} evidence graph."),
                        "direct graph evidence",
                    )
                } else {
                    (
                        format!("{b} lies close to {biomarker} in embedding space; combined with {a} it may close a compensatory route in {cancer}."),
                        "inferred embedding similarity",
                    )
                };
                json!({"drug_a": a, "drug_b": b, "mechanism": mechanism, "rationale": rationale})
            })
            .collect();
        serde_json::to_string_pretty(&Value::Array(items)).expect("json")
    }

    fn generate_unassisted(&self, prompt: &str, seed: u64) -> String {
        let biomarker = line_value(prompt, "Focus biomarker:").unwrap_or_default();
        let cancer = line_value(prompt, "Cancer type:").unwrap_or_default();
        let h: usize = line_value(prompt, "Hypotheses requested:").and_then(|v| v.parse().ok()).unwrap_or(1);
        let drugs = self
            .memory
            .get(&biomarker.to_uppercase())
            .or_else(|| self.memory.get("*"))
            .cloned()
            .unwrap_or_default();
        let Some((anchor, rest)) = drugs.split_first() else {
            return "[]".into();
        };
        let items: Vec<Value> = pair_up(anchor, &rotate(rest.to_vec(), seed), h)
            .into_iter()
            .map(|(a, b)| {
                json!({
                    "drug_a": a,
                    "drug_b": b,
                    "mechanism": format!("Established {biomarker}-directed therapy {a} combined with {b} for {cancer}."),
                    "rationale": "prior knowledge",
                })
            })
            .collect();
        serde_json::to_string_pretty(&Value::Array(items)).expect("json")
    }

    fn validate(&self, prompt: &str) -> String {
        let known = |label: &str| {
            let re = Regex::new(&format!(r"(?m)^{label}: .+ \(in knowledge graph: ([a-z/]+)\)$")).expect("regex");
            re.captures(prompt).map(|c| c[1].to_string()).unwrap_or_default()
        };
        let (a_known, b_known) = (known("Drug A"), known("Drug B"));
        let hits = section(prompt, "Literature hits");
        let text = hits.iter().flatten().cloned().collect::<Vec<_>>().join(" ").to_lowercase();
        let toxic = TOXICITY_KEYWORDS.iter().find(|k| text.contains(*k));
        let evidence = if hits.is_empty() {
            "none"
        } else if CLINICAL_KEYWORDS.iter().any(|k| text.contains(k)) {
            "clinical"
        } else {
            "preclinical"
        };
        let (verdict, safety, risk, why) = if a_known == "no" && b_known == "no" {
            ("Reject", 3, "Unknown (neither drug could be resolved)".to_string(), "drugs not resolvable")
        } else if let Some(k) = toxic {
            ("Caution", 6, format!("Elevated ({k} reported in retrieved studies)"), "toxicity signal in literature")
        } else if hits.is_empty() {
            ("Caution", 7, "Predicted moderate".to_string(), "no direct study found")
        } else {
            (
                "Proceed",
                8,
                "Moderate (no specific toxicity signal in retrieved studies)".to_string(),
                "supported by literature",
            )
        };
        let v = json!({
            "verdict": verdict,
            "safety_score": safety,
            "toxicity_risk": risk,
            "evidence_level": evidence,
            "rationale": why,
        });
        serde_json::to_string_pretty(&v).expect("json")
    }
}

impl LlmProvider for MockProvider {
    fn id(&self) -> &str {
        Self::ID
    }

    fn complete(&self, prompt: &str, params: &LlmParams) -> Result<String, LlmError> {
        let prompt = unwrap_repair(prompt);
        match task(prompt).as_deref() {
            Some("generate") => Ok(self.generate(prompt, params.seed)),
            Some("generate_unassisted") => Ok(self.generate_unassisted(prompt, params.seed)),
            Some("validate") => Ok(self.validate(prompt)),
            _ => Err(LlmError::Payload("mock provider does not recognise this prompt".into())),
        }
    }
}
