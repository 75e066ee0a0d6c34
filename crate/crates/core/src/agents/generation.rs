use std::collections::{BTreeMap, BTreeSet};

use serde::Deserialize;
use tracing::{debug, warn};

use super::context::DiscoveryContext;
use super::llm::{LlmParams, LlmProvider};
use super::prompts::{self, bullet_list};
use super::{AgentError, Hypothesis, RationaleType, MAX_REPAIRS};

const MAX_TRIPLE_ROWS: usize = 80;
const MAX_SNIPPETS: usize = 12;

/// One element of the provider's answer, before classification.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProposedPair {
    pub drug_a: String,
    pub drug_b: String,
    pub mechanism: String,
    pub rationale: String,
}

// A bare JSON document, or exactly one fenced block holding it.
pub(crate) fn strip_fence(text: &str) -> Result<&str, String> {
    let t = text.trim();
    if !t.starts_with("```") {
        return Ok(t);
    }
    let body = t
        .strip_suffix("```")
        .ok_or_else(|| "unterminated code fence".to_string())?;
    let body = body.split_once('\n').map(|(_, rest)| rest).unwrap_or("");
    if body.contains("```") {
        return Err("more than one code fence".into());
    }
    Ok(body.trim())
}

/// Strict parse of a generation answer: a JSON array of objects with exactly
/// the four string keys, non-empty values and two distinct drugs.
pub fn parse_generation(text: &str) -> Result<Vec<ProposedPair>, String> {
    let body = strip_fence(text)?;
    let items: Vec<ProposedPair> = serde_json::from_str(body).map_err(|e| format!("not a valid hypothesis array: {e}"))?;
    for (i, p) in items.iter().enumerate() {
        for (field, value) in [
            ("drug_a", &p.drug_a),
            ("drug_b", &p.drug_b),
            ("mechanism", &p.mechanism),
            ("rationale", &p.rationale),
        ] {
            if value.trim().is_empty() {
                return Err(format!("element {i}: '{field}' is empty"));
            }
        }
        if p.drug_a.trim().eq_ignore_ascii_case(p.drug_b.trim()) {
            return Err(format!("element {i}: drug_a and drug_b are the same drug"));
        }
    }
    Ok(items)
}

fn repair_prompt(original: &str, response: &str, error: &str) -> Result<String, AgentError> {
    let vars = BTreeMap::from([
        ("error", error.to_string()),
        ("response", response.to_string()),
        ("prompt", original.trim_end().to_string()),
    ]);
    prompts::render(prompts::REPAIR, &vars)
}

/// Sends `prompt` and parses the answer with `parse`, reprompting with the
/// parse error up to [`MAX_REPAIRS`] times.
pub(crate) fn complete_parsed<T>(
    provider: &dyn LlmProvider,
    prompt: &str,
    params: &LlmParams,
    parse: impl Fn(&str) -> Result<T, String>,
) -> Result<T, AgentError> {
    let mut raw = Vec::new();
    let mut current = prompt.to_string();
    let mut last_error = String::new();
    for attempt in 0..=MAX_REPAIRS {
        let text = provider.complete(&current, params)?;
        match parse(&text) {
            Ok(v) => return Ok(v),
            Err(e) => {
                warn!(attempt, error = %e, provider = provider.id(), "malformed provider answer");
                current = repair_prompt(prompt, &text, &e)?;
                raw.push(text);
                last_error = e;
            }
        }
    }
    Err(AgentError::Generation {
        message: format!("{} malformed answers; last error: {last_error}", raw.len()),
        raw_responses: raw,
    })
}

fn render_generation(ctx: &DiscoveryContext, h: usize) -> Result<String, AgentError> {
    let rows = ctx.triple_rows();
    let explicit = ctx.explicit_drugs();
    let snippets: Vec<String> = ctx
        .snippets
        .iter()
        .take(MAX_SNIPPETS)
        .map(|s| format!("{} | {} | {}", s.pmid, s.title, s.text))
        .collect();
    let vars = BTreeMap::from([
        ("biomarker", ctx.focus_name.clone()),
        ("cancer_type", ctx.cancer_type.clone()),
        ("h", h.to_string()),
        ("explicit_triples", bullet_list(rows.iter().take(MAX_TRIPLE_ROWS))),
        ("explicit_drugs", bullet_list(explicit.iter().map(|(d, n)| format!("{d} | {n}")))),
        (
            "latent_drugs",
            bullet_list(ctx.latent.iter().map(|l| format!("{} | {:.4}", l.name, l.similarity))),
        ),
        ("snippets", bullet_list(snippets)),
    ]);
    prompts::render(prompts::GENERATE, &vars)
}

// Canonical subgraph name when the drug is known there, else the trimmed input.
fn canonical_drug(ctx: &DiscoveryContext, name: &str) -> String {
    ctx.drug_id(name)
        .and_then(|id| ctx.subgraph.entities.get(id))
        .map_or_else(|| name.trim().to_string(), |e| e.name.clone())
}

fn classify(ctx: &DiscoveryContext, mut h: Hypothesis) -> Hypothesis {
    let anchors = ctx.anchors();
    let mut pmids = BTreeSet::new();
    let mut nodes = BTreeSet::new();
    let mut linked = 0;
    for drug in [h.drug_a.clone(), h.drug_b.clone()] {
        let Some(id) = ctx.drug_id(&drug) else { continue };
        nodes.insert(id.as_str().to_string());
        let mut hit = false;
        for r in ctx.subgraph.incident(id) {
            pmids.extend(r.pmids().map(str::to_string));
            let other = r.other_end(id);
            if anchors.contains(other) {
                hit = true;
                nodes.insert(other.as_str().to_string());
            }
        }
        linked += usize::from(hit);
    }
    h.rationale_type = if linked == 2 {
        RationaleType::DirectGraphEvidence
    } else {
        RationaleType::InferredSimilarity
    };
    h.supporting_pmids = pmids.into_iter().collect();
    h.supporting_node_ids = nodes.into_iter().collect();
    h
}

fn dedupe_truncate(items: Vec<Hypothesis>, h: usize) -> Vec<Hypothesis> {
    let mut seen = BTreeSet::new();
    let mut out: Vec<Hypothesis> = items.into_iter().filter(|x| seen.insert(x.pair_key())).collect();
    out.truncate(h);
    out
}

/// Asks the provider for up to `h` drug pairs over the hybrid context.
///
/// A pair is direct graph evidence when both drugs have a subgraph edge to
/// the focus or to a pathway one edge from it.
pub fn generate_hypotheses(
    ctx: &DiscoveryContext,
    h: usize,
    provider: &dyn LlmProvider,
    params: &LlmParams,
) -> Result<Vec<Hypothesis>, AgentError> {
    if h == 0 {
        return Err(AgentError::InvalidArgument("h must be at least 1".into()));
    }
    let prompt = render_generation(ctx, h)?;
    let pairs = complete_parsed(provider, &prompt, params, parse_generation)?;
    let mut out = Vec::with_capacity(pairs.len());
    for p in pairs {
        let (a, b) = (canonical_drug(ctx, &p.drug_a), canonical_drug(ctx, &p.drug_b));
        // names that collapse to one canonical drug are not a pair
        let Ok(hyp) = Hypothesis::new(&a, &b, &p.mechanism, RationaleType::InferredSimilarity) else {
            debug!(a, b, "dropping degenerate pair");
            continue;
        };
        out.push(classify(ctx, hyp));
    }
    Ok(dedupe_truncate(out, h))
}

/// Generation from the scenario text alone, with no graph or embeddings.
/// Every pair is inferred and carries no graph support.
pub fn generate_unassisted(
    biomarker: &str,
    cancer_type: &str,
    h: usize,
    provider: &dyn LlmProvider,
    params: &LlmParams,
) -> Result<Vec<Hypothesis>, AgentError> {
    if h == 0 {
        return Err(AgentError::InvalidArgument("h must be at least 1".into()));
    }
    let vars = BTreeMap::from([
        ("biomarker", biomarker.trim().to_string()),
        ("cancer_type", cancer_type.trim().to_string()),
        ("h", h.to_string()),
    ]);
    let prompt = prompts::render(prompts::GENERATE_UNASSISTED, &vars)?;
    let pairs = complete_parsed(provider, &prompt, params, parse_generation)?;
    let out = pairs
        .into_iter()
        .filter_map(|p| Hypothesis::new(&p.drug_a, &p.drug_b, &p.mechanism, RationaleType::InferredSimilarity).ok())
        .collect();
    Ok(dedupe_truncate(out, h))
}
