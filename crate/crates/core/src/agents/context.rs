use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::AgentError;
use crate::embedding::{top_k_similar, EmbeddingTable};
use crate::kg::{EntityId, EntityType, KnowledgeGraph, Subgraph};

const SNIPPET_CHARS: usize = 320;
const NEAREST_NAMES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextParams {
    pub hops: usize,
    pub k: usize,
    pub max_nodes: usize,
}

impl Default for ContextParams {
    fn default() -> Self {
        Self {
            hops: 2,
            k: 10,
            max_nodes: 150,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentNeighbor {
    pub id: EntityId,
    pub name: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snippet {
    pub pmid: String,
    pub title: String,
    pub text: String,
}

/// Explicit subgraph plus embedding-space neighbours around the focus biomarker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryContext {
    pub focus: EntityId,
    pub focus_name: String,
    pub cancer_type: String,
    pub subgraph: Subgraph,
    /// Drug-typed neighbours by descending cosine that are not already in the
    /// explicit subgraph.
    pub latent: Vec<LatentNeighbor>,
    /// Set when there is no table or the focus has no vector.
    pub no_embeddings: bool,
    pub snippets: Vec<Snippet>,
}

impl DiscoveryContext {
    /// Focus plus pathway entities one edge away from it.
    pub fn anchors(&self) -> BTreeSet<&EntityId> {
        let mut out = BTreeSet::from([&self.focus]);
        for r in self.subgraph.incident(&self.focus) {
            let other = r.other_end(&self.focus);
            if self
                .subgraph
                .entities
                .get(other)
                .is_some_and(|e| e.entity_type == EntityType::Pathway)
            {
                out.insert(other);
            }
        }
        out
    }

    /// Subgraph drug id for a name, by exact canonical name or alias.
    pub fn drug_id(&self, name: &str) -> Option<&EntityId> {
        let key = crate::kg::normalize_name(name);
        self.subgraph.entities.values().find_map(|e| {
            let hit = e.entity_type == EntityType::Drug
                && (crate::kg::normalize_name(&e.name) == key
                    || e.aliases.iter().any(|a| crate::kg::normalize_name(a) == key));
            hit.then_some(&e.id)
        })
    }

    /// Drugs of the explicit subgraph with the provenance records on their
    /// subgraph edges, most supported first.
    pub fn explicit_drugs(&self) -> Vec<(String, usize)> {
        let mut out: Vec<(String, usize)> = self
            .subgraph
            .entities_of_type(&EntityType::Drug)
            .map(|e| {
                let n = self.subgraph.incident(&e.id).map(|r| r.provenance.len()).sum();
                (e.name.clone(), n)
            })
            .collect();
        out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        out
    }

    fn name<'a>(&'a self, id: &'a EntityId) -> &'a str {
        self.subgraph.entities.get(id).map_or(id.as_str(), |e| e.name.as_str())
    }

    /// Subgraph relations as `subject | relation | object | pmids` rows,
    /// nearest to the focus first.
    pub fn triple_rows(&self) -> Vec<String> {
        let dist = |id: &EntityId| self.subgraph.distances.get(id).copied().unwrap_or(usize::MAX);
        let mut rels: Vec<_> = self.subgraph.relations.values().collect();
        rels.sort_by_key(|r| (dist(&r.subject).min(dist(&r.object)), r.id.clone()));
        rels.iter()
            .map(|r| {
                let pmids: Vec<&str> = r.pmids().collect();
                format!(
                    "{} | {} | {} | {}",
                    self.name(&r.subject),
                    r.relation_type.as_str(),
                    self.name(&r.object),
                    if pmids.is_empty() { "-".to_string() } else { pmids.join(",") }
                )
            })
            .collect()
    }
}

fn nearest_names(graph: &KnowledgeGraph, name: &str) -> Vec<String> {
    let key = crate::kg::normalize_name(name);
    let mut scored: Vec<(f64, String)> = graph
        .name_keys()
        .map(|k| (strsim::normalized_levenshtein(&key, k), k.to_string()))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    let mut out = Vec::new();
    for (_, k) in scored {
        if let Some(e) = graph.resolve(&k) {
            if !out.contains(&e.name) {
                out.push(e.name.clone());
            }
        }
        if out.len() == NEAREST_NAMES {
            break;
        }
    }
    out
}

fn excerpt(text: &str) -> String {
    let t = text.split_whitespace().collect::<Vec<_>>().join(" ");
    match t.char_indices().nth(SNIPPET_CHARS) {
        Some((i, _)) => format!("{}...", &t[..i]),
        None => t,
    }
}

/// Neighbourhood of the biomarker plus drug-typed latent neighbours.
///
/// Latent neighbours are restricted to drugs, since only drugs can appear in
/// a hypothesis, and skip anything the subgraph already shows.
pub fn build_discovery_context(
    graph: &KnowledgeGraph,
    embeddings: Option<&EmbeddingTable>,
    biomarker: &str,
    cancer_type: &str,
    params: &ContextParams,
) -> Result<DiscoveryContext, AgentError> {
    let focus = graph.resolve(biomarker).ok_or_else(|| AgentError::UnknownBiomarker {
        name: biomarker.to_string(),
        nearest: nearest_names(graph, biomarker),
    })?;
    let subgraph = graph
        .neighborhood(&focus.id, params.hops, params.max_nodes)
        .map_err(|e| AgentError::InvalidArgument(e.to_string()))?;

    let mut no_embeddings = true;
    let mut latent = Vec::new();
    if let Some(table) = embeddings.filter(|t| t.get(focus.id.as_str()).is_some()) {
        no_embeddings = false;
        let k = params.k.max(1);
        let wide = k + subgraph.entities.len();
        let found = top_k_similar(table, graph, focus.id.as_str(), wide, Some(&EntityType::Drug))
            .map_err(|e| AgentError::InvalidArgument(e.to_string()))?;
        for (id, similarity) in found {
            let id = EntityId::from(id.as_str());
            if subgraph.entities.contains_key(&id) {
                continue;
            }
            if latent.len() == k {
                break;
            }
            let name = graph.entity(&id).map_or_else(|| id.as_str().to_string(), |e| e.name.clone());
            latent.push(LatentNeighbor { id, name, similarity });
        }
    }

    let mut snippets = BTreeMap::new();
    for pmid in subgraph.pmids() {
        if let Some(doc) = graph.document(&pmid) {
            snippets.insert(
                pmid.clone(),
                Snippet {
                    pmid,
                    title: doc.title.clone(),
                    text: excerpt(&doc.text),
                },
            );
        }
    }

    Ok(DiscoveryContext {
        focus: focus.id.clone(),
        focus_name: focus.name.clone(),
        cancer_type: cancer_type.trim().to_string(),
        subgraph,
        latent,
        no_embeddings,
        snippets: snippets.into_values().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{Provenance, Vocabulary};

    fn graph() -> KnowledgeGraph {
        let mut g = KnowledgeGraph::new(Vocabulary::default());
        let egfr = g.upsert_entity("EGFR", EntityType::Gene, ["HER1"]).unwrap();
        let afa = g.upsert_entity("Afatinib", EntityType::Drug, Vec::<String>::new()).unwrap();
        let path = g.upsert_entity("EGFR signaling pathway", EntityType::Pathway, Vec::<String>::new()).unwrap();
        g.upsert_relation(&afa, "targets", &egfr, vec![Provenance::literature("1", 0.9)]).unwrap();
        g.upsert_relation(&egfr, "member_of_pathway", &path, vec![Provenance::curated("pathways")])
            .unwrap();
        g
    }

    #[test]
    fn degenerate_context_sets_flag() {
        let mut g = KnowledgeGraph::new(Vocabulary::default());
        g.upsert_entity("TP53", EntityType::Gene, Vec::<String>::new()).unwrap();
        let ctx = build_discovery_context(&g, None, "tp53", "x", &ContextParams::default()).unwrap();
        assert_eq!(ctx.subgraph.entities.len(), 1);
        assert!(ctx.latent.is_empty() && ctx.no_embeddings);
    }

    #[test]
    fn unknown_biomarker_lists_nearest() {
        let err = build_discovery_context(&graph(), None, "EGFRR", "x", &ContextParams::default()).unwrap_err();
        match err {
            AgentError::UnknownBiomarker { nearest, .. } => assert_eq!(nearest[0], "EGFR"),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn anchors_include_pathways() {
        let ctx = build_discovery_context(&graph(), None, "HER1", "x", &ContextParams::default()).unwrap();
        assert_eq!(ctx.anchors().len(), 2);
        assert_eq!(ctx.explicit_drugs(), [("Afatinib".to_string(), 1)]);
        assert!(ctx.drug_id("afatinib").is_some());
        assert_eq!(ctx.triple_rows().len(), 2);
    }
}
