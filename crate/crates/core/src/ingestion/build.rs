use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::{info, warn};

use super::adapters::{AdapterError, CuratedTriple, SourceAdapter};
use super::literature::{fetch_literature, Abstract, LiteratureClient};
use super::{IngestError, RunConfig};
use crate::extraction::{Extractor, Rejection};
use crate::kg::{EntityId, EntityType, KgError, KnowledgeGraph, Provenance, Vocabulary};

const MAX_IN_FLIGHT: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegradedSource {
    pub source_id: String,
    pub error: String,
}

/// A statement that was not ingested, with where it came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectionRecord {
    /// Adapter id, or `pmid:{pmid}` for literature.
    pub origin: String,
    pub subject: String,
    pub phrase: String,
    pub object: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct BuildOutcome {
    pub graph: KnowledgeGraph,
    pub degraded_sources: Vec<DegradedSource>,
    pub literature_error: Option<String>,
    pub abstracts: Vec<Abstract>,
    pub curated_triples: usize,
    pub literature_triples: usize,
    pub rejected: Vec<RejectionRecord>,
}

impl BuildOutcome {
    pub fn is_degraded(&self) -> bool {
        !self.degraded_sources.is_empty() || self.literature_error.is_some()
    }
}

fn rejection_reason(r: &Rejection) -> String {
    match r {
        Rejection::BelowThreshold { best_label, similarity } => {
            format!("below threshold: best '{best_label}' at {similarity:.4}")
        }
        Rejection::Provider { message } => format!("embedding provider: {message}"),
    }
}

struct Assembler<'a> {
    graph: KnowledgeGraph,
    extractor: &'a Extractor,
    rejected: Vec<RejectionRecord>,
}

impl Assembler<'_> {
    // Canonical name and aliases from the gazetteer when it agrees on the type.
    fn entity(&mut self, name: &str, entity_type: EntityType) -> Result<EntityId, KgError> {
        let gaz = self.extractor.gazetteer();
        let (canonical, aliases): (String, Vec<String>) = match gaz.lookup(name) {
            Some(e) if e.entity_type == entity_type => (
                e.canonical.clone(),
                gaz.aliases_of(&e.canonical).map(str::to_string).collect(),
            ),
            _ => (name.trim().to_string(), Vec::new()),
        };
        if let Some(existing) = self.graph.resolve(&canonical) {
            if existing.entity_type == entity_type {
                return Ok(existing.id.clone());
            }
        }
        self.graph.upsert_entity(&canonical, entity_type, aliases)
    }

    fn reject(&mut self, origin: &str, subject: &str, phrase: &str, object: &str, reason: String) {
        warn!(origin, subject, phrase, object, %reason, "statement not ingested");
        self.rejected.push(RejectionRecord {
            origin: origin.to_string(),
            subject: subject.to_string(),
            phrase: phrase.to_string(),
            object: object.to_string(),
            reason,
        });
    }

    fn curated(&mut self, source: &str, t: &CuratedTriple, vocab: &Vocabulary) -> bool {
        let label = t.phrase.trim().to_lowercase();
        let label = if vocab.contains(&label) {
            label
        } else {
            match self.extractor.normalizer().normalize(&t.phrase) {
                Ok((rt, _)) => rt.as_str().to_string(),
                Err(r) => {
                    self.reject(source, &t.subject, &t.phrase, &t.object, rejection_reason(&r));
                    return false;
                }
            }
        };
        let res = self
            .entity(&t.subject, t.subject_type.clone())
            .and_then(|s| Ok((s, self.entity(&t.object, t.object_type.clone())?)))
            .and_then(|(s, o)| {
                let prov = Provenance::curated(source).with_confidence(t.confidence);
                self.graph.upsert_relation(&s, &label, &o, vec![prov])
            });
        match res {
            Ok(_) => true,
            Err(e) => {
                self.reject(source, &t.subject, &t.phrase, &t.object, e.to_string());
                false
            }
        }
    }
}

/// Assembles the run's graph: curated statements first, then literature triples.
///
/// Adapter faults are recorded as degraded sources and the build carries on.
/// It fails only when every adapter and the literature fetch failed.
pub fn build_graph(
    config: &RunConfig,
    vocabulary: &Vocabulary,
    adapters: &[Arc<dyn SourceAdapter>],
    literature: &dyn LiteratureClient,
    extractor: &Extractor,
) -> Result<BuildOutcome, IngestError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(MAX_IN_FLIGHT)
        .build()
        .map_err(|e| IngestError::Graph(e.to_string()))?;
    let (fetched, lit): (Vec<Result<Vec<CuratedTriple>, AdapterError>>, _) = pool.install(|| {
        rayon::join(
            || {
                adapters
                    .par_iter()
                    .map(|a| a.fetch(&config.biomarker, &config.cancer_type))
                    .collect()
            },
            || fetch_literature(&config.biomarker, &config.cancer_type, config.n_abstracts, literature),
        )
    });

    let mut degraded = Vec::new();
    let mut batches = Vec::new();
    for (adapter, res) in adapters.iter().zip(fetched) {
        match res {
            Ok(triples) => batches.push((adapter.id().to_string(), triples)),
            Err(e) => {
                warn!(source = adapter.id(), error = %e, "curated source failed");
                degraded.push(DegradedSource {
                    source_id: adapter.id().to_string(),
                    error: e.to_string(),
                });
            }
        }
    }
    let (abstracts, literature_error) = match lit {
        Ok(a) => (a, None),
        Err(e) => {
            warn!(error = %e, "literature retrieval failed");
            (Vec::new(), Some(e.to_string()))
        }
    };
    if batches.is_empty() && literature_error.is_some() {
        let mut causes: Vec<String> = degraded.iter().map(|d| format!("{}: {}", d.source_id, d.error)).collect();
        causes.push(format!("literature: {}", literature_error.as_deref().unwrap_or_default()));
        return Err(IngestError::EmptyEvidence(causes.join("; ")));
    }

    let mut asm = Assembler {
        graph: KnowledgeGraph::new(vocabulary.clone()),
        extractor,
        rejected: Vec::new(),
    };
    let mut curated_triples = 0;
    for (source, triples) in &batches {
        for t in triples {
            if asm.curated(source, t, vocabulary) {
                curated_triples += 1;
            }
        }
    }

    let docs: Vec<_> = abstracts.iter().map(Abstract::to_document).collect();
    let extracted = extractor.extract_all(&docs);
    for r in &extracted.rejected {
        let reason = rejection_reason(&r.rejection);
        asm.reject(
            &format!("pmid:{}", r.raw.pmid),
            &r.raw.subject.canonical,
            &r.raw.phrase,
            &r.raw.object.canonical,
            reason,
        );
    }
    let mut literature_triples = 0;
    for t in &extracted.triples {
        let raw = &t.raw;
        let res = asm
            .entity(&raw.subject.canonical, raw.subject.entity_type.clone())
            .and_then(|s| Ok((s, asm.entity(&raw.object.canonical, raw.object.entity_type.clone())?)))
            .and_then(|(s, o)| {
                let prov = Provenance::literature(&raw.pmid, t.similarity.clamp(0.0, 1.0));
                asm.graph.upsert_relation(&s, t.relation_type.as_str(), &o, vec![prov])
            });
        match res {
            Ok(_) => literature_triples += 1,
            Err(e) => asm.reject(
                &format!("pmid:{}", raw.pmid),
                &raw.subject.canonical,
                &raw.phrase,
                &raw.object.canonical,
                e.to_string(),
            ),
        }
    }
    for d in docs {
        asm.graph.add_document(d);
    }

    for (name, fallback) in [
        (&config.biomarker, EntityType::Gene),
        (&config.cancer_type, EntityType::Disease),
    ] {
        if asm.graph.resolve(name).is_some() {
            continue;
        }
        let t = extractor.gazetteer().lookup(name).map_or(fallback, |e| e.entity_type.clone());
        asm.entity(name, t).map_err(|e| IngestError::Graph(e.to_string()))?;
    }
    if let Err(issues) = asm.graph.audit() {
        return Err(IngestError::Graph(issues.join("; ")));
    }
    info!(
        entities = asm.graph.entity_count(),
        relations = asm.graph.relation_count(),
        abstracts = abstracts.len(),
        degraded = degraded.len(),
        "graph assembled"
    );
    Ok(BuildOutcome {
        graph: asm.graph,
        degraded_sources: degraded,
        literature_error,
        abstracts,
        curated_triples,
        literature_triples,
        rejected: asm.rejected,
    })
}
