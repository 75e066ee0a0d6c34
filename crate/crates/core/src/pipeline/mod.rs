//! One run end to end: ingest, embed, generate, validate, rank, report.

mod report;

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use chrono::Utc;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{info, warn};

use crate::agents::{
    build_discovery_context, generate_hypotheses, generate_unassisted, prompts, validate_all, AgentError,
    ContextParams, DiscoveryContext, LlmParams, ProviderRegistry, ValidationParams,
};
use crate::embedding::{embed_graph, fingerprint, EmbeddingTable, TrainConfig, WalkConfig};
use crate::extraction::{Extractor, DEFAULT_THRESHOLD};
use crate::ingestion::{
    build_graph, AdapterRegistry, FieldError, FixtureLiterature, IngestError, LiteratureClient, RunConfig, Variant,
};
use crate::kg::cache::{GraphCache, GraphCacheKey};
use crate::kg::{snapshot, KnowledgeGraph, Vocabulary};
use crate::ranking::{
    graph_evidence_score, normalize_and_compose, rank, Normalization, ScoreWeights, ScoredHypothesis, SynergyTable,
};

pub use report::{
    GraphSummary, ReportError, ReportRecord, RunReport, SynergySummary, ValidationRecord, REPORT_SCHEMA_VERSION,
};

/// Pipeline stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    Queued,
    Ingesting,
    Embedding,
    Generating,
    Validating,
    Ranking,
    Done,
    Failed,
}

impl Stage {
    pub const ORDER: [Stage; 7] = [
        Stage::Queued,
        Stage::Ingesting,
        Stage::Embedding,
        Stage::Generating,
        Stage::Validating,
        Stage::Ranking,
        Stage::Done,
    ];

    /// Fraction of the run completed on entering this stage.
    pub fn progress(self) -> f64 {
        match self {
            Stage::Queued => 0.0,
            Stage::Ingesting => 0.1,
            Stage::Embedding => 0.35,
            Stage::Generating => 0.55,
            Stage::Validating => 0.7,
            Stage::Ranking => 0.9,
            Stage::Done => 1.0,
            Stage::Failed => 1.0,
        }
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, Stage::Done | Stage::Failed)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("invalid run configuration: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Validation(Vec<FieldError>),
    #[error("ingestion failed: {0}")]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("engine setup failed: {0}")]
    Setup(String),
}

/// Receives progress from [`Engine::run`].
pub trait RunObserver {
    fn stage(&mut self, _stage: Stage) {}
    fn graph_ready(&mut self, _summary: &GraphSummary) {}
}

impl RunObserver for () {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineSettings {
    pub walk: WalkConfig,
    pub train: TrainConfig,
    pub context: ContextParams,
    pub weights: ScoreWeights,
    pub normalization: Normalization,
    pub probe_limit: usize,
    pub extraction_threshold: f64,
}

impl Default for EngineSettings {
    fn default() -> Self {
        Self {
            walk: WalkConfig::default(),
            train: TrainConfig::default(),
            context: ContextParams::default(),
            weights: ScoreWeights::default(),
            normalization: Normalization::RunLocal,
            probe_limit: ValidationParams::default().probe_limit,
            extraction_threshold: DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub report: RunReport,
    pub graph_summary: Option<GraphSummary>,
}

/// Shared, read-only run machinery. Safe to use from several threads; each
/// call to [`Engine::run`] owns its own state.
#[derive(Clone)]
pub struct Engine {
    pub vocabulary: Vocabulary,
    pub extractor: Arc<Extractor>,
    pub adapters: AdapterRegistry,
    pub literature: Arc<dyn LiteratureClient>,
    pub providers: ProviderRegistry,
    pub cache: Arc<GraphCache>,
    pub synergy: Arc<SynergyTable>,
    pub settings: EngineSettings,
}

impl Engine {
    pub fn new(adapters: AdapterRegistry, literature: Arc<dyn LiteratureClient>, providers: ProviderRegistry) -> Self {
        let settings = EngineSettings::default();
        let vocabulary = Vocabulary::default();
        Self {
            extractor: Arc::new(Extractor::bundled(vocabulary.clone(), settings.extraction_threshold)),
            vocabulary,
            adapters,
            literature,
            providers,
            cache: Arc::new(GraphCache::in_memory()),
            synergy: Arc::new(SynergyTable::default()),
            settings,
        }
    }

    /// Adapters from `{dir}/adapters/*.jsonl`, literature from
    /// `{dir}/literature.jsonl` and synergy from `{dir}/synergy.csv`, each
    /// optional, with providers from the environment.
    pub fn from_fixture_dir(dir: &Path) -> Result<Self, PipelineError> {
        let vocabulary = Vocabulary::default();
        let extractor = Extractor::bundled(vocabulary.clone(), DEFAULT_THRESHOLD);
        let lit_path = dir.join("literature.jsonl");
        let literature = if lit_path.is_file() {
            FixtureLiterature::load(&lit_path).map_err(|e| PipelineError::Setup(e.to_string()))?
        } else {
            FixtureLiterature::empty()
        }
        .with_synonyms(extractor.gazetteer());
        let syn_path = dir.join("synergy.csv");
        let synergy = if syn_path.is_file() {
            SynergyTable::load(&syn_path).map_err(|e| PipelineError::Setup(e.to_string()))?
        } else {
            SynergyTable::default()
        };
        let mut engine = Self::new(
            AdapterRegistry::with_fixture_dir(dir),
            Arc::new(literature),
            ProviderRegistry::from_env(),
        );
        engine.extractor = Arc::new(extractor);
        engine.synergy = Arc::new(synergy);
        Ok(engine)
    }

    pub fn with_cache(mut self, cache: Arc<GraphCache>) -> Self {
        self.cache = cache;
        self
    }

    pub fn with_synergy(mut self, synergy: SynergyTable) -> Self {
        self.synergy = Arc::new(synergy);
        self
    }

    pub fn cache_key(&self, config: &RunConfig) -> GraphCacheKey {
        GraphCacheKey::new(
            &config.biomarker,
            &config.cancer_type,
            config.n_abstracts,
            &config.source_set,
            &self.extractor.version(),
        )
    }

    pub fn validate(&self, config: &RunConfig) -> Result<(), PipelineError> {
        config
            .validate(&self.providers.ids(), &self.adapters.ids())
            .map_err(PipelineError::Validation)
    }

    /// Runs every stage for `config` and returns the report.
    pub fn run(&self, config: &RunConfig, observer: &mut dyn RunObserver) -> Result<RunOutput, PipelineError> {
        self.run_with_id(&uuid_like(config), config, observer)
    }

    pub fn run_with_id(
        &self,
        run_id: &str,
        config: &RunConfig,
        observer: &mut dyn RunObserver,
    ) -> Result<RunOutput, PipelineError> {
        self.validate(config)?;
        let provider = self
            .providers
            .get(&config.provider_id)
            .ok_or_else(|| PipelineError::Setup(format!("provider '{}' vanished", config.provider_id)))?;
        let llm = LlmParams {
            max_tokens: config.max_tokens,
            temperature: config.temperature,
            seed: config.seed,
        };
        let mut warnings = Vec::new();
        let mut degraded = Vec::new();
        let mut literature_error = None;
        let mut summary = None;

        observer.stage(Stage::Ingesting);
        let graph: Option<(Arc<KnowledgeGraph>, GraphCacheKey)> = if config.variant == Variant::LlmOnly {
            None
        } else {
            let key = self.cache_key(config);
            let (graph, hit) = match self.cache.get(&key) {
                Some(g) => (g, true),
                None => {
                    let adapters = self.adapters.resolve(&config.source_set).map_err(|unknown| {
                        PipelineError::Validation(
                            unknown
                                .into_iter()
                                .map(|s| FieldError {
                                    field: "source_set".into(),
                                    message: format!("unknown source '{s}'"),
                                })
                                .collect(),
                        )
                    })?;
                    let built = build_graph(config, &self.vocabulary, &adapters, self.literature.as_ref(), &self.extractor)?;
                    degraded = built.degraded_sources.clone();
                    literature_error = built.literature_error.clone();
                    if built.is_degraded() {
                        // partial graphs are not reused by later runs
                        (Arc::new(built.graph), false)
                    } else {
                        (self.cache.insert(&key, built.graph), false)
                    }
                }
            };
            let s = GraphSummary::of(&graph, hit, key.digest(), snapshot::snapshot_hash(&graph, &key));
            observer.graph_ready(&s);
            summary = Some(s);
            if graph.relation_count() == 0 {
                return Err(IngestError::EmptyEvidence(format!(
                    "no relations for '{}' in '{}' from sources [{}] or literature",
                    config.biomarker,
                    config.cancer_type,
                    config.source_set.join(", ")
                ))
                .into());
            }
            Some((graph, key))
        };

        observer.stage(Stage::Embedding);
        let mut table: Option<Arc<EmbeddingTable>> = None;
        if let (Some((g, key)), Variant::Full) = (&graph, config.variant) {
            let walk = WalkConfig {
                seed: config.seed,
                ..self.settings.walk.clone()
            };
            let train = TrainConfig {
                seed: config.seed,
                ..self.settings.train.clone()
            };
            let hash = summary.as_ref().map(|s| s.snapshot_hash.clone()).unwrap_or_default();
            let fp = fingerprint(&walk, &train, &hash);
            let cached = self.cache.get_embeddings(key, &fp);
            let hit = cached.is_some();
            table = match cached {
                Some(t) => Some(t),
                None => match embed_graph(g, &hash, &walk, &train) {
                    Ok(out) => Some(self.cache.insert_embeddings(key, out.table)),
                    Err(e) => {
                        warn!(error = %e, "embedding failed, continuing without latent neighbours");
                        warnings.push(format!("embedding unavailable: {e}"));
                        None
                    }
                },
            };
            if let Some(s) = summary.as_mut() {
                s.embedding_cache_hit = Some(hit);
            }
        }

        observer.stage(Stage::Generating);
        let ctx: Option<DiscoveryContext> = match &graph {
            Some((g, _)) => Some(build_discovery_context(
                g,
                table.as_deref(),
                &config.biomarker,
                &config.cancer_type,
                &self.settings.context,
            )?),
            None => None,
        };
        let hypotheses = match &ctx {
            Some(c) => generate_hypotheses(c, config.n_hypotheses, provider.as_ref(), &llm)?,
            None => generate_unassisted(
                &config.biomarker,
                &config.cancer_type,
                config.n_hypotheses,
                provider.as_ref(),
                &llm,
            )?,
        };
        if hypotheses.len() < config.n_hypotheses {
            warnings.push(format!(
                "provider proposed {} usable hypotheses of {} requested",
                hypotheses.len(),
                config.n_hypotheses
            ));
        }

        observer.stage(Stage::Validating);
        let vparams = ValidationParams {
            probe_limit: self.settings.probe_limit,
            llm,
        };
        let graph_ref = graph.as_ref().map(|(g, _)| g.as_ref());
        let validations = validate_all(
            &hypotheses,
            &config.biomarker,
            &config.cancer_type,
            self.literature.as_ref(),
            provider.as_ref(),
            graph_ref,
            &vparams,
        );

        observer.stage(Stage::Ranking);
        let mut breakdowns: Vec<_> = hypotheses
            .iter()
            .zip(&validations)
            .map(|(h, v)| graph_evidence_score(h, ctx.as_ref(), table.as_deref(), v, &self.settings.weights))
            .collect();
        normalize_and_compose(&mut breakdowns, self.settings.normalization);
        let scored = hypotheses
            .into_iter()
            .zip(validations)
            .zip(breakdowns)
            .map(|((hypothesis, validation), breakdown)| ScoredHypothesis {
                hypothesis,
                validation,
                breakdown,
            })
            .collect();
        let records = rank(scored).into_iter().map(|r| self.record(r)).collect();

        let report = RunReport {
            schema_version: REPORT_SCHEMA_VERSION,
            run_id: run_id.to_string(),
            created_at: Utc::now(),
            config: config.clone(),
            prompt_version: prompts::PROMPT_VERSION.to_string(),
            extraction_version: self.extractor.version(),
            embedding_fingerprint: table.as_ref().map(|t| t.fingerprint().to_string()),
            no_embeddings: ctx.as_ref().is_none_or(|c| c.no_embeddings),
            hypotheses: records,
            degraded_sources: degraded,
            literature_error,
            warnings,
        };
        info!(run_id, hypotheses = report.hypotheses.len(), "run complete");
        observer.stage(Stage::Done);
        Ok(RunOutput {
            report,
            graph_summary: summary,
        })
    }

    fn record(&self, r: crate::ranking::RankedHypothesis) -> ReportRecord {
        let ScoredHypothesis {
            hypothesis: h,
            validation: v,
            breakdown,
        } = r.scored;
        let supporting: BTreeSet<String> = h
            .supporting_pmids
            .iter()
            .chain(&v.literature_hits)
            .cloned()
            .collect();
        ReportRecord {
            rank: r.rank,
            synergy: self.synergy.lookup(&h.drug_a, &h.drug_b).map(|s| SynergySummary {
                max_synergy: s.max_synergy,
                min_synergy: s.min_synergy,
                n_observations: s.n_observations,
            }),
            drug_a: h.drug_a,
            drug_b: h.drug_b,
            composite_score: breakdown.composite,
            verdict: v.verdict,
            rationale_type: h.rationale_type,
            mechanism: h.mechanism,
            supporting_pmids: supporting.into_iter().collect(),
            evidence_status: v.evidence_status,
            safety_score: v.safety_score,
            toxicity_risk: v.toxicity_risk,
            score_breakdown: breakdown,
            supporting_node_ids: h.supporting_node_ids,
            validation: ValidationRecord {
                novelty_exact: v.novelty_exact,
                novelty_in_context: v.novelty_in_context,
                evidence_level: v.evidence_level,
                literature_hits: v.literature_hits,
                exact_hits: v.exact_hits,
                context_hits: v.context_hits,
                graph_pmids: h.supporting_pmids,
                rationale: v.rationale,
                failure: v.failure,
            },
        }
    }
}

// Run ids only need to be unique within a process; the service supplies its own.
fn uuid_like(config: &RunConfig) -> String {
    use std::sync::atomic::{AtomicU64, Ordering};
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    let n = COUNTER.fetch_add(1, Ordering::Relaxed);
    format!("run-{}-{}-{n}", Utc::now().format("%Y%m%dT%H%M%S"), config.seed)
}
