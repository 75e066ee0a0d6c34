use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::{normalize_name, EntityType};

/// Curated databases the engine knows by id. Only ids with fixture data (or a
/// registered custom adapter) return triples; the rest report themselves unavailable.
pub const ROSTER: &[(&str, &str)] = &[
    ("drug_targets", "Drug-target interactions (fixture-backed)"),
    ("pathways", "Gene and drug pathway membership (fixture-backed)"),
    ("reactome", "Reactome: curated pathways and reactions"),
    ("civic", "CIViC: clinical interpretation of cancer variants"),
    ("tcga_gdc", "TCGA-GDC: cancer genomic and clinical data"),
    ("clinicaltrials_gov", "ClinicalTrials.gov: clinical study registry"),
    ("mygene_info", "mygene.info: gene annotation"),
    ("chembl", "ChEMBL: bioactivity of drug-like molecules"),
    ("string", "STRING: protein-protein interaction networks"),
    ("synlethdb", "SynLethDB: synthetic lethal gene pairs"),
    ("depmap", "DepMap: cancer cell dependencies"),
    ("sider", "SIDER: adverse drug reactions and indications"),
    ("drugbank", "DrugBank: drugs and their targets"),
    ("drugcentral", "DrugCentral: approved drugs and indications"),
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdapterError {
    #[error("source transport failure: {0}")]
    Transport(String),
    #[error("source record {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("source '{0}' has no backend configured")]
    NotConfigured(String),
}

fn default_confidence() -> f64 {
    1.0
}

/// One curated statement; `phrase` is a vocabulary label or free text to normalize.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CuratedTriple {
    pub subject: String,
    pub subject_type: EntityType,
    pub phrase: String,
    pub object: String,
    pub object_type: EntityType,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
}

pub trait SourceAdapter: Send + Sync {
    fn id(&self) -> &str;
    fn fetch(&self, biomarker: &str, cancer_type: &str) -> Result<Vec<CuratedTriple>, AdapterError>;
}

/// Reads a line-delimited triple file and returns the statements within two
/// hops of the biomarker or cancer type.
#[derive(Debug)]
pub struct FixtureAdapter {
    id: String,
    path: PathBuf,
    calls: AtomicUsize,
}

impl FixtureAdapter {
    pub fn new(id: &str, path: impl Into<PathBuf>) -> Self {
        Self {
            id: id.to_string(),
            path: path.into(),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn parse(text: &str) -> Result<Vec<CuratedTriple>, AdapterError> {
        let mut out = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let t: CuratedTriple = serde_json::from_str(line).map_err(|e| AdapterError::Parse {
                line: idx + 1,
                message: e.to_string(),
            })?;
            out.push(t);
        }
        Ok(out)
    }
}

/// Statements touching an entity within one hop of the seeds, so endpoints reach two hops.
pub fn two_hop_filter(triples: Vec<CuratedTriple>, seeds: &[&str]) -> Vec<CuratedTriple> {
    let mut adj: HashMap<String, BTreeSet<String>> = HashMap::new();
    for t in &triples {
        let (s, o) = (normalize_name(&t.subject), normalize_name(&t.object));
        adj.entry(s.clone()).or_default().insert(o.clone());
        adj.entry(o).or_default().insert(s);
    }
    let mut near: BTreeSet<String> = seeds.iter().map(|s| normalize_name(s)).collect();
    let first: Vec<String> = near.iter().cloned().collect();
    for s in first {
        if let Some(ns) = adj.get(&s) {
            near.extend(ns.iter().cloned());
        }
    }
    triples
        .into_iter()
        .filter(|t| near.contains(&normalize_name(&t.subject)) || near.contains(&normalize_name(&t.object)))
        .collect()
}

impl SourceAdapter for FixtureAdapter {
    fn id(&self) -> &str {
        &self.id
    }

    fn fetch(&self, biomarker: &str, cancer_type: &str) -> Result<Vec<CuratedTriple>, AdapterError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let text = std::fs::read_to_string(&self.path)
            .map_err(|e| AdapterError::Transport(format!("{}: {e}", self.path.display())))?;
        let triples = Self::parse(&text)?;
        Ok(two_hop_filter(triples, &[biomarker, cancer_type]))
    }
}

/// Roster entry without a configured backend; every fetch fails.
#[derive(Debug)]
pub struct UnavailableAdapter {
    id: String,
}

impl UnavailableAdapter {
    pub fn new(id: &str) -> Self {
        Self { id: id.to_string() }
    }
}

impl SourceAdapter for UnavailableAdapter {
    fn id(&self) -> &str {
        &self.id
    }

    fn fetch(&self, _: &str, _: &str) -> Result<Vec<CuratedTriple>, AdapterError> {
        Err(AdapterError::NotConfigured(self.id.clone()))
    }
}

/// Adapter lookup by id.
#[derive(Clone, Default)]
pub struct AdapterRegistry {
    adapters: BTreeMap<String, Arc<dyn SourceAdapter>>,
}

impl AdapterRegistry {
    pub const DEFAULT_SOURCES: [&'static str; 2] = ["drug_targets", "pathways"];

    /// Every roster id, fixture-backed when `{dir}/adapters/{id}.jsonl` exists.
    pub fn with_fixture_dir(dir: &Path) -> Self {
        let mut reg = Self::default();
        for (id, _) in ROSTER {
            let file = dir.join("adapters").join(format!("{id}.jsonl"));
            if file.is_file() {
                reg.register(Arc::new(FixtureAdapter::new(id, file)));
            } else {
                reg.register(Arc::new(UnavailableAdapter::new(id)));
            }
        }
        reg
    }

    /// Adds or replaces an adapter under its own id.
    pub fn register(&mut self, adapter: Arc<dyn SourceAdapter>) {
        self.adapters.insert(adapter.id().to_string(), adapter);
    }

    pub fn ids(&self) -> Vec<String> {
        self.adapters.keys().cloned().collect()
    }

    pub fn get(&self, id: &str) -> Option<Arc<dyn SourceAdapter>> {
        self.adapters.get(id).cloned()
    }

    /// Adapters for `ids` in sorted id order; unknown ids are returned as the error.
    pub fn resolve(&self, ids: &[String]) -> Result<Vec<Arc<dyn SourceAdapter>>, Vec<String>> {
        let wanted: BTreeSet<&String> = ids.iter().collect();
        let unknown: Vec<String> = wanted
            .iter()
            .filter(|id| !self.adapters.contains_key(id.as_str()))
            .map(|s| s.to_string())
            .collect();
        if !unknown.is_empty() {
            return Err(unknown);
        }
        Ok(wanted.into_iter().map(|id| self.adapters[id].clone()).collect())
    }
}
