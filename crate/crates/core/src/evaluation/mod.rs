//! Metrics, the scenario harness and run-log replay.

mod metrics;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use num_rational::BigRational;
use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::warn;

pub use metrics::{
    dcg_at_k, diversity, evidence_coverage, labels, mrr, ndcg_at_k, novelty_rates, proceed_at_k, proceed_in_top,
    reciprocal_rank, to_f64, HypothesisOutcome, RankedRun,
};

use crate::ingestion::{RunConfig, Variant};
use crate::pipeline::{Engine, RunReport};

const SCENARIOS: &str = include_str!("../../assets/scenarios.tsv");
pub const LOG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("run has no hypotheses")]
    EmptyRun,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("scenario file line {line}: {message}")]
    Scenario { line: usize, message: String },
    #[error("run log {path}: {message}")]
    Log { path: PathBuf, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EvalError + '_ {
    move |source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Scenario {
    pub biomarker: String,
    pub cancer_type: String,
}

/// `biomarker<TAB>cancer_type` per line; `#` comments and blank lines are skipped.
pub fn parse_scenarios(text: &str) -> Result<Vec<Scenario>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let bad = |message: &str| EvalError::Scenario {
            line: i + 1,
            message: message.to_string(),
        };
        let (b, c) = line.split_once('\t').ok_or_else(|| bad("expected biomarker<TAB>cancer_type"))?;
        if c.contains('\t') {
            return Err(bad("more than two fields"));
        }
        let (b, c) = (b.trim(), c.trim());
        if b.is_empty() || c.is_empty() {
            return Err(bad("empty field"));
        }
        out.push(Scenario {
            biomarker: b.to_string(),
            cancer_type: c.to_string(),
        });
    }
    if out.is_empty() {
        return Err(EvalError::Scenario {
            line: 0,
            message: "no scenarios".into(),
        });
    }
    Ok(out)
}

pub fn load_scenarios(path: &Path) -> Result<Vec<Scenario>, EvalError> {
    parse_scenarios(&std::fs::read_to_string(path).map_err(io_err(path))?)
}

/// The seven frozen evaluation scenarios.
pub fn bundled_scenarios() -> Vec<Scenario> {
    parse_scenarios(SCENARIOS).expect("bundled scenario file parses")
}

pub fn bundled_scenarios_text() -> &'static str {
    SCENARIOS
}

/// Structured output of one (scenario, variant) execution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunLog {
    pub schema_version: u32,
    pub scenario: Scenario,
    pub variant: Variant,
    pub error: Option<String>,
    pub report: Option<RunReport>,
}

impl RunLog {
    pub fn completed(&self) -> bool {
        self.report.as_ref().is_some_and(|r| !r.hypotheses.is_empty())
    }

    pub fn file_name(&self, index: usize) -> String {
        let slug: String = format!("{}_{}", self.scenario.biomarker, self.scenario.cancer_type)
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
            .collect();
        format!("{index:02}_{slug}_{}.json", self.variant)
    }

    pub fn to_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("log serializes");
        out.push(b'\n');
        out
    }
}

/// Metrics for one variant, each averaged over completed scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsRow {
    pub variant: Variant,
    pub scenario_count: usize,
    pub completed: usize,
    pub complete: bool,
    pub novel_exact_rate: f64,
    pub novel_context_rate: f64,
    pub evidence_coverage: f64,
    pub proceed_at_1: f64,
    pub proceed_at_3: f64,
    pub diversity: f64,
    pub mrr: f64,
    pub ndcg_at_3: f64,
}

fn mean(values: &[BigRational]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let sum = values.iter().fold(BigRational::zero(), |a, b| a + b);
    to_f64(&(sum / num_bigint::BigInt::from(values.len())))
}

/// Averages per-scenario metrics over the runs that produced hypotheses.
pub fn metrics_for(variant: Variant, runs: &[Vec<HypothesisOutcome>], scenario_count: usize) -> MetricsRow {
    let done: Vec<&Vec<HypothesisOutcome>> = runs.iter().filter(|r| !r.is_empty()).collect();
    let mut exact = Vec::new();
    let mut context = Vec::new();
    let mut coverage = Vec::new();
    let mut div = Vec::new();
    let mut rankings = Vec::new();
    let mut ndcg = 0.0;
    for r in &done {
        let (e, c) = novelty_rates(r).expect("non-empty");
        exact.push(e);
        context.push(c);
        coverage.push(evidence_coverage(r).expect("non-empty"));
        div.push(diversity(r).expect("non-empty"));
        let l = labels(r);
        ndcg += ndcg_at_k(&l, 3);
        rankings.push(l);
    }
    let slices: Vec<&RankedRun> = done.iter().map(|r| r.as_slice()).collect();
    let p = |k| proceed_at_k(&slices, k).map_or(0.0, |r| to_f64(&r));
    MetricsRow {
        variant,
        scenario_count,
        completed: done.len(),
        complete: done.len() == scenario_count,
        novel_exact_rate: mean(&exact),
        novel_context_rate: mean(&context),
        evidence_coverage: mean(&coverage),
        proceed_at_1: p(1),
        proceed_at_3: p(3),
        diversity: mean(&div),
        mrr: mrr(&rankings).map_or(0.0, |r| to_f64(&r)),
        ndcg_at_3: if done.is_empty() { 0.0 } else { ndcg / done.len() as f64 },
    }
}

/// One row per variant present in `logs`, in variant order.
pub fn aggregate(logs: &[RunLog]) -> Vec<MetricsRow> {
    let mut by_variant: BTreeMap<Variant, Vec<&RunLog>> = BTreeMap::new();
    for l in logs {
        by_variant.entry(l.variant).or_default().push(l);
    }
    by_variant
        .into_iter()
        .map(|(v, ls)| {
            let runs: Vec<Vec<HypothesisOutcome>> = ls
                .iter()
                .map(|l| l.report.as_ref().map(RunReport::outcomes).unwrap_or_default())
                .collect();
            metrics_for(v, &runs, ls.len())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub logs: Vec<RunLog>,
    pub rows: Vec<MetricsRow>,
}

/// Every scenario under every variant, with `base` supplying the other fields.
/// Failures are logged and excluded from aggregation.
pub fn run_scenarios(engine: &Engine, scenarios: &[Scenario], variants: &[Variant], base: &RunConfig) -> Experiment {
    let jobs: Vec<(Scenario, Variant)> = variants
        .iter()
        .flat_map(|v| scenarios.iter().map(move |s| (s.clone(), *v)))
        .collect();
    let logs: Vec<RunLog> = jobs
        .into_par_iter()
        .map(|(scenario, variant)| {
            let config = RunConfig {
                biomarker: scenario.biomarker.clone(),
                cancer_type: scenario.cancer_type.clone(),
                variant,
                ..base.clone()
            };
            let id = format!("{}-{}-{}", scenario.biomarker, scenario.cancer_type, variant);
            match engine.run_with_id(&id, &config, &mut ()) {
                Ok(out) => RunLog {
                    schema_version: LOG_SCHEMA_VERSION,
                    scenario,
                    variant,
                    error: None,
                    report: Some(out.report),
                },
                Err(e) => {
                    warn!(%id, error = %e, "scenario failed");
                    RunLog {
                        schema_version: LOG_SCHEMA_VERSION,
                        scenario,
                        variant,
                        error: Some(e.to_string()),
                        report: None,
                    }
                }
            }
        })
        .collect();
    let rows = aggregate(&logs);
    Experiment { logs, rows }
}

/// Writes `{out}/runs/NN_*.json` and `{out}/metrics.json`.
pub fn write_experiment(exp: &Experiment, out: &Path) -> Result<(), EvalError> {
    let runs = out.join("runs");
    std::fs::create_dir_all(&runs).map_err(io_err(&runs))?;
    for (i, log) in exp.logs.iter().enumerate() {
        let path = runs.join(log.file_name(i + 1));
        std::fs::write(&path, log.to_json()).map_err(io_err(&path))?;
    }
    let path = out.join("metrics.json");
    let mut bytes = serde_json::to_vec_pretty(&exp.rows).expect("metrics serialize");
    bytes.push(b'\n');
    std::fs::write(&path, bytes).map_err(io_err(&path))?;
    Ok(())
}

/// Reads every `*.json` log in `dir` (or `dir/runs`), in file-name order.
pub fn read_logs(dir: &Path) -> Result<Vec<RunLog>, EvalError> {
    let dir = if dir.join("runs").is_dir() { dir.join("runs") } else { dir.to_path_buf() };
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
        .map_err(io_err(&dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut logs = Vec::with_capacity(paths.len());
    for p in paths {
        let bytes = std::fs::read(&p).map_err(io_err(&p))?;
        let log: RunLog = serde_json::from_slice(&bytes).map_err(|e| EvalError::Log {
            path: p.clone(),
            message: e.to_string(),
        })?;
        if log.schema_version != LOG_SCHEMA_VERSION {
            return Err(EvalError::Log {
                path: p,
                message: format!("unsupported log schema {}", log.schema_version),
            });
        }
        logs.push(log);
    }
    Ok(logs)
}

/// Metrics from stored logs alone; no pipeline stage is executed.
pub fn replay(dir: &Path) -> Result<Vec<MetricsRow>, EvalError> {
    Ok(aggregate(&read_logs(dir)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenarios_are_frozen() {
        let s = bundled_scenarios();
        assert_eq!(s.len(), 7);
        assert!(s.contains(&Scenario {
            biomarker: "EGFR".into(),
            cancer_type: "Lung Squamous Cell Carcinoma".into()
        }));
    }

    #[test]
    fn scenario_errors_name_the_line() {
        let err = parse_scenarios("# c\nEGFR\tLung\nKRAS\n").unwrap_err();
        assert!(matches!(err, EvalError::Scenario { line: 3, .. }));
    }
}
