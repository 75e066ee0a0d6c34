//! Background run execution with a bounded queue.

use std::collections::HashMap;
use std::sync::mpsc::{sync_channel, Receiver, SyncSender, TrySendError};
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::Duration;

use chrono::{DateTime, Utc};
use codhy_core::ingestion::{FieldError, RunConfig};
use codhy_core::pipeline::{Engine, GraphSummary, PipelineError, RunObserver, RunReport, Stage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStatus {
    pub run_id: String,
    pub stage: Stage,
    pub progress: f64,
    pub submitted_at: DateTime<Utc>,
    pub started_at: Option<DateTime<Utc>>,
    pub finished_at: Option<DateTime<Utc>>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SubmitError {
    #[error("invalid run configuration")]
    Invalid(Vec<FieldError>),
    #[error("run queue is full")]
    QueueFull { retry_after: Duration },
    #[error("run manager is shut down")]
    Closed,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LookupError {
    #[error("no run with id '{0}'")]
    NotFound(String),
    #[error("run is {stage:?}; {what} is not available yet")]
    NotReady { stage: Stage, what: &'static str },
    #[error("run has no {0}")]
    Absent(&'static str),
}

#[derive(Debug, Clone, Copy)]
pub struct ManagerConfig {
    /// Runs executing at once.
    pub workers: usize,
    /// Runs allowed to wait for a worker.
    pub queue_capacity: usize,
    /// Advertised to callers turned away by a full queue.
    pub retry_after: Duration,
}

impl Default for ManagerConfig {
    fn default() -> Self {
        Self {
            workers: 2,
            queue_capacity: 16,
            retry_after: Duration::from_secs(5),
        }
    }
}

struct Entry {
    status: RunStatus,
    config: RunConfig,
    report: Option<RunReport>,
    graph: Option<GraphSummary>,
}

#[derive(Default)]
struct Shared {
    runs: Mutex<HashMap<String, Entry>>,
    changed: Condvar,
}

impl Shared {
    fn update(&self, id: &str, f: impl FnOnce(&mut Entry)) {
        let mut runs = self.runs.lock().unwrap();
        if let Some(e) = runs.get_mut(id) {
            f(e);
        }
        drop(runs);
        self.changed.notify_all();
    }
}

/// Moves a status forward; earlier or repeated stages are ignored.
fn advance(status: &mut RunStatus, stage: Stage) {
    if status.stage.is_terminal() || stage <= status.stage {
        return;
    }
    status.stage = stage;
    status.progress = stage.progress();
}

struct Tracker<'a> {
    shared: &'a Shared,
    id: &'a str,
}

impl RunObserver for Tracker<'_> {
    fn stage(&mut self, stage: Stage) {
        // Done is published together with the report
        if stage != Stage::Done {
            self.shared.update(self.id, |e| advance(&mut e.status, stage));
        }
    }

    fn graph_ready(&mut self, summary: &GraphSummary) {
        let summary = summary.clone();
        self.shared.update(self.id, |e| e.graph = Some(summary));
    }
}

/// Accepts runs without blocking and executes them on worker threads.
pub struct RunManager {
    engine: Arc<Engine>,
    shared: Arc<Shared>,
    queue: SyncSender<String>,
    config: ManagerConfig,
}

impl RunManager {
    pub fn new(engine: Arc<Engine>, config: ManagerConfig) -> Self {
        let (tx, rx) = sync_channel::<String>(config.queue_capacity);
        let rx = Arc::new(Mutex::new(rx));
        let shared = Arc::new(Shared::default());
        for i in 0..config.workers.max(1) {
            let (engine, shared, rx) = (engine.clone(), shared.clone(), rx.clone());
            thread::Builder::new()
                .name(format!("codhy-worker-{i}"))
                .spawn(move || worker(&engine, &shared, &rx))
                .expect("spawn worker");
        }
        Self {
            engine,
            shared,
            queue: tx,
            config,
        }
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    /// Validates and enqueues a run, returning its id.
    pub fn submit(&self, config: RunConfig) -> Result<String, SubmitError> {
        match self.engine.validate(&config) {
            Ok(()) => {}
            Err(PipelineError::Validation(errs)) => return Err(SubmitError::Invalid(errs)),
            Err(e) => {
                return Err(SubmitError::Invalid(vec![FieldError {
                    field: "config".into(),
                    message: e.to_string(),
                }]))
            }
        }
        let id = uuid::Uuid::new_v4().to_string();
        let status = RunStatus {
            run_id: id.clone(),
            stage: Stage::Queued,
            progress: Stage::Queued.progress(),
            submitted_at: Utc::now(),
            started_at: None,
            finished_at: None,
            error: None,
        };
        // registered before sending so a fast worker always finds the entry
        self.shared.runs.lock().unwrap().insert(
            id.clone(),
            Entry {
                status,
                config,
                report: None,
                graph: None,
            },
        );
        match self.queue.try_send(id.clone()) {
            Ok(()) => Ok(id),
            Err(err) => {
                self.shared.runs.lock().unwrap().remove(&id);
                Err(match err {
                    TrySendError::Full(_) => SubmitError::QueueFull {
                        retry_after: self.config.retry_after,
                    },
                    TrySendError::Disconnected(_) => SubmitError::Closed,
                })
            }
        }
    }

    pub fn status(&self, id: &str) -> Result<RunStatus, LookupError> {
        let runs = self.shared.runs.lock().unwrap();
        runs.get(id)
            .map(|e| e.status.clone())
            .ok_or_else(|| LookupError::NotFound(id.to_string()))
    }

    pub fn config(&self, id: &str) -> Result<RunConfig, LookupError> {
        let runs = self.shared.runs.lock().unwrap();
        runs.get(id)
            .map(|e| e.config.clone())
            .ok_or_else(|| LookupError::NotFound(id.to_string()))
    }

    /// The final report; only for runs that reached `Done`.
    pub fn report(&self, id: &str) -> Result<RunReport, LookupError> {
        let runs = self.shared.runs.lock().unwrap();
        let e = runs.get(id).ok_or_else(|| LookupError::NotFound(id.to_string()))?;
        match (&e.report, e.status.stage) {
            (Some(r), Stage::Done) => Ok(r.clone()),
            (_, stage) => Err(LookupError::NotReady { stage, what: "report" }),
        }
    }

    /// The graph summary, available once ingestion has finished.
    pub fn graph(&self, id: &str) -> Result<GraphSummary, LookupError> {
        let runs = self.shared.runs.lock().unwrap();
        let e = runs.get(id).ok_or_else(|| LookupError::NotFound(id.to_string()))?;
        match (&e.graph, e.status.stage) {
            (Some(g), _) => Ok(g.clone()),
            (None, stage) if stage.is_terminal() => Err(LookupError::Absent("knowledge graph")),
            (None, stage) => Err(LookupError::NotReady {
                stage,
                what: "graph summary",
            }),
        }
    }

    /// Blocks until the run is terminal or `timeout` passes; returns the last status seen.
    pub fn wait(&self, id: &str, timeout: Duration) -> Result<RunStatus, LookupError> {
        let deadline = std::time::Instant::now() + timeout;
        let mut runs = self.shared.runs.lock().unwrap();
        loop {
            let status = runs
                .get(id)
                .map(|e| e.status.clone())
                .ok_or_else(|| LookupError::NotFound(id.to_string()))?;
            let now = std::time::Instant::now();
            if status.stage.is_terminal() || now >= deadline {
                return Ok(status);
            }
            runs = self.shared.changed.wait_timeout(runs, deadline - now).unwrap().0;
        }
    }
}

fn worker(engine: &Engine, shared: &Shared, rx: &Mutex<Receiver<String>>) {
    loop {
        let next = rx.lock().unwrap().recv();
        let Ok(id) = next else { return };
        let Some(config) = shared.runs.lock().unwrap().get(&id).map(|e| e.config.clone()) else {
            continue;
        };
        shared.update(&id, |e| e.status.started_at = Some(Utc::now()));
        tracing::info!(run_id = %id, biomarker = %config.biomarker, cancer = %config.cancer_type, "run started");
        let mut tracker = Tracker { shared, id: &id };
        let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
            engine.run_with_id(&id, &config, &mut tracker)
        }));
        shared.update(&id, |e| {
            e.status.finished_at = Some(Utc::now());
            match result {
                Ok(Ok(out)) => {
                    if e.graph.is_none() {
                        e.graph = out.graph_summary;
                    }
                    e.report = Some(out.report);
                    advance(&mut e.status, Stage::Done);
                }
                Ok(Err(err)) => {
                    tracing::warn!(run_id = %id, error = %err, "run failed");
                    e.status.error = Some(err.to_string());
                    advance(&mut e.status, Stage::Failed);
                }
                Err(_) => {
                    e.status.error = Some("internal error: run panicked".into());
                    advance(&mut e.status, Stage::Failed);
                }
            }
        });
    }
}
