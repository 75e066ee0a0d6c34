//! HTTP API and command line for the hypothesis engine.
//!
//! [`manager::RunManager`] owns run lifecycle: submissions are validated,
//! queued on a bounded channel and executed by a fixed pool of worker
//! threads, so request handlers never wait on pipeline work.

pub mod api;
pub mod cli;
pub mod manager;
pub mod setup;

pub use api::{app, router, AppState};
pub use manager::{LookupError, ManagerConfig, RunManager, RunStatus, SubmitError};
pub use setup::EngineOptions;
