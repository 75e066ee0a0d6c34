use std::path::PathBuf;
use std::sync::Arc;

use codhy_core::ingestion::{AdapterRegistry, EutilsClient, EutilsConfig};
use codhy_core::agents::ProviderRegistry;
use codhy_core::kg::cache::GraphCache;
use codhy_core::pipeline::{Engine, PipelineError};
use codhy_core::ranking::SynergyTable;

pub const FIXTURE_DIR_ENV: &str = "CODHY_FIXTURE_DIR";
pub const CACHE_DIR_ENV: &str = "CODHY_CACHE_DIR";

/// Where the engine gets its data from.
#[derive(Debug, Clone, Default)]
pub struct EngineOptions {
    /// Offline mode: adapters, literature and synergy are read from this directory.
    pub fixture_dir: Option<PathBuf>,
    /// Graph and embedding cache on disk; in memory when unset.
    pub cache_dir: Option<PathBuf>,
}

impl EngineOptions {
    pub fn from_env() -> Self {
        let path = |k: &str| std::env::var_os(k).filter(|v| !v.is_empty()).map(PathBuf::from);
        Self {
            fixture_dir: path(FIXTURE_DIR_ENV),
            cache_dir: path(CACHE_DIR_ENV),
        }
    }

    pub fn build(&self) -> Result<Engine, PipelineError> {
        let setup = |e: &dyn std::fmt::Display| PipelineError::Setup(e.to_string());
        let mut engine = match &self.fixture_dir {
            Some(dir) => {
                if !dir.is_dir() {
                    return Err(PipelineError::Setup(format!("fixture directory {} not found", dir.display())));
                }
                Engine::from_fixture_dir(dir)?
            }
            None => {
                let lit = EutilsClient::new(EutilsConfig::from_env()).map_err(|e| setup(&e))?;
                // no live curated adapters ship; every roster id reports itself unavailable
                Engine::new(
                    AdapterRegistry::with_fixture_dir(std::path::Path::new("")),
                    Arc::new(lit),
                    ProviderRegistry::from_env(),
                )
            }
        };
        if std::env::var_os(codhy_core::ranking::SYNERGY_ENV).is_some() {
            engine = engine.with_synergy(SynergyTable::from_env().map_err(|e| setup(&e))?);
        }
        if let Some(dir) = &self.cache_dir {
            engine = engine.with_cache(Arc::new(GraphCache::with_dir(dir).map_err(|e| setup(&e))?));
        }
        Ok(engine)
    }
}
