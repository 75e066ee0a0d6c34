//! Configuration-keyed cache of built graphs (and their embeddings).
//!
//! Entries live in memory and, when a directory is configured, as
//! content-addressed snapshot files named after the key digest. Lookups are
//! safe from many threads; when two runs build the same key concurrently the
//! first insert wins and the later result is discarded.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tracing::warn;

use super::{normalize_name, snapshot, KnowledgeGraph};
use crate::embedding::EmbeddingTable;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GraphCacheKey {
    pub biomarker: String,
    pub cancer_type: String,
    pub n_abstracts: usize,
    pub source_set: Vec<String>,
    pub extraction_version: String,
}

impl GraphCacheKey {
    /// Builds a key in canonical form: names normalized, sources sorted and unique.
    pub fn new<I, S>(
        biomarker: &str,
        cancer_type: &str,
        n_abstracts: usize,
        sources: I,
        extraction_version: &str,
    ) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut source_set: Vec<String> = sources
            .into_iter()
            .map(|s| s.as_ref().trim().to_string())
            .collect();
        source_set.sort();
        source_set.dedup();
        Self {
            biomarker: normalize_name(biomarker),
            cancer_type: normalize_name(cancer_type),
            n_abstracts,
            source_set,
            extraction_version: extraction_version.to_string(),
        }
    }

    pub fn canonical_json(&self) -> String {
        let canon = GraphCacheKey::new(
            &self.biomarker,
            &self.cancer_type,
            self.n_abstracts,
            &self.source_set,
            &self.extraction_version,
        );
        serde_json::to_string(&canon).expect("key serializes")
    }

    pub fn digest(&self) -> String {
        hex::encode(&Sha256::digest(self.canonical_json().as_bytes())[..16])
    }
}

#[derive(Debug, Default)]
pub struct GraphCache {
    dir: Option<PathBuf>,
    graphs: RwLock<HashMap<String, Arc<KnowledgeGraph>>>,
    embeddings: RwLock<HashMap<String, Arc<EmbeddingTable>>>,
}

impl GraphCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn with_dir(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir: Some(dir),
            ..Self::default()
        })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    fn graph_path(&self, key: &GraphCacheKey) -> Option<PathBuf> {
        self.dir
            .as_ref()
            .map(|d| d.join(format!("{}.graph.jsonl", key.digest())))
    }

    fn embedding_path(&self, key: &GraphCacheKey) -> Option<PathBuf> {
        self.dir
            .as_ref()
            .map(|d| d.join(format!("{}.emb", key.digest())))
    }

    pub fn get(&self, key: &GraphCacheKey) -> Option<Arc<KnowledgeGraph>> {
        let digest = key.digest();
        if let Some(g) = self.graphs.read().unwrap().get(&digest) {
            return Some(Arc::clone(g));
        }
        let path = self.graph_path(key)?;
        let bytes = fs::read(&path).ok()?;
        match snapshot::decode(&bytes) {
            Ok((stored, graph)) if &stored == key => {
                let mut map = self.graphs.write().unwrap();
                Some(Arc::clone(map.entry(digest).or_insert_with(|| Arc::new(graph))))
            }
            Ok(_) => {
                warn!(path = %path.display(), "snapshot key mismatch, ignoring");
                None
            }
            Err(e) => {
                warn!(path = %path.display(), error = %e, "unreadable snapshot, ignoring");
                None
            }
        }
    }

    /// Stores `graph` unless the key is already present; returns whichever graph is cached.
    pub fn insert(&self, key: &GraphCacheKey, graph: KnowledgeGraph) -> Arc<KnowledgeGraph> {
        let digest = key.digest();
        let mut map = self.graphs.write().unwrap();
        if let Some(existing) = map.get(&digest) {
            return Arc::clone(existing);
        }
        if let Some(path) = self.graph_path(key) {
            if let Err(e) = write_atomic(&path, &snapshot::encode(&graph, key)) {
                warn!(path = %path.display(), error = %e, "could not persist snapshot");
            }
        }
        let graph = Arc::new(graph);
        map.insert(digest, Arc::clone(&graph));
        graph
    }

    /// Returns the cached graph without calling `builder`, or builds and caches it.
    /// A failed build is never cached.
    pub fn get_or_build<E>(
        &self,
        key: &GraphCacheKey,
        builder: impl FnOnce() -> Result<KnowledgeGraph, E>,
    ) -> Result<(Arc<KnowledgeGraph>, bool), E> {
        if let Some(g) = self.get(key) {
            return Ok((g, true));
        }
        let built = builder()?;
        Ok((self.insert(key, built), false))
    }

    /// Embeddings for `key`, if stored with the given training fingerprint.
    pub fn get_embeddings(&self, key: &GraphCacheKey, fingerprint: &str) -> Option<Arc<EmbeddingTable>> {
        let digest = key.digest();
        if let Some(t) = self.embeddings.read().unwrap().get(&digest) {
            if t.fingerprint() == fingerprint {
                return Some(Arc::clone(t));
            }
        }
        let path = self.embedding_path(key)?;
        let bytes = fs::read(path).ok()?;
        let table = EmbeddingTable::decode(&bytes).ok()?;
        if table.fingerprint() != fingerprint {
            return None;
        }
        let table = Arc::new(table);
        self.embeddings
            .write()
            .unwrap()
            .insert(digest, Arc::clone(&table));
        Some(table)
    }

    pub fn insert_embeddings(&self, key: &GraphCacheKey, table: EmbeddingTable) -> Arc<EmbeddingTable> {
        let digest = key.digest();
        let mut map = self.embeddings.write().unwrap();
        if let Some(existing) = map.get(&digest) {
            if existing.fingerprint() == table.fingerprint() {
                return Arc::clone(existing);
            }
        }
        if let Some(path) = self.embedding_path(key) {
            if let Err(e) = write_atomic(&path, &table.encode()) {
                warn!(path = %path.display(), error = %e, "could not persist embeddings");
            }
        }
        let table = Arc::new(table);
        map.insert(digest, Arc::clone(&table));
        table
    }

    /// Drops the graph and embeddings stored for `key`. Returns whether anything was removed.
    pub fn invalidate(&self, key: &GraphCacheKey) -> bool {
        let digest = key.digest();
        let mut removed = self.graphs.write().unwrap().remove(&digest).is_some();
        self.embeddings.write().unwrap().remove(&digest);
        for path in [self.graph_path(key), self.embedding_path(key)].into_iter().flatten() {
            removed |= fs::remove_file(path).is_ok();
        }
        removed
    }

    /// Removes every entry; returns the number of files deleted from the cache directory.
    pub fn clear(&self) -> std::io::Result<usize> {
        self.graphs.write().unwrap().clear();
        self.embeddings.write().unwrap().clear();
        let mut n = 0;
        if let Some(dir) = &self.dir {
            for entry in fs::read_dir(dir)? {
                let path = entry?.path();
                let name = path.file_name().and_then(|s| s.to_str()).unwrap_or("");
                if name.ends_with(".graph.jsonl") || name.ends_with(".emb") {
                    fs::remove_file(&path)?;
                    n += 1;
                }
            }
        }
        Ok(n)
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
