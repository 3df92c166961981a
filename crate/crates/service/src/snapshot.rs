//! Corpus snapshots and the on-disk artifact cache.
//!
//! Artifacts are keyed by a SHA-256 over the snapshot id, the dictionary
//! contents and the request configuration, so a result is reused exactly
//! when every input is unchanged.

use std::path::{Path, PathBuf};

use linkrisk_core::corpus::{DatasetMeta, DatasetTable};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("duplicate dataset id {0:?}")]
    DuplicateId(String),
}

/// Hex SHA-256 of a value's JSON encoding.
pub fn content_hash<T: Serialize + ?Sized>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("artifact inputs serialize");
    hex::encode(Sha256::digest(&bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub tables: Vec<DatasetTable>,
}

impl Snapshot {
    pub fn new(tables: Vec<DatasetTable>) -> Result<Self, SnapshotError> {
        let mut seen = std::collections::HashSet::new();
        for t in &tables {
            if !seen.insert(t.id()) {
                return Err(SnapshotError::DuplicateId(t.id().to_string()));
            }
        }
        Ok(Self { tables })
    }

    pub fn id(&self) -> String {
        content_hash(&self.tables)
    }

    pub fn metas(&self) -> Vec<DatasetMeta> {
        self.tables.iter().map(|t| t.meta.clone()).collect()
    }

    pub fn table(&self, id: &str) -> Option<&DatasetTable> {
        self.tables.iter().find(|t| t.id() == id)
    }

    pub fn save(&self, path: &Path) -> Result<(), SnapshotError> {
        write_atomic(path, &serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, SnapshotError> {
        let bytes = std::fs::read(path)?;
        let snap: Snapshot = serde_json::from_slice(&bytes)?;
        Self::new(snap.tables)
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(tmp, path)
}

#[derive(Debug, Clone)]
pub struct ArtifactCache {
    dir: PathBuf,
}

impl ArtifactCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    fn path(&self, kind: &str, key: &str) -> PathBuf {
        self.dir.join(kind).join(format!("{key}.json"))
    }

    /// A missing or unreadable entry is a miss.
    pub fn get<T: DeserializeOwned>(&self, kind: &str, key: &str) -> Option<T> {
        let bytes = std::fs::read(self.path(kind, key)).ok()?;
        serde_json::from_slice(&bytes).ok()
    }

    pub fn put<T: Serialize>(&self, kind: &str, key: &str, value: &T) -> Result<(), SnapshotError> {
        write_atomic(&self.path(kind, key), &serde_json::to_vec(value)?)?;
        Ok(())
    }
}
