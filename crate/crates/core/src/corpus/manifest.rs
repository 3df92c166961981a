//! Corpus manifests: a JSON array describing each dataset and where its rows live.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    ingest_csv, read_csv, CorpusError, DatasetTable, Granularity, IngestConfig, MetaOverrides,
    Source,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub portal: Option<String>,
    #[serde(default)]
    pub tags: BTreeSet<String>,
    /// Individual when omitted.
    #[serde(default)]
    pub granularity: Option<Granularity>,
    /// Local CSV file, relative to the manifest's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// URL that serves the dataset as CSV.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub permalink: Option<String>,
}

impl ManifestEntry {
    fn overrides(&self, source: Source) -> MetaOverrides {
        MetaOverrides {
            id: Some(self.id.clone()),
            name: self.name.clone(),
            portal: self.portal.clone(),
            tags: Some(self.tags.clone()),
            granularity: self.granularity,
            source: Some(source),
        }
    }
}

pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>, CorpusError> {
    let text = std::fs::read_to_string(path)?;
    let entries: Vec<ManifestEntry> = serde_json::from_str(&text)?;
    for e in &entries {
        if e.path.is_some() == e.permalink.is_some() {
            return Err(CorpusError::BadManifestEntry(e.id.clone()));
        }
    }
    Ok(entries)
}

/// Load every dataset named by the manifest. Files are ingested in parallel;
/// the result keeps manifest order.
pub fn ingest_manifest(
    manifest: &Path,
    cfg: &IngestConfig,
) -> Result<Vec<DatasetTable>, CorpusError> {
    let base = manifest.parent().unwrap_or_else(|| Path::new("."));
    let entries = load_manifest(manifest)?;
    entries
        .par_iter()
        .map(|e| match (&e.path, &e.permalink) {
            (Some(rel), None) => {
                let full = base.join(rel);
                ingest_csv(&full, e.overrides(Source::LocalFile(full.clone())), cfg)
            }
            (None, Some(url)) => {
                let body = super::catalog::http_get(url)?;
                read_csv(
                    body.as_bytes(),
                    e.overrides(Source::Remote(url.clone())),
                    cfg,
                )
            }
            _ => Err(CorpusError::BadManifestEntry(e.id.clone())),
        })
        .collect()
}
