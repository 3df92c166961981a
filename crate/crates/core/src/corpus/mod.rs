//! Dataset metadata, in-memory tables and corpus-level filtering.

mod catalog;
mod dictionary;
mod ingest;
mod manifest;
mod normalize;

use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use catalog::{
    fixture_name, CatalogClient, CatalogTransport, FixtureTransport, HttpTransport,
    PortalDescriptor, RecordingTransport, DEFAULT_CATALOG_URL,
};
pub use dictionary::PrivacyDictionary;
pub use ingest::{ingest_csv, read_csv, IngestConfig, MetaOverrides, DEFAULT_RECORD_CAP};
pub use manifest::{ingest_manifest, load_manifest, ManifestEntry};
pub use normalize::{normalize_attribute, normalize_value};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("attribute name {0:?} is empty after normalization")]
    InvalidAttributeName(String),
    #[error("attribute {normalized:?} appears more than once (raw {raw:?})")]
    DuplicateAttribute { raw: String, normalized: String },
    #[error("malformed CSV: {0}")]
    Parse(String),
    #[error("table has {rows} rows, more than the record cap of {cap}")]
    CapExceeded { rows: usize, cap: usize },
    #[error("table has no header or no data rows")]
    EmptyTable,
    #[error("manifest entry {0:?} needs exactly one of `path` or `permalink`")]
    BadManifestEntry(String),
    #[error("network error: {0}")]
    Network(String),
    #[error("malformed catalog response: {0}")]
    MalformedResponse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Granularity {
    #[serde(alias = "individual")]
    Individual,
    #[serde(alias = "aggregated")]
    Aggregated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Source {
    LocalFile(PathBuf),
    Remote(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub id: String,
    pub name: String,
    pub portal: String,
    pub tags: BTreeSet<String>,
    pub granularity: Granularity,
    /// Column names as they appeared in the source header.
    pub attribute_names: Vec<String>,
    pub row_count: usize,
    pub source: Source,
    /// Set when rows beyond the record cap were dropped on ingest.
    #[serde(default)]
    pub truncated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ColumnKind {
    Categorical,
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    Text(String),
    Number(f64),
    Missing,
}

impl Cell {
    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Cell::Number(v) => Some(*v),
            _ => None,
        }
    }

    /// Display form used for record details.
    pub fn render(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Number(v) => v.to_string(),
            Cell::Missing => String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    /// Normalized attribute name.
    pub name: String,
    pub kind: ColumnKind,
    pub values: Vec<Cell>,
}

impl Column {
    pub fn numbers(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().filter_map(Cell::as_number)
    }

    pub fn non_missing(&self) -> usize {
        self.values.iter().filter(|c| !c.is_missing()).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetTable {
    pub meta: DatasetMeta,
    pub columns: Vec<Column>,
}

impl DatasetTable {
    pub fn id(&self) -> &str {
        &self.meta.id
    }

    pub fn row_count(&self) -> usize {
        self.meta.row_count
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Normalized attribute names in column order.
    pub fn attributes(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }
}

/// Facet selection for [`filter_corpus`]. Empty facets place no constraint.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusFilter {
    #[serde(default)]
    pub tags: BTreeSet<String>,
    #[serde(default)]
    pub portals: BTreeSet<String>,
    #[serde(default)]
    pub granularity: Option<Granularity>,
}

impl CorpusFilter {
    pub fn matches(&self, meta: &DatasetMeta) -> bool {
        let tag_ok = self.tags.is_empty()
            || self
                .tags
                .iter()
                .any(|t| meta.tags.contains(&t.to_lowercase()));
        let portal_ok = self.portals.is_empty() || self.portals.contains(&meta.portal);
        let gran_ok = self.granularity.is_none_or(|g| g == meta.granularity);
        tag_ok && portal_ok && gran_ok
    }
}

/// Any-of within a facet, all-of across facets.
pub fn filter_corpus(corpus: &[DatasetMeta], filter: &CorpusFilter) -> Vec<DatasetMeta> {
    corpus
        .iter()
        .filter(|m| filter.matches(m))
        .cloned()
        .collect()
}
