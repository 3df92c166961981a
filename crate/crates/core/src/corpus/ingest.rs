//! CSV ingestion with column-kind inference.

use std::collections::{BTreeSet, HashSet};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    normalize_attribute, Cell, Column, ColumnKind, CorpusError, DatasetMeta, DatasetTable,
    Granularity, Source,
};

pub const DEFAULT_RECORD_CAP: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestConfig {
    pub record_cap: usize,
    /// Keep the first `record_cap` rows instead of failing.
    pub truncate: bool,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            record_cap: DEFAULT_RECORD_CAP,
            truncate: false,
        }
    }
}

/// Metadata supplied alongside a file; unset fields fall back to defaults
/// derived from the path.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetaOverrides {
    pub id: Option<String>,
    pub name: Option<String>,
    pub portal: Option<String>,
    pub tags: Option<BTreeSet<String>>,
    pub granularity: Option<Granularity>,
    pub source: Option<Source>,
}

pub fn ingest_csv(
    path: &Path,
    overrides: MetaOverrides,
    cfg: &IngestConfig,
) -> Result<DatasetTable, CorpusError> {
    let file = std::fs::File::open(path)?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    let overrides = MetaOverrides {
        id: overrides.id.or(Some(stem)),
        source: overrides
            .source
            .or_else(|| Some(Source::LocalFile(path.to_path_buf()))),
        ..overrides
    };
    read_csv(file, overrides, cfg)
}

/// Parse CSV bytes from any reader. The first record is the header.
pub fn read_csv<R: Read>(
    reader: R,
    overrides: MetaOverrides,
    cfg: &IngestConfig,
) -> Result<DatasetTable, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);

    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| CorpusError::Parse(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() {
        return Err(CorpusError::EmptyTable);
    }

    let mut names = Vec::with_capacity(header.len());
    let mut seen = HashSet::new();
    for raw in &header {
        let normalized = normalize_attribute(raw)?;
        if !seen.insert(normalized.clone()) {
            return Err(CorpusError::DuplicateAttribute {
                raw: raw.clone(),
                normalized,
            });
        }
        names.push(normalized);
    }

    let mut raw_columns: Vec<Vec<String>> = vec![Vec::new(); header.len()];
    let mut rows = 0usize;
    let mut truncated = false;
    for record in rdr.records() {
        let record = record.map_err(|e| CorpusError::Parse(e.to_string()))?;
        if rows == cfg.record_cap {
            if cfg.truncate {
                truncated = true;
                break;
            }
            return Err(CorpusError::CapExceeded {
                rows: rows + 1 + rdr.records().count(),
                cap: cfg.record_cap,
            });
        }
        for (col, field) in raw_columns.iter_mut().zip(record.iter()) {
            col.push(field.to_string());
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(CorpusError::EmptyTable);
    }

    let columns = names
        .into_iter()
        .zip(raw_columns)
        .map(|(name, raw)| build_column(name, raw))
        .collect();

    let id = overrides.id.unwrap_or_else(|| "dataset".to_string());
    let meta = DatasetMeta {
        name: overrides.name.unwrap_or_else(|| id.clone()),
        portal: overrides.portal.unwrap_or_else(|| "local".to_string()),
        tags: overrides
            .tags
            .unwrap_or_default()
            .into_iter()
            .map(|t| t.to_lowercase())
            .collect(),
        granularity: overrides.granularity.unwrap_or(Granularity::Individual),
        attribute_names: header,
        row_count: rows,
        source: overrides
            .source
            .unwrap_or_else(|| Source::Remote(String::new())),
        truncated,
        id,
    };
    Ok(DatasetTable { meta, columns })
}

pub(crate) fn is_missing_token(raw: &str) -> bool {
    let t = raw.trim();
    t.is_empty()
        || t.eq_ignore_ascii_case("na")
        || t.eq_ignore_ascii_case("n/a")
        || t.eq_ignore_ascii_case("null")
}

pub(crate) fn parse_finite(raw: &str) -> Option<f64> {
    raw.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// A column is numeric when at least 90% of its non-missing cells parse as
/// finite numbers. Unparseable cells in a numeric column stay as text.
pub(crate) fn infer_kind(raw: &[String]) -> ColumnKind {
    let mut present = 0usize;
    let mut numeric = 0usize;
    for v in raw.iter().filter(|v| !is_missing_token(v)) {
        present += 1;
        if parse_finite(v).is_some() {
            numeric += 1;
        }
    }
    if present > 0 && numeric * 10 >= present * 9 {
        ColumnKind::Numeric
    } else {
        ColumnKind::Categorical
    }
}

fn build_column(name: String, raw: Vec<String>) -> Column {
    let kind = infer_kind(&raw);
    let values = raw
        .into_iter()
        .map(|v| {
            if is_missing_token(&v) {
                Cell::Missing
            } else if kind == ColumnKind::Numeric {
                match parse_finite(&v) {
                    Some(n) => Cell::Number(n),
                    None => Cell::Text(v),
                }
            } else {
                Cell::Text(v)
            }
        })
        .collect();
    Column { name, kind, values }
}
