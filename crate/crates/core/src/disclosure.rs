//! Joining a dataset pair and explaining what the join discloses.
//!
//! The join result feeds a parallel-sets view: one stacked bar per key
//! attribute and ribbons between consecutive attributes. Non-key attributes
//! that are strongly dependent on the key (by normalized mutual information)
//! are suggested as candidates for attribute disclosure.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::binning::{cell_label, numeric_bins, Bins};
use crate::corpus::{normalize_attribute, normalize_value, Cell, ColumnKind, DatasetTable};
use crate::pairrisk::entropy_of_counts;
use crate::CancelToken;

pub const MAX_SUGGESTIONS: usize = 5;
const MISSING_LABEL: &str = "(missing)";
const KEY_SEPARATOR: char = '\u{1f}';

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DisclosureError {
    #[error("join key is empty")]
    EmptyKey,
    #[error("key attribute {attribute:?} is missing from dataset {dataset:?}")]
    InvalidKey { attribute: String, dataset: String },
    #[error("need at least 2 matches, got {0}")]
    TooFewMatches(usize),
    #[error("columns have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("match {index} out of range ({count} matches)")]
    MatchOutOfRange { index: usize, count: usize },
    #[error("cancelled")]
    Cancelled,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JoinKey {
    attributes: Vec<String>,
}

impl JoinKey {
    /// Validate a key against both tables. Names are normalized.
    pub fn new<S: AsRef<str>>(
        attributes: &[S],
        a: &DatasetTable,
        b: &DatasetTable,
    ) -> Result<Self, DisclosureError> {
        if attributes.is_empty() {
            return Err(DisclosureError::EmptyKey);
        }
        let mut out = Vec::with_capacity(attributes.len());
        for raw in attributes {
            let name =
                normalize_attribute(raw.as_ref()).map_err(|_| DisclosureError::InvalidKey {
                    attribute: raw.as_ref().to_string(),
                    dataset: a.id().to_string(),
                })?;
            for t in [a, b] {
                if t.column(&name).is_none() {
                    return Err(DisclosureError::InvalidKey {
                        attribute: name,
                        dataset: t.id().to_string(),
                    });
                }
            }
            if !out.contains(&name) {
                out.push(name);
            }
        }
        Ok(Self { attributes: out })
    }

    pub fn attributes(&self) -> &[String] {
        &self.attributes
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }
}

/// How numeric key attributes are compared.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NumericMatch {
    /// Equal four-bin label over the union of both columns' ranges.
    #[default]
    Binned,
    /// Raw value equality, for id-like numeric columns.
    Exact,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NmiNormalization {
    #[default]
    Sqrt,
    Min,
    Max,
    Arithmetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedRecord {
    pub key_values: Vec<String>,
    pub row_index_a: usize,
    pub row_index_b: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryCount {
    pub category: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stack {
    pub attribute: String,
    /// Bin edges when the attribute was joined as a numeric histogram.
    pub bin_edges: Option<Vec<f64>>,
    pub entries: Vec<CategoryCount>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ribbon {
    pub from_category: String,
    pub to_category: String,
    pub count: usize,
    pub match_indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RibbonSet {
    pub from_attribute: String,
    pub to_attribute: String,
    pub ribbons: Vec<Ribbon>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JoinOutcome {
    pub dataset_a: String,
    pub dataset_b: String,
    pub key: JoinKey,
    pub matches: Vec<MatchedRecord>,
    pub match_count: usize,
    pub distinct_key_count: usize,
    pub stacks: Vec<Stack>,
    pub ribbons: Vec<RibbonSet>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordDetail {
    pub match_index: usize,
    pub key_values: Vec<String>,
    pub row_index_a: usize,
    pub row_index_b: usize,
    pub full_row_a: Vec<(String, String)>,
    pub full_row_b: Vec<(String, String)>,
}

impl JoinOutcome {
    /// Both source rows behind one match.
    pub fn record_detail(
        &self,
        index: usize,
        a: &DatasetTable,
        b: &DatasetTable,
    ) -> Result<RecordDetail, DisclosureError> {
        let m = self
            .matches
            .get(index)
            .ok_or(DisclosureError::MatchOutOfRange {
                index,
                count: self.matches.len(),
            })?;
        let row = |t: &DatasetTable, r: usize| {
            t.columns
                .iter()
                .map(|c| (c.name.clone(), c.values[r].render()))
                .collect()
        };
        Ok(RecordDetail {
            match_index: index,
            key_values: m.key_values.clone(),
            row_index_a: m.row_index_a,
            row_index_b: m.row_index_b,
            full_row_a: row(a, m.row_index_a),
            full_row_b: row(b, m.row_index_b),
        })
    }
}

/// Per-attribute label function shared by both sides of the join.
struct KeyColumn<'a> {
    cells_a: &'a [Cell],
    cells_b: &'a [Cell],
    bins: Option<Bins>,
}

impl<'a> KeyColumn<'a> {
    fn new(name: &str, a: &'a DatasetTable, b: &'a DatasetTable, mode: NumericMatch) -> Self {
        let ca = a.column(name).expect("validated key");
        let cb = b.column(name).expect("validated key");
        let bins = (mode == NumericMatch::Binned
            && ca.kind == ColumnKind::Numeric
            && cb.kind == ColumnKind::Numeric)
            .then(|| {
                let va: Vec<f64> = ca.numbers().collect();
                let vb: Vec<f64> = cb.numbers().collect();
                numeric_bins(&va, &vb).ok()
            })
            .flatten();
        Self {
            cells_a: &ca.values,
            cells_b: &cb.values,
            bins,
        }
    }
}

fn row_key(cols: &[KeyColumn<'_>], row: usize, side_a: bool) -> Option<Vec<String>> {
    cols.iter()
        .map(|k| {
            let cell = if side_a {
                &k.cells_a[row]
            } else {
                &k.cells_b[row]
            };
            cell_label(cell, k.bins.as_ref())
        })
        .collect()
}

/// Inner equi-join. Rows missing any key value never match; every
/// duplicate combination is kept.
pub fn join(
    a: &DatasetTable,
    b: &DatasetTable,
    key: &JoinKey,
    mode: NumericMatch,
    cancel: Option<&CancelToken>,
) -> Result<JoinOutcome, DisclosureError> {
    if key.is_empty() {
        return Err(DisclosureError::EmptyKey);
    }
    let key = JoinKey::new(key.attributes(), a, b)?;
    let cols: Vec<KeyColumn<'_>> = key
        .attributes()
        .iter()
        .map(|name| KeyColumn::new(name, a, b, mode))
        .collect();

    let mut buckets: HashMap<Vec<String>, Vec<usize>> = HashMap::new();
    for row in 0..b.row_count() {
        if let Some(k) = row_key(&cols, row, false) {
            buckets.entry(k).or_default().push(row);
        }
    }

    let mut matches = Vec::new();
    for row_a in 0..a.row_count() {
        if row_a % 1024 == 0 && cancel.is_some_and(CancelToken::is_cancelled) {
            return Err(DisclosureError::Cancelled);
        }
        let Some(k) = row_key(&cols, row_a, true) else {
            continue;
        };
        if let Some(rows_b) = buckets.get(&k) {
            for &row_b in rows_b {
                matches.push(MatchedRecord {
                    key_values: k.clone(),
                    row_index_a: row_a,
                    row_index_b: row_b,
                });
            }
        }
    }

    let distinct_key_count = matches
        .iter()
        .map(|m| &m.key_values)
        .collect::<HashSet<_>>()
        .len();
    let orders: Vec<Vec<String>> = cols
        .iter()
        .enumerate()
        .map(|(i, c)| category_order(&matches, i, c.bins.as_ref()))
        .collect();
    let stacks = key
        .attributes()
        .iter()
        .enumerate()
        .map(|(i, name)| Stack {
            attribute: name.clone(),
            bin_edges: cols[i].bins.as_ref().map(|b| b.edges().to_vec()),
            entries: orders[i]
                .iter()
                .map(|cat| CategoryCount {
                    category: cat.clone(),
                    count: matches.iter().filter(|m| &m.key_values[i] == cat).count(),
                })
                .collect(),
        })
        .collect();
    let ribbons = (0..key.len().saturating_sub(1))
        .map(|i| ribbon_set(&matches, &key, &orders, i))
        .collect();

    Ok(JoinOutcome {
        dataset_a: a.id().to_string(),
        dataset_b: b.id().to_string(),
        match_count: matches.len(),
        distinct_key_count,
        key,
        matches,
        stacks,
        ribbons,
    })
}

/// Bins in histogram order; categories by frequency, then name.
fn category_order(matches: &[MatchedRecord], attr: usize, bins: Option<&Bins>) -> Vec<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for m in matches {
        *counts.entry(m.key_values[attr].as_str()).or_default() += 1;
    }
    let bin_rank: HashMap<String, usize> = bins
        .map(|b| {
            b.labels()
                .into_iter()
                .enumerate()
                .map(|(i, l)| (l, i))
                .collect()
        })
        .unwrap_or_default();
    let mut cats: Vec<(&str, usize)> = counts.into_iter().collect();
    cats.sort_by(|x, y| match (bin_rank.get(x.0), bin_rank.get(y.0)) {
        (Some(i), Some(j)) => i.cmp(j),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => y.1.cmp(&x.1).then_with(|| x.0.cmp(y.0)),
    });
    cats.into_iter().map(|(c, _)| c.to_string()).collect()
}

fn ribbon_set(
    matches: &[MatchedRecord],
    key: &JoinKey,
    orders: &[Vec<String>],
    i: usize,
) -> RibbonSet {
    let pos = |attr: usize, cat: &str| {
        orders[attr]
            .iter()
            .position(|c| c == cat)
            .unwrap_or(usize::MAX)
    };
    let mut grouped: BTreeMap<(usize, usize), Ribbon> = BTreeMap::new();
    for (idx, m) in matches.iter().enumerate() {
        let (from, to) = (&m.key_values[i], &m.key_values[i + 1]);
        grouped
            .entry((pos(i, from), pos(i + 1, to)))
            .or_insert_with(|| Ribbon {
                from_category: from.clone(),
                to_category: to.clone(),
                count: 0,
                match_indices: Vec::new(),
            })
            .match_indices
            .push(idx);
    }
    let ribbons = grouped
        .into_values()
        .map(|mut r| {
            r.count = r.match_indices.len();
            r
        })
        .collect();
    RibbonSet {
        from_attribute: key.attributes()[i].clone(),
        to_attribute: key.attributes()[i + 1].clone(),
        ribbons,
    }
}

/// Mutual information and marginal entropies (nats) of two aligned label
/// sequences.
pub fn mutual_information<S: AsRef<str>>(
    x: &[S],
    y: &[S],
) -> Result<(f64, f64, f64), DisclosureError> {
    if x.len() != y.len() {
        return Err(DisclosureError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    let mut joint: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    let mut mx: BTreeMap<&str, usize> = BTreeMap::new();
    let mut my: BTreeMap<&str, usize> = BTreeMap::new();
    for (a, b) in x.iter().zip(y) {
        let (a, b) = (a.as_ref(), b.as_ref());
        *joint.entry((a, b)).or_default() += 1;
        *mx.entry(a).or_default() += 1;
        *my.entry(b).or_default() += 1;
    }
    let nf = n as f64;
    let mi: f64 = joint
        .iter()
        .map(|((a, b), &c)| {
            let pxy = c as f64 / nf;
            pxy * ((c as f64 * nf) / (mx[a] as f64 * my[b] as f64)).ln()
        })
        .sum();
    let hx = entropy_of_counts(mx.values().copied(), n);
    let hy = entropy_of_counts(my.values().copied(), n);
    Ok((mi.max(0.0), hx, hy))
}

/// Normalized mutual information in `[0, 1]`; zero when either side is
/// constant.
pub fn nmi<S: AsRef<str>>(
    x: &[S],
    y: &[S],
    norm: NmiNormalization,
) -> Result<f64, DisclosureError> {
    if x.len() < 2 {
        return Err(DisclosureError::TooFewMatches(x.len()));
    }
    let (mi, hx, hy) = mutual_information(x, y)?;
    if hx == 0.0 || hy == 0.0 {
        return Ok(0.0);
    }
    let denom = match norm {
        NmiNormalization::Sqrt => (hx * hy).sqrt(),
        NmiNormalization::Min => hx.min(hy),
        NmiNormalization::Max => hx.max(hy),
        NmiNormalization::Arithmetic => (hx + hy) / 2.0,
    };
    Ok((mi / denom).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSuggestion {
    pub attribute: String,
    pub source: Side,
    pub nmi: f64,
    /// Distribution over the matched rows.
    pub distribution: Vec<CategoryCount>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSuggestions {
    pub from_a: Vec<FeatureSuggestion>,
    pub from_b: Vec<FeatureSuggestion>,
}

fn side_suggestions(
    outcome: &JoinOutcome,
    table: &DatasetTable,
    side: Side,
    key_labels: &[String],
    norm: NmiNormalization,
) -> Result<Vec<FeatureSuggestion>, DisclosureError> {
    let rows: Vec<usize> = outcome
        .matches
        .iter()
        .map(|m| match side {
            Side::A => m.row_index_a,
            Side::B => m.row_index_b,
        })
        .collect();
    let mut out = Vec::new();
    for col in &table.columns {
        if outcome.key.attributes().contains(&col.name) {
            continue;
        }
        let bins = match col.kind {
            ColumnKind::Numeric => {
                Bins::over(rows.iter().filter_map(|&r| col.values[r].as_number())).ok()
            }
            ColumnKind::Categorical => None,
        };
        let labels: Vec<String> = rows
            .iter()
            .map(|&r| match &col.values[r] {
                Cell::Missing => MISSING_LABEL.to_string(),
                Cell::Text(s) => normalize_value(s),
                Cell::Number(v) => bins
                    .as_ref()
                    .map_or_else(|| format!("{v}"), |b| b.label_of(*v)),
            })
            .collect();
        let score = nmi(&labels, key_labels, norm)?;
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for l in &labels {
            *counts.entry(l.as_str()).or_default() += 1;
        }
        let mut distribution: Vec<CategoryCount> = counts
            .into_iter()
            .map(|(c, n)| CategoryCount {
                category: c.to_string(),
                count: n,
            })
            .collect();
        if let Some(b) = &bins {
            let rank: HashMap<String, usize> = b
                .labels()
                .into_iter()
                .enumerate()
                .map(|(i, l)| (l, i))
                .collect();
            distribution.sort_by_key(|c| rank.get(&c.category).copied().unwrap_or(usize::MAX));
        } else {
            distribution.sort_by(|x, y| {
                y.count
                    .cmp(&x.count)
                    .then_with(|| x.category.cmp(&y.category))
            });
        }
        out.push(FeatureSuggestion {
            attribute: col.name.clone(),
            source: side,
            nmi: score,
            distribution,
        });
    }
    out.sort_by(|x, y| {
        y.nmi
            .total_cmp(&x.nmi)
            .then_with(|| x.attribute.cmp(&y.attribute))
    });
    out.truncate(MAX_SUGGESTIONS);
    Ok(out)
}

/// Top non-key attributes on each side ranked by NMI against the joint key.
pub fn suggest_features(
    outcome: &JoinOutcome,
    a: &DatasetTable,
    b: &DatasetTable,
    norm: NmiNormalization,
) -> Result<FeatureSuggestions, DisclosureError> {
    if outcome.match_count < 2 {
        return Err(DisclosureError::TooFewMatches(outcome.match_count));
    }
    let key_labels: Vec<String> = outcome
        .matches
        .iter()
        .map(|m| m.key_values.join(&KEY_SEPARATOR.to_string()))
        .collect();
    Ok(FeatureSuggestions {
        from_a: side_suggestions(outcome, a, Side::A, &key_labels, norm)?,
        from_b: side_suggestions(outcome, b, Side::B, &key_labels, norm)?,
    })
}
