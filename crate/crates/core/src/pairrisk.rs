//! Joinability risk between dataset pairs.
//!
//! Two datasets are risky to publish side by side when they share many
//! attributes, and far riskier when the shared attributes are
//! quasi-identifiers. The score is `alpha * p + (c - p)` for `c` shared
//! attributes of which `p` are privacy attributes.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::binning::discretize;
use crate::corpus::{Column, DatasetTable, PrivacyDictionary};

pub const DEFAULT_ALPHA: f64 = 50.0;
/// Scores above this are rare and share the top of the 0-5 scale.
pub const RISK_CEILING: f64 = 182.0;
pub const RISK_SCALE: f64 = 5.0;
pub const DEFAULT_KEY_SIZE: usize = 2;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PairRiskError {
    #[error("privacy count {p} exceeds shared count {c}")]
    InvalidCounts { p: usize, c: usize },
    #[error("pair shares no attributes")]
    NoSharedAttributes,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskConfig {
    pub alpha: f64,
    /// Minimum join-key length, filled with high-entropy attributes.
    pub key_size: usize,
}

impl Default for RiskConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            key_size: DEFAULT_KEY_SIZE,
        }
    }
}

/// Shannon entropy in nats of a sequence of category labels.
pub fn entropy<I, S>(labels: I) -> f64
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut total = 0usize;
    for l in labels {
        *counts.entry(l.as_ref().to_string()).or_default() += 1;
        total += 1;
    }
    entropy_of_counts(counts.values().copied(), total)
}

pub(crate) fn entropy_of_counts(counts: impl Iterator<Item = usize>, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    let h: f64 = counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum();
    h.max(0.0)
}

/// Entropy of a column's categories (four bins for numeric columns),
/// ignoring missing cells.
pub fn column_entropy(column: &Column) -> f64 {
    entropy(discretize(column).into_iter().flatten())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharedAttribute {
    pub name: String,
    pub entropy_a: f64,
    pub entropy_b: f64,
    /// The larger of the two sides.
    #[serde(rename = "H")]
    pub entropy: f64,
    pub is_privacy: bool,
}

/// Attributes present in both tables, highest entropy first.
pub fn shared_attributes(
    a: &DatasetTable,
    b: &DatasetTable,
    dictionary: &PrivacyDictionary,
) -> Vec<SharedAttribute> {
    let mut shared: Vec<SharedAttribute> = a
        .columns
        .iter()
        .filter_map(|ca| {
            let cb = b.column(&ca.name)?;
            let entropy_a = column_entropy(ca);
            let entropy_b = column_entropy(cb);
            Some(SharedAttribute {
                name: ca.name.clone(),
                entropy_a,
                entropy_b,
                entropy: entropy_a.max(entropy_b),
                is_privacy: dictionary.contains(&ca.name),
            })
        })
        .collect();
    shared.sort_by(|x, y| {
        y.entropy
            .total_cmp(&x.entropy)
            .then_with(|| x.name.cmp(&y.name))
    });
    shared
}

pub fn risk_score(p: usize, c: usize, alpha: f64) -> Result<f64, PairRiskError> {
    if p > c {
        return Err(PairRiskError::InvalidCounts { p, c });
    }
    Ok(alpha * p as f64 + (c - p) as f64)
}

/// Map a raw score onto `[0, 5]`, clamping at the ceiling.
pub fn normalize_risk(risk: f64) -> f64 {
    risk.clamp(0.0, RISK_CEILING) / RISK_CEILING * RISK_SCALE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRisk {
    #[serde(rename = "a")]
    pub dataset_a: String,
    #[serde(rename = "b")]
    pub dataset_b: String,
    pub shared: Vec<SharedAttribute>,
    pub p: usize,
    pub c: usize,
    pub alpha: f64,
    pub risk: f64,
    pub normalized_risk: f64,
    pub mean_entropy: f64,
    pub suggested_key: Vec<String>,
    /// Key used the last time this pair was joined, if any.
    pub last_used_key: Option<Vec<String>>,
    pub dictionary_version: u64,
}

pub fn pair_risk(
    a: &DatasetTable,
    b: &DatasetTable,
    dictionary: &PrivacyDictionary,
    cfg: &RiskConfig,
) -> PairRisk {
    let shared = shared_attributes(a, b, dictionary);
    let c = shared.len();
    let p = shared.iter().filter(|s| s.is_privacy).count();
    let risk = risk_score(p, c, cfg.alpha).expect("p counts a subset of the shared attributes");
    let mean_entropy = if c == 0 {
        0.0
    } else {
        shared.iter().map(|s| s.entropy).sum::<f64>() / c as f64
    };
    let mut pair = PairRisk {
        dataset_a: a.id().to_string(),
        dataset_b: b.id().to_string(),
        shared,
        p,
        c,
        alpha: cfg.alpha,
        risk,
        normalized_risk: normalize_risk(risk),
        mean_entropy,
        suggested_key: Vec::new(),
        last_used_key: None,
        dictionary_version: dictionary.version(),
    };
    pair.suggested_key = suggest_join_key(&pair, dictionary, cfg.key_size).unwrap_or_default();
    pair
}

/// Risk descending, then mean shared entropy descending, then ids.
pub fn compare_pairs(x: &PairRisk, y: &PairRisk) -> Ordering {
    y.risk
        .total_cmp(&x.risk)
        .then_with(|| y.mean_entropy.total_cmp(&x.mean_entropy))
        .then_with(|| x.dataset_a.cmp(&y.dataset_a))
        .then_with(|| x.dataset_b.cmp(&y.dataset_b))
}

/// Score and rank all `n * (n - 1) / 2` pairs.
pub fn rank_pairs(
    candidates: &[DatasetTable],
    dictionary: &PrivacyDictionary,
    cfg: &RiskConfig,
) -> Vec<PairRisk> {
    let refs: Vec<&DatasetTable> = candidates.iter().collect();
    rank_pair_refs(&refs, dictionary, cfg)
}

pub fn rank_pair_refs(
    candidates: &[&DatasetTable],
    dictionary: &PrivacyDictionary,
    cfg: &RiskConfig,
) -> Vec<PairRisk> {
    let n = candidates.len();
    let index_pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let mut pairs: Vec<PairRisk> = index_pairs
        .par_iter()
        .map(|&(i, j)| pair_risk(candidates[i], candidates[j], dictionary, cfg))
        .collect();
    pairs.sort_by(compare_pairs);
    pairs
}

/// Every shared privacy attribute (dictionary order), topped up with the
/// highest-entropy remaining attributes until the key has
/// `min(key_size, c)` members.
pub fn suggest_join_key(
    pair: &PairRisk,
    dictionary: &PrivacyDictionary,
    key_size: usize,
) -> Result<Vec<String>, PairRiskError> {
    if pair.shared.is_empty() {
        return Err(PairRiskError::NoSharedAttributes);
    }
    let mut privacy: Vec<&SharedAttribute> = pair.shared.iter().filter(|s| s.is_privacy).collect();
    privacy.sort_by_key(|s| dictionary.index_of(&s.name).unwrap_or(usize::MAX));
    let mut key: Vec<String> = privacy.iter().map(|s| s.name.clone()).collect();

    let target = key_size.min(pair.shared.len());
    // `shared` is already sorted by entropy descending
    for s in pair.shared.iter().filter(|s| !s.is_privacy) {
        if key.len() >= target {
            break;
        }
        key.push(s.name.clone());
    }
    Ok(key)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub alpha: f64,
    pub min_privacy_risk: Option<f64>,
    pub max_plain_risk: Option<f64>,
    /// `min_privacy_risk - max_plain_risk` when both kinds of pair exist.
    pub margin: Option<f64>,
    /// Every privacy-sharing pair scores above every other pair.
    pub separated: bool,
}

/// Re-score `(p, c)` pair counts for each integer alpha in `from..=to`.
pub fn alpha_sweep(counts: &[(usize, usize)], from: u32, to: u32) -> Vec<SweepPoint> {
    (from..=to)
        .map(|a| {
            let alpha = a as f64;
            let score = |&(p, c): &(usize, usize)| alpha * p as f64 + c.saturating_sub(p) as f64;
            let min_privacy_risk = counts
                .iter()
                .filter(|(p, _)| *p > 0)
                .map(score)
                .reduce(f64::min);
            let max_plain_risk = counts
                .iter()
                .filter(|(p, _)| *p == 0)
                .map(score)
                .reduce(f64::max);
            let margin = min_privacy_risk.zip(max_plain_risk).map(|(x, y)| x - y);
            SweepPoint {
                alpha,
                min_privacy_risk,
                max_plain_risk,
                margin,
                separated: margin.is_none_or(|m| m > 0.0),
            }
        })
        .collect()
}
