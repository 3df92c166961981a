//! End-to-end triage: group the corpus, rank every pair by risk, then join
//! the riskiest pairs on their suggested keys.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{DatasetTable, PrivacyDictionary};
use crate::disclosure::{
    join, suggest_features, DisclosureError, FeatureSuggestions, JoinKey, NmiNormalization,
    NumericMatch,
};
use crate::embedding::EmbeddingProvider;
use crate::grouping::{build_groups, GroupingConfig, GroupingError, GroupingResult};
use crate::pairrisk::{rank_pairs, PairRisk, RiskConfig};
use crate::CancelToken;

#[derive(Debug, Error)]
pub enum AuditError {
    #[error(transparent)]
    Disclosure(#[from] DisclosureError),
    #[error("cancelled")]
    Cancelled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    pub grouping: GroupingConfig,
    pub risk: RiskConfig,
    /// How many of the riskiest pairs get joined.
    pub top_pairs: usize,
    pub numeric_match: NumericMatch,
    pub nmi: NmiNormalization,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            grouping: GroupingConfig::default(),
            risk: RiskConfig::default(),
            top_pairs: 5,
            numeric_match: NumericMatch::default(),
            nmi: NmiNormalization::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub rank: usize,
    pub pair: PairRisk,
    /// Group holding both datasets, if any.
    pub group_id: Option<usize>,
    pub key: Vec<String>,
    pub match_count: usize,
    pub distinct_key_count: usize,
    /// Match count when joining on every shared attribute.
    pub full_key_match_count: usize,
    pub suggestions: Option<FeatureSuggestions>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub dictionary_version: u64,
    pub dataset_count: usize,
    pub pair_count: usize,
    pub grouping: Option<GroupingResult>,
    /// Why grouping was skipped, when it was.
    pub grouping_error: Option<String>,
    pub entries: Vec<AuditEntry>,
}

fn group_of(grouping: Option<&GroupingResult>, a: &str, b: &str) -> Option<usize> {
    grouping?.groups.iter().find_map(|g| {
        let has = |id: &str| g.members.iter().any(|m| m == id);
        (has(a) && has(b)).then_some(g.group_id)
    })
}

/// Pairs are ranked across the whole corpus so a risky pair split across
/// groups is never hidden; group membership is reported alongside.
pub fn audit(
    tables: &[DatasetTable],
    dictionary: &PrivacyDictionary,
    provider: &EmbeddingProvider,
    cfg: &AuditConfig,
    cancel: Option<&CancelToken>,
) -> Result<AuditReport, AuditError> {
    let metas: Vec<_> = tables.iter().map(|t| t.meta.clone()).collect();
    let (grouping, grouping_error) =
        match build_groups(&metas, dictionary, provider, &cfg.grouping, cancel) {
            Ok(g) => (Some(g), None),
            Err(GroupingError::Cancelled) => return Err(AuditError::Cancelled),
            Err(e) => (None, Some(e.to_string())),
        };

    let pairs = rank_pairs(tables, dictionary, &cfg.risk);
    let pair_count = pairs.len();
    let find = |id: &str| {
        tables
            .iter()
            .find(|t| t.id() == id)
            .expect("pair ids come from the corpus")
    };

    let mut entries = Vec::new();
    for (i, pair) in pairs.into_iter().take(cfg.top_pairs).enumerate() {
        if cancel.is_some_and(CancelToken::is_cancelled) {
            return Err(AuditError::Cancelled);
        }
        let (a, b) = (find(&pair.dataset_a), find(&pair.dataset_b));
        let group_id = group_of(grouping.as_ref(), a.id(), b.id());
        if pair.suggested_key.is_empty() {
            entries.push(AuditEntry {
                rank: i + 1,
                group_id,
                key: Vec::new(),
                match_count: 0,
                distinct_key_count: 0,
                full_key_match_count: 0,
                suggestions: None,
                pair,
            });
            continue;
        }
        let key = JoinKey::new(&pair.suggested_key, a, b)?;
        let outcome = join(a, b, &key, cfg.numeric_match, cancel).map_err(cancelled)?;
        let all: Vec<&str> = pair.shared.iter().map(|s| s.name.as_str()).collect();
        let full =
            join(a, b, &JoinKey::new(&all, a, b)?, cfg.numeric_match, cancel).map_err(cancelled)?;
        let suggestions = match suggest_features(&outcome, a, b, cfg.nmi) {
            Ok(s) => Some(s),
            Err(DisclosureError::TooFewMatches(_)) => None,
            Err(e) => return Err(e.into()),
        };
        entries.push(AuditEntry {
            rank: i + 1,
            group_id,
            key: key.attributes().to_vec(),
            match_count: outcome.match_count,
            distinct_key_count: outcome.distinct_key_count,
            full_key_match_count: full.match_count,
            suggestions,
            pair,
        });
    }

    Ok(AuditReport {
        dictionary_version: dictionary.version(),
        dataset_count: tables.len(),
        pair_count,
        grouping,
        grouping_error,
        entries,
    })
}

fn cancelled(e: DisclosureError) -> AuditError {
    match e {
        DisclosureError::Cancelled => AuditError::Cancelled,
        other => other.into(),
    }
}
