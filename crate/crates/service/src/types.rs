//! Request and response bodies.

use linkrisk_core::corpus::CorpusFilter;
use linkrisk_core::disclosure::{FeatureSuggestions, JoinOutcome, NumericMatch};
use linkrisk_core::pairrisk::PairRisk;
use linkrisk_core::vulnerability::{RecordPoint, Relevance};
use serde::{Deserialize, Serialize};

use crate::state::JobStatus;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictionaryView {
    pub version: u64,
    pub attributes: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DictionaryUpdate {
    pub attributes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSelection {
    pub a: String,
    pub b: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LastKey {
    pub a: String,
    pub b: String,
    pub key: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub snapshot_id: String,
    pub dictionary_version: u64,
    pub filters: CorpusFilter,
    pub last_grouping: Option<String>,
    pub last_pairs: Vec<PairSelection>,
    pub last_keys: Vec<LastKey>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct GroupingRequest {
    /// Defaults to the corpus under the active filters.
    #[serde(default)]
    pub dataset_ids: Option<Vec<String>>,
    #[serde(default)]
    pub weight_candidates: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JobView {
    pub id: String,
    pub dictionary_version: u64,
    #[serde(flatten)]
    pub status: JobStatus,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairsRequest {
    pub dataset_ids: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairsResponse {
    pub dictionary_version: u64,
    pub pairs: Vec<PairRisk>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelevanceRequest {
    pub vulnerable_id: String,
    #[serde(default)]
    pub candidate_ids: Option<Vec<String>>,
    #[serde(default)]
    pub threshold: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelevanceResponse {
    pub dataset_id: String,
    pub dictionary_version: u64,
    pub vulnerable: Vec<RecordPoint>,
    pub ranking: Vec<Relevance>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JoinRequest {
    pub a: String,
    pub b: String,
    pub key: Vec<String>,
    #[serde(default)]
    pub numeric_match: Option<NumericMatch>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JoinResponse {
    pub id: String,
    pub numeric_match: NumericMatch,
    pub outcome: JoinOutcome,
    /// Absent when fewer than two records matched.
    pub suggestions: Option<FeatureSuggestions>,
}
