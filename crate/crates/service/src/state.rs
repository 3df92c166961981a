//! Session state shared by the HTTP handlers.
//!
//! Every derived artifact records the dictionary version it was computed
//! against; handlers refuse to serve one whose version is no longer
//! current.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, RwLock};

use linkrisk_core::corpus::{
    filter_corpus, CorpusFilter, DatasetMeta, DatasetTable, PrivacyDictionary,
};
use linkrisk_core::disclosure::{
    join, suggest_features, DisclosureError, JoinKey, JoinOutcome, RecordDetail,
};
use linkrisk_core::embedding::EmbeddingProvider;
use linkrisk_core::grouping::{build_groups, GroupingConfig, GroupingError, GroupingResult};
use linkrisk_core::pairrisk::{rank_pair_refs, RiskConfig};
use linkrisk_core::vulnerability::{profile, rank_relevance, VulnerabilityProfile};
use linkrisk_core::CancelToken;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{ApiError, ErrorBody};
use crate::snapshot::{content_hash, ArtifactCache, Snapshot};
use crate::types::*;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum JobStatus {
    Running,
    Done { result: Box<GroupingResult> },
    Failed { error: ErrorBody },
    Cancelled,
}

pub struct Job {
    pub id: String,
    pub dictionary_version: u64,
    cancel: CancelToken,
    status: Mutex<JobStatus>,
}

impl Job {
    pub fn view(&self) -> JobView {
        JobView {
            id: self.id.clone(),
            dictionary_version: self.dictionary_version,
            status: self.status.lock().expect("job lock").clone(),
        }
    }

    fn reusable(&self, version: u64) -> bool {
        self.dictionary_version == version
            && matches!(
                *self.status.lock().expect("job lock"),
                JobStatus::Running | JobStatus::Done { .. }
            )
    }
}

/// Inputs for a grouping run that must happen off the request path.
pub struct GroupingWork {
    job: Arc<Job>,
    metas: Vec<DatasetMeta>,
    dictionary: PrivacyDictionary,
    cfg: GroupingConfig,
    cache_key: String,
}

impl GroupingWork {
    pub fn view(&self) -> JobView {
        self.job.view()
    }
}

pub enum GroupingStart {
    Existing(Arc<Job>),
    New(Box<GroupingWork>),
}

struct StoredJoin {
    a: String,
    b: String,
    outcome: JoinOutcome,
}

struct Session {
    snapshot: Arc<Snapshot>,
    snapshot_id: String,
    dictionary: PrivacyDictionary,
    filters: CorpusFilter,
    last_grouping: Option<String>,
    last_pairs: Vec<PairSelection>,
    last_keys: BTreeMap<(String, String), Vec<String>>,
}

pub struct AppState {
    pub config: Config,
    cache: ArtifactCache,
    provider: EmbeddingProvider,
    session: RwLock<Session>,
    jobs: Mutex<HashMap<String, Arc<Job>>>,
    joins: Mutex<HashMap<String, Arc<StoredJoin>>>,
}

fn pair_key(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

impl AppState {
    pub fn new(config: Config, snapshot: Snapshot, dictionary: PrivacyDictionary) -> Self {
        let snapshot_id = snapshot.id();
        Self {
            cache: ArtifactCache::new(config.cache_dir.join("artifacts")),
            provider: EmbeddingProvider::default(),
            config,
            session: RwLock::new(Session {
                snapshot: Arc::new(snapshot),
                snapshot_id,
                dictionary,
                filters: CorpusFilter::default(),
                last_grouping: None,
                last_pairs: Vec::new(),
                last_keys: BTreeMap::new(),
            }),
            jobs: Mutex::new(HashMap::new()),
            joins: Mutex::new(HashMap::new()),
        }
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, Session> {
        self.session.read().expect("session lock")
    }

    fn write(&self) -> std::sync::RwLockWriteGuard<'_, Session> {
        self.session.write().expect("session lock")
    }

    pub fn session_state(&self) -> SessionState {
        let s = self.read();
        SessionState {
            snapshot_id: s.snapshot_id.clone(),
            dictionary_version: s.dictionary.version(),
            filters: s.filters.clone(),
            last_grouping: s.last_grouping.clone(),
            last_pairs: s.last_pairs.clone(),
            last_keys: s
                .last_keys
                .iter()
                .map(|((a, b), key)| LastKey {
                    a: a.clone(),
                    b: b.clone(),
                    key: key.clone(),
                })
                .collect(),
        }
    }

    pub fn corpus(&self, filter: CorpusFilter) -> Vec<DatasetMeta> {
        let mut s = self.write();
        let out = filter_corpus(&s.snapshot.metas(), &filter);
        s.filters = filter;
        out
    }

    pub fn dictionary(&self) -> DictionaryView {
        let s = self.read();
        DictionaryView {
            version: s.dictionary.version(),
            attributes: s.dictionary.iter().map(String::from).collect(),
        }
    }

    /// Replace the dictionary and cancel every grouping computed against
    /// the old one.
    pub fn replace_dictionary(&self, attributes: &[String]) -> Result<DictionaryView, ApiError> {
        {
            let mut s = self.write();
            s.dictionary
                .replace(attributes)
                .map_err(|e| ApiError::bad_request("InvalidAttributeName", e.to_string()))?;
            s.last_grouping = None;
        }
        for job in self.jobs.lock().expect("jobs lock").values() {
            job.cancel.cancel();
        }
        Ok(self.dictionary())
    }

    fn resolve<'a>(
        snapshot: &'a Snapshot,
        ids: &[String],
    ) -> Result<Vec<&'a DatasetTable>, ApiError> {
        let mut out: Vec<&DatasetTable> = Vec::with_capacity(ids.len());
        for id in ids {
            let t = snapshot.table(id).ok_or_else(|| {
                ApiError::bad_request("UnknownDataset", format!("unknown dataset id {id:?}"))
            })?;
            if out.iter().any(|x| x.id() == id) {
                return Err(ApiError::bad_request(
                    "DuplicateDataset",
                    format!("dataset {id:?} listed twice"),
                ));
            }
            out.push(t);
        }
        Ok(out)
    }

    pub fn start_grouping(&self, req: GroupingRequest) -> Result<GroupingStart, ApiError> {
        let mut s = self.write();
        let ids = req.dataset_ids.unwrap_or_else(|| {
            filter_corpus(&s.snapshot.metas(), &s.filters)
                .into_iter()
                .map(|m| m.id)
                .collect()
        });
        let metas: Vec<DatasetMeta> = Self::resolve(&s.snapshot, &ids)?
            .iter()
            .map(|t| t.meta.clone())
            .collect();
        let mut cfg = GroupingConfig::default();
        if let Some(w) = req.weight_candidates {
            if w.is_empty() || w.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(ApiError::bad_request(
                    "InvalidConfig",
                    "weight candidates must be non-negative numbers",
                ));
            }
            cfg.weight_candidates = w;
        }
        cfg.projection.seed = req.seed.unwrap_or(self.config.seed);

        let attrs: Vec<&str> = s.dictionary.iter().collect();
        let cache_key = content_hash(&(
            &s.snapshot_id,
            &attrs,
            &ids,
            &cfg,
            self.provider.dimension(),
        ));
        let id = cache_key[..16].to_string();
        let version = s.dictionary.version();
        s.last_grouping = Some(id.clone());

        let mut jobs = self.jobs.lock().expect("jobs lock");
        if let Some(job) = jobs.get(&id).filter(|j| j.reusable(version)) {
            return Ok(GroupingStart::Existing(job.clone()));
        }
        let cached: Option<GroupingResult> = self.cache.get("groupings", &cache_key);
        let status = match cached {
            Some(mut result) => {
                result.dictionary_version = version;
                JobStatus::Done {
                    result: Box::new(result),
                }
            }
            None => JobStatus::Running,
        };
        let running = matches!(status, JobStatus::Running);
        let job = Arc::new(Job {
            id: id.clone(),
            dictionary_version: version,
            cancel: CancelToken::new(),
            status: Mutex::new(status),
        });
        jobs.insert(id, job.clone());
        if !running {
            return Ok(GroupingStart::Existing(job));
        }
        Ok(GroupingStart::New(Box::new(GroupingWork {
            job,
            metas,
            dictionary: s.dictionary.clone(),
            cfg,
            cache_key,
        })))
    }

    /// Blocking; run on a worker thread.
    pub fn run_grouping(&self, work: GroupingWork) -> JobView {
        let GroupingWork {
            job,
            metas,
            dictionary,
            cfg,
            cache_key,
        } = work;
        let outcome = build_groups(&metas, &dictionary, &self.provider, &cfg, Some(&job.cancel));
        let status = match outcome {
            Ok(result) => {
                // a failed cache write only costs a recomputation later
                let _ = self.cache.put("groupings", &cache_key, &result);
                JobStatus::Done {
                    result: Box::new(result),
                }
            }
            Err(GroupingError::Cancelled) => JobStatus::Cancelled,
            Err(e) => JobStatus::Failed {
                error: ApiError::from(e).body,
            },
        };
        *job.status.lock().expect("job lock") = status;
        job.view()
    }

    pub fn grouping(&self, id: &str) -> Result<JobView, ApiError> {
        let job = self
            .jobs
            .lock()
            .expect("jobs lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("no grouping {id:?}")))?;
        let current = self.read().dictionary.version();
        if job.dictionary_version != current {
            return Err(ApiError::stale(current, job.dictionary_version));
        }
        Ok(job.view())
    }

    pub fn vulnerability(
        &self,
        id: &str,
        threshold: Option<usize>,
    ) -> Result<VulnerabilityProfile, ApiError> {
        let s = self.read();
        let table = Self::resolve(&s.snapshot, &[id.to_string()])?[0];
        Ok(profile(
            table,
            &s.dictionary,
            threshold.unwrap_or(self.config.vulnerable_threshold),
        )?)
    }

    fn risk_config(&self) -> RiskConfig {
        RiskConfig {
            alpha: self.config.alpha,
            key_size: self.config.key_size,
        }
    }

    pub fn pairs(&self, req: PairsRequest) -> Result<PairsResponse, ApiError> {
        let mut s = self.write();
        let snapshot = s.snapshot.clone();
        let tables = Self::resolve(&snapshot, &req.dataset_ids)?;
        let mut pairs = rank_pair_refs(&tables, &s.dictionary, &self.risk_config());
        for p in &mut pairs {
            p.last_used_key = s
                .last_keys
                .get(&pair_key(&p.dataset_a, &p.dataset_b))
                .cloned();
        }
        s.last_pairs = pairs
            .iter()
            .map(|p| PairSelection {
                a: p.dataset_a.clone(),
                b: p.dataset_b.clone(),
            })
            .collect();
        Ok(PairsResponse {
            dictionary_version: s.dictionary.version(),
            pairs,
        })
    }

    pub fn relevance(&self, req: RelevanceRequest) -> Result<RelevanceResponse, ApiError> {
        let s = self.read();
        let source = Self::resolve(&s.snapshot, std::slice::from_ref(&req.vulnerable_id))?[0];
        let prof = profile(
            source,
            &s.dictionary,
            req.threshold.unwrap_or(self.config.vulnerable_threshold),
        )?;
        let candidates = match &req.candidate_ids {
            Some(ids) => Self::resolve(&s.snapshot, ids)?,
            None => s
                .snapshot
                .tables
                .iter()
                .filter(|t| t.id() != source.id())
                .collect(),
        };
        let ranking = rank_relevance(&prof.vulnerable, &candidates)?;
        Ok(RelevanceResponse {
            dataset_id: source.id().to_string(),
            dictionary_version: s.dictionary.version(),
            vulnerable: prof.vulnerable,
            ranking,
        })
    }

    pub fn join(&self, req: JoinRequest) -> Result<JoinResponse, ApiError> {
        let mut s = self.write();
        let snapshot = s.snapshot.clone();
        let tables = Self::resolve(&snapshot, &[req.a.clone(), req.b.clone()])?;
        let (a, b) = (tables[0], tables[1]);
        let key = JoinKey::new(&req.key, a, b)?;
        let mode = req.numeric_match.unwrap_or(self.config.numeric_match);
        let outcome = join(a, b, &key, mode, None)?;
        let suggestions = match suggest_features(&outcome, a, b, self.config.nmi) {
            Ok(f) => Some(f),
            Err(DisclosureError::TooFewMatches(_)) => None,
            Err(e) => return Err(e.into()),
        };
        let id = content_hash(&(&s.snapshot_id, &req.a, &req.b, key.attributes(), mode))[..16]
            .to_string();
        s.last_keys
            .insert(pair_key(&req.a, &req.b), key.attributes().to_vec());
        self.joins.lock().expect("joins lock").insert(
            id.clone(),
            Arc::new(StoredJoin {
                a: req.a,
                b: req.b,
                outcome: outcome.clone(),
            }),
        );
        Ok(JoinResponse {
            id,
            numeric_match: mode,
            outcome,
            suggestions,
        })
    }

    pub fn match_detail(&self, id: &str, n: usize) -> Result<RecordDetail, ApiError> {
        let stored = self
            .joins
            .lock()
            .expect("joins lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("no join {id:?}")))?;
        let s = self.read();
        let a = s
            .snapshot
            .table(&stored.a)
            .ok_or_else(|| ApiError::internal("joined dataset vanished"))?;
        let b = s
            .snapshot
            .table(&stored.b)
            .ok_or_else(|| ApiError::internal("joined dataset vanished"))?;
        Ok(stored.outcome.record_detail(n, a, b)?)
    }
}
