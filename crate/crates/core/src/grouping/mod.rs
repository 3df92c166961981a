//! Joinable groups: schema vectors projected to the plane with t-SNE,
//! clustered with DBSCAN and scored with internal clustering indices.
//!
//! Each weight candidate runs the full pipeline; the clustering with the
//! higher Calinski-Harabasz index wins.

mod dbscan;
mod quality;
mod tsne;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dbscan::{
    cluster, cluster_count, dbscan, sweep_grid, Clustering, ClusteringConfig, Eps, Labeling,
};
pub use quality::{clustering_quality, ClusterQuality};
pub use tsne::{project_2d, Point, ProjectionConfig};

use crate::corpus::{normalize_attribute, DatasetMeta, PrivacyDictionary};
use crate::embedding::{
    dataset_vector, pairwise_distances, EmbeddingError, EmbeddingProvider,
    DEFAULT_WEIGHT_CANDIDATES,
};
use crate::CancelToken;

#[derive(Debug, Error)]
pub enum GroupingError {
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error("need at least 3 datasets to group, got {0}")]
    TooFewDatasets(usize),
    #[error("projection needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("invalid distance matrix: {0}")]
    InvalidDistances(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("all pairwise distances are zero")]
    DegenerateInput,
    #[error("need at least 2 clusters, got {0}")]
    InsufficientClusters(usize),
    #[error("cancelled")]
    Cancelled,
}

/// Points closer than this in the projection share one marker.
pub const OVERLAP_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupingConfig {
    pub weight_candidates: Vec<f64>,
    pub projection: ProjectionConfig,
    pub clustering: ClusteringConfig,
}

impl Default for GroupingConfig {
    fn default() -> Self {
        Self {
            weight_candidates: DEFAULT_WEIGHT_CANDIDATES.to_vec(),
            projection: ProjectionConfig::default(),
            clustering: ClusteringConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyBar {
    pub attribute: String,
    pub count: usize,
    pub is_privacy: bool,
}

/// Datasets whose projected points coincide, drawn as one dot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marker {
    pub x: f64,
    pub y: f64,
    pub members: Vec<String>,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JoinableGroup {
    #[serde(rename = "id")]
    pub group_id: usize,
    pub rank: usize,
    pub members: Vec<String>,
    pub coords: Vec<Point>,
    /// Attributes held by at least two members.
    pub attribute_frequencies: BTreeMap<String, usize>,
    /// Dictionary attributes held by at least one member.
    pub privacy_frequencies: BTreeMap<String, usize>,
    /// Bar-chart order: privacy attributes first, then the rest.
    pub frequency_bars: Vec<FrequencyBar>,
    pub markers: Vec<Marker>,
    pub quality: Option<ClusterQuality>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSummary {
    pub weight: f64,
    pub eps: f64,
    pub cluster_count: usize,
    pub quality: Option<ClusterQuality>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupingResult {
    pub weight_chosen: f64,
    pub dictionary_version: u64,
    pub quality: Option<ClusterQuality>,
    pub candidates: Vec<CandidateSummary>,
    pub groups: Vec<JoinableGroup>,
    /// Datasets DBSCAN left unclustered.
    pub noise: Vec<String>,
    /// Projected coordinates of every dataset, in input order.
    pub coords: Vec<Point>,
}

struct CandidateRun {
    weight: f64,
    coords: Vec<Point>,
    clustering: Clustering,
}

fn run_candidate(
    corpus: &[DatasetMeta],
    dictionary: &PrivacyDictionary,
    provider: &EmbeddingProvider,
    weight: f64,
    cfg: &GroupingConfig,
    cancel: Option<&CancelToken>,
) -> Result<CandidateRun, GroupingError> {
    let vectors = corpus
        .iter()
        .map(|m| dataset_vector(m, provider, dictionary, weight))
        .collect::<Result<Vec<_>, _>>()?;
    let distances = pairwise_distances(&vectors)?;
    let coords = match project_2d(&distances, &cfg.projection, cancel) {
        Ok(c) => c,
        Err(GroupingError::DegenerateInput) => vec![[0.0, 0.0]; corpus.len()],
        Err(e) => return Err(e),
    };
    let clustering = cluster(&coords, &cfg.clustering)?;
    Ok(CandidateRun {
        weight,
        coords,
        clustering,
    })
}

fn attribute_sets(corpus: &[DatasetMeta]) -> Vec<BTreeSet<String>> {
    corpus
        .iter()
        .map(|m| {
            m.attribute_names
                .iter()
                .filter_map(|a| normalize_attribute(a).ok())
                .collect()
        })
        .collect()
}

fn markers(ids: &[String], coords: &[Point]) -> Vec<Marker> {
    let mut out: Vec<Marker> = Vec::new();
    for (id, p) in ids.iter().zip(coords) {
        let hit = out
            .iter_mut()
            .find(|m| ((m.x - p[0]).powi(2) + (m.y - p[1]).powi(2)).sqrt() < OVERLAP_TOLERANCE);
        match hit {
            Some(m) => {
                m.members.push(id.clone());
                m.multiplicity += 1;
            }
            None => out.push(Marker {
                x: p[0],
                y: p[1],
                members: vec![id.clone()],
                multiplicity: 1,
            }),
        }
    }
    out
}

fn make_group(
    group_id: usize,
    indices: &[usize],
    corpus: &[DatasetMeta],
    attrs: &[BTreeSet<String>],
    coords: &[Point],
    dictionary: &PrivacyDictionary,
    quality: Option<ClusterQuality>,
) -> JoinableGroup {
    let members: Vec<String> = indices.iter().map(|&i| corpus[i].id.clone()).collect();
    let member_coords: Vec<Point> = indices.iter().map(|&i| coords[i]).collect();

    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for &i in indices {
        for a in &attrs[i] {
            *counts.entry(a.clone()).or_default() += 1;
        }
    }
    let privacy_frequencies: BTreeMap<String, usize> = counts
        .iter()
        .filter(|(a, _)| dictionary.contains(a))
        .map(|(a, c)| (a.clone(), *c))
        .collect();
    let attribute_frequencies: BTreeMap<String, usize> = counts
        .iter()
        .filter(|(_, &c)| c >= 2)
        .map(|(a, c)| (a.clone(), *c))
        .collect();

    let mut privacy_bars: Vec<FrequencyBar> = privacy_frequencies
        .iter()
        .map(|(a, &count)| FrequencyBar {
            attribute: a.clone(),
            count,
            is_privacy: true,
        })
        .collect();
    privacy_bars.sort_by(|x, y| {
        y.count.cmp(&x.count).then_with(|| {
            dictionary
                .index_of(&x.attribute)
                .cmp(&dictionary.index_of(&y.attribute))
        })
    });
    let mut other_bars: Vec<FrequencyBar> = attribute_frequencies
        .iter()
        .filter(|(a, _)| !dictionary.contains(a))
        .map(|(a, &count)| FrequencyBar {
            attribute: a.clone(),
            count,
            is_privacy: false,
        })
        .collect();
    other_bars.sort_by(|x, y| {
        y.count
            .cmp(&x.count)
            .then_with(|| x.attribute.cmp(&y.attribute))
    });
    privacy_bars.extend(other_bars);

    JoinableGroup {
        group_id,
        rank: 0,
        markers: markers(&members, &member_coords),
        members,
        coords: member_coords,
        attribute_frequencies,
        privacy_frequencies,
        frequency_bars: privacy_bars,
        quality,
    }
}

/// Dictionary attributes held by at least half the group's members.
pub fn privacy_coverage(group: &JoinableGroup) -> usize {
    let size = group.members.len();
    group
        .privacy_frequencies
        .values()
        .filter(|&&c| 2 * c >= size)
        .count()
}

/// Most vulnerable first: privacy coverage, then size, then id.
pub fn rank_groups(groups: &mut [JoinableGroup]) {
    groups.sort_by(|a, b| {
        privacy_coverage(b)
            .cmp(&privacy_coverage(a))
            .then_with(|| b.members.len().cmp(&a.members.len()))
            .then_with(|| a.group_id.cmp(&b.group_id))
    });
    for (i, g) in groups.iter_mut().enumerate() {
        g.rank = i + 1;
    }
}

/// Group the corpus by schema similarity.
pub fn build_groups(
    corpus: &[DatasetMeta],
    dictionary: &PrivacyDictionary,
    provider: &EmbeddingProvider,
    cfg: &GroupingConfig,
    cancel: Option<&CancelToken>,
) -> Result<GroupingResult, GroupingError> {
    if corpus.len() < 3 {
        return Err(GroupingError::TooFewDatasets(corpus.len()));
    }
    if cfg.weight_candidates.is_empty() {
        return Err(GroupingError::InvalidConfig("no weight candidates".into()));
    }
    if let Some(w) = cfg
        .weight_candidates
        .iter()
        .find(|w| !(**w >= 0.0 && w.is_finite()))
    {
        return Err(GroupingError::InvalidConfig(format!(
            "weight {w} must be finite and nonnegative"
        )));
    }

    let runs = cfg
        .weight_candidates
        .par_iter()
        .map(|&w| run_candidate(corpus, dictionary, provider, w, cfg, cancel))
        .collect::<Result<Vec<_>, _>>()?;

    let mut best: Option<&CandidateRun> = None;
    for run in &runs {
        let Some(q) = run.clustering.quality else {
            continue;
        };
        let beats = best
            .and_then(|b| b.clustering.quality)
            .is_none_or(|bq| q.calinski_harabasz > bq.calinski_harabasz);
        if beats {
            best = Some(run);
        }
    }

    let candidates = runs
        .iter()
        .map(|r| CandidateSummary {
            weight: r.weight,
            eps: r.clustering.eps,
            cluster_count: r.clustering.cluster_count,
            quality: r.clustering.quality,
        })
        .collect();
    let attrs = attribute_sets(corpus);

    let (chosen, quality, mut groups, noise) = match best {
        Some(run) => {
            let quality = run.clustering.quality;
            let mut by_cluster: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            let mut noise = Vec::new();
            for (i, label) in run.clustering.labeling.iter().enumerate() {
                match label {
                    Some(l) => by_cluster.entry(*l).or_default().push(i),
                    None => noise.push(corpus[i].id.clone()),
                }
            }
            let groups = by_cluster
                .iter()
                .map(|(&id, idx)| {
                    make_group(id, idx, corpus, &attrs, &run.coords, dictionary, quality)
                })
                .collect::<Vec<_>>();
            (run, quality, groups, noise)
        }
        None => {
            let run = &runs[0];
            let all: Vec<usize> = (0..corpus.len()).collect();
            let group = make_group(0, &all, corpus, &attrs, &run.coords, dictionary, None);
            (run, None, vec![group], Vec::new())
        }
    };
    rank_groups(&mut groups);

    Ok(GroupingResult {
        weight_chosen: chosen.weight,
        dictionary_version: dictionary.version(),
        quality,
        candidates,
        groups,
        noise,
        coords: chosen.coords.clone(),
    })
}
