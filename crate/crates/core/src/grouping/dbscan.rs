//! DBSCAN over 2-D points with a uniform-grid neighbour index.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::quality::{clustering_quality, ClusterQuality};
use super::tsne::Point;
use super::GroupingError;

/// Cluster id per point; `None` marks noise.
pub type Labeling = Vec<Option<usize>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Eps {
    Fixed(f64),
    /// Try each quantile of the nonzero pairwise distances and keep the
    /// labeling with the best Calinski-Harabasz index.
    AutoSweep(Vec<f64>),
}

impl Eps {
    pub fn default_sweep() -> Self {
        Eps::AutoSweep((1..=9).map(|i| i as f64 / 10.0).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringConfig {
    pub min_pts: usize,
    pub eps: Eps,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        Self {
            min_pts: 2,
            eps: Eps::default_sweep(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub labeling: Labeling,
    pub eps: f64,
    pub cluster_count: usize,
    pub quality: Option<ClusterQuality>,
}

fn within(a: &Point, b: &Point, eps: f64) -> bool {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy <= eps * eps
}

struct Grid {
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl Grid {
    fn new(points: &[Point], eps: f64) -> Self {
        // slightly wider than eps so rounding never pushes a neighbour two cells away
        let cell = eps * (1.0 + 1e-6);
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            buckets.entry(Self::key(p, cell)).or_default().push(i);
        }
        Self { cell, buckets }
    }

    fn key(p: &Point, cell: f64) -> (i64, i64) {
        ((p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64)
    }

    fn neighbours(&self, points: &[Point], i: usize, eps: f64) -> Vec<usize> {
        let (cx, cy) = Self::key(&points[i], self.cell);
        let mut out = Vec::new();
        for dx in -1..=1i64 {
            for dy in -1..=1i64 {
                let k = (cx.saturating_add(dx), cy.saturating_add(dy));
                if let Some(bucket) = self.buckets.get(&k) {
                    out.extend(
                        bucket
                            .iter()
                            .copied()
                            .filter(|&j| within(&points[i], &points[j], eps)),
                    );
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Standard DBSCAN. A point is core when at least `min_pts` points,
/// itself included, lie within `eps`. Clusters are numbered in order of
/// their lowest-index core point; a border point joins the first cluster
/// that reaches it.
pub fn dbscan(points: &[Point], eps: f64, min_pts: usize) -> Result<Labeling, GroupingError> {
    if min_pts < 2 {
        return Err(GroupingError::InvalidConfig(format!(
            "min_pts must be at least 2, got {min_pts}"
        )));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(GroupingError::InvalidConfig(format!(
            "eps must be positive, got {eps}"
        )));
    }
    let grid = Grid::new(points, eps);
    let neighbours: Vec<Vec<usize>> = (0..points.len())
        .map(|i| grid.neighbours(points, i, eps))
        .collect();
    let core: Vec<bool> = neighbours.iter().map(|n| n.len() >= min_pts).collect();

    let mut labels: Labeling = vec![None; points.len()];
    let mut next_id = 0;
    let mut queue = VecDeque::new();
    for start in 0..points.len() {
        if !core[start] || labels[start].is_some() {
            continue;
        }
        let id = next_id;
        next_id += 1;
        labels[start] = Some(id);
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            for &q in &neighbours[p] {
                if labels[q].is_none() {
                    labels[q] = Some(id);
                    if core[q] {
                        queue.push_back(q);
                    }
                }
            }
        }
    }
    Ok(labels)
}

pub fn cluster_count(labeling: &[Option<usize>]) -> usize {
    labeling.iter().flatten().max().map_or(0, |m| m + 1)
}

/// Linear-interpolated quantile of sorted values.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Grid of eps values from quantiles of the nonzero pairwise distances.
pub fn sweep_grid(points: &[Point], quantiles: &[f64]) -> Vec<f64> {
    let mut d = Vec::new();
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let v = ((points[i][0] - points[j][0]).powi(2) + (points[i][1] - points[j][1]).powi(2))
                .sqrt();
            if v > 0.0 {
                d.push(v);
            }
        }
    }
    if d.is_empty() {
        return vec![1.0];
    }
    d.sort_by(f64::total_cmp);
    let mut grid: Vec<f64> = quantiles.iter().map(|&q| quantile(&d, q)).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

fn evaluate(points: &[Point], eps: f64, min_pts: usize) -> Result<Clustering, GroupingError> {
    let labeling = dbscan(points, eps, min_pts)?;
    let k = cluster_count(&labeling);
    let quality = if k >= 2 {
        clustering_quality(points, &labeling).ok()
    } else {
        None
    };
    Ok(Clustering {
        labeling,
        eps,
        cluster_count: k,
        quality,
    })
}

/// Resolve eps per the config and cluster.
pub fn cluster(points: &[Point], cfg: &ClusteringConfig) -> Result<Clustering, GroupingError> {
    match &cfg.eps {
        Eps::Fixed(eps) => evaluate(points, *eps, cfg.min_pts),
        Eps::AutoSweep(quantiles) => {
            let grid = sweep_grid(points, quantiles);
            let mut best: Option<Clustering> = None;
            for &eps in &grid {
                let c = evaluate(points, eps, cfg.min_pts)?;
                let better = match (&c.quality, best.as_ref().and_then(|b| b.quality.as_ref())) {
                    (Some(q), Some(bq)) => q.calinski_harabasz > bq.calinski_harabasz,
                    (Some(_), None) => true,
                    _ => false,
                };
                if better {
                    best = Some(c);
                }
            }
            match best {
                Some(b) => Ok(b),
                None => evaluate(points, grid[grid.len() / 2], cfg.min_pts),
            }
        }
    }
}
