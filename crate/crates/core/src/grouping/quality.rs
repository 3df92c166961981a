//! Internal clustering indices: Calinski-Harabasz, silhouette and
//! Davies-Bouldin. Noise points are excluded from all three.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::tsne::Point;
use super::GroupingError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterQuality {
    /// Infinite when every cluster collapses onto its centroid.
    #[serde(with = "crate::serde_float")]
    pub calinski_harabasz: f64,
    pub silhouette: f64,
    /// Infinite when two cluster centroids coincide.
    #[serde(with = "crate::serde_float")]
    pub davies_bouldin: f64,
}

fn dist(a: &Point, b: &Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn sq(a: &Point, b: &Point) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn centroid(points: &[Point], members: &[usize]) -> Point {
    let n = members.len() as f64;
    let sx: f64 = members.iter().map(|&i| points[i][0]).sum();
    let sy: f64 = members.iter().map(|&i| points[i][1]).sum();
    [sx / n, sy / n]
}

pub fn clustering_quality(
    points: &[Point],
    labeling: &[Option<usize>],
) -> Result<ClusterQuality, GroupingError> {
    let mut clusters: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, label) in labeling.iter().enumerate() {
        if let Some(l) = label {
            clusters.entry(*l).or_default().push(i);
        }
    }
    let k = clusters.len();
    if k < 2 {
        return Err(GroupingError::InsufficientClusters(k));
    }
    let members: Vec<Vec<usize>> = clusters.into_values().collect();
    let m: usize = members.iter().map(Vec::len).sum();
    if m <= k {
        return Err(GroupingError::InvalidConfig(format!(
            "{k} clusters over {m} points leave no within-cluster spread"
        )));
    }
    let all: Vec<usize> = members.iter().flatten().copied().collect();
    let overall = centroid(points, &all);
    let centroids: Vec<Point> = members.iter().map(|c| centroid(points, c)).collect();

    let between: f64 = members
        .iter()
        .zip(&centroids)
        .map(|(c, ctr)| c.len() as f64 * sq(ctr, &overall))
        .sum();
    let within: f64 = members
        .iter()
        .zip(&centroids)
        .map(|(c, ctr)| c.iter().map(|&i| sq(&points[i], ctr)).sum::<f64>())
        .sum();
    let calinski_harabasz = if within == 0.0 {
        f64::INFINITY
    } else {
        (between / (k - 1) as f64) / (within / (m - k) as f64)
    };

    let mut silhouette_sum = 0.0;
    for (ci, cluster) in members.iter().enumerate() {
        if cluster.len() == 1 {
            continue;
        }
        for &i in cluster {
            let a = cluster
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| dist(&points[i], &points[j]))
                .sum::<f64>()
                / (cluster.len() - 1) as f64;
            let b = members
                .iter()
                .enumerate()
                .filter(|(cj, _)| *cj != ci)
                .map(|(_, other)| {
                    other
                        .iter()
                        .map(|&j| dist(&points[i], &points[j]))
                        .sum::<f64>()
                        / other.len() as f64
                })
                .fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            if denom > 0.0 {
                silhouette_sum += (b - a) / denom;
            }
        }
    }
    let silhouette = silhouette_sum / m as f64;

    let scatter: Vec<f64> = members
        .iter()
        .zip(&centroids)
        .map(|(c, ctr)| c.iter().map(|&i| dist(&points[i], ctr)).sum::<f64>() / c.len() as f64)
        .collect();
    let mut db_sum = 0.0;
    for i in 0..k {
        let worst = (0..k)
            .filter(|&j| j != i)
            .map(|j| {
                let d = dist(&centroids[i], &centroids[j]);
                if d == 0.0 {
                    f64::INFINITY
                } else {
                    (scatter[i] + scatter[j]) / d
                }
            })
            .fold(f64::NEG_INFINITY, f64::max);
        db_sum += worst;
    }
    let davies_bouldin = db_sum / k as f64;

    Ok(ClusterQuality {
        calinski_harabasz,
        silhouette,
        davies_bouldin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four_point(gap: f64) -> (Vec<Point>, Vec<Option<usize>>) {
        (
            vec![[0.0, 0.0], [0.0, 1.0], [gap, 0.0], [gap, 1.0]],
            vec![Some(0), Some(0), Some(1), Some(1)],
        )
    }

    #[test]
    fn hand_computed_four_point_fixture() {
        // centroids (0, .5) and (10, .5): B = 4 * 25 = 100, W = 4 * .25 = 1,
        // CH = (100 / 1) / (1 / 2) = 200. Each point: a = 1,
        // b = (10 + sqrt(101)) / 2. DB = (.5 + .5) / 10.
        let (p, l) = four_point(10.0);
        let q = clustering_quality(&p, &l).unwrap();
        let b = (10.0 + 101f64.sqrt()) / 2.0;
        assert!((q.calinski_harabasz - 200.0).abs() < 1e-9);
        assert!((q.silhouette - (b - 1.0) / b).abs() < 1e-9);
        assert!((q.davies_bouldin - 0.1).abs() < 1e-9);
    }

    #[test]
    fn noise_is_ignored() {
        let (mut p, mut l) = four_point(10.0);
        p.push([500.0, -40.0]);
        l.push(None);
        let (p0, l0) = four_point(10.0);
        assert_eq!(
            clustering_quality(&p, &l).unwrap(),
            clustering_quality(&p0, &l0).unwrap()
        );
    }

    #[test]
    fn silhouette_tends_to_one_with_separation() {
        let near = clustering_quality(&four_point(10.0).0, &four_point(10.0).1).unwrap();
        let far = clustering_quality(&four_point(1e6).0, &four_point(1e6).1).unwrap();
        assert!(far.silhouette > near.silhouette);
        assert!(1.0 - far.silhouette < 1e-5);
    }

    #[test]
    fn needs_two_clusters() {
        let p = [[0.0, 0.0], [1.0, 1.0]];
        assert!(matches!(
            clustering_quality(&p, &[Some(0), Some(0)]),
            Err(GroupingError::InsufficientClusters(1))
        ));
        assert!(matches!(
            clustering_quality(&p, &[None, None]),
            Err(GroupingError::InsufficientClusters(0))
        ));
    }

    #[test]
    fn tight_clusters_have_infinite_ch() {
        let p = [[0.0, 0.0], [0.0, 0.0], [5.0, 5.0], [5.0, 5.0]];
        let q = clustering_quality(&p, &[Some(0), Some(0), Some(1), Some(1)]).unwrap();
        assert!(q.calinski_harabasz.is_infinite());
        assert_eq!(q.davies_bouldin, 0.0);
        let json = serde_json::to_string(&q).unwrap();
        let back: ClusterQuality = serde_json::from_str(&json).unwrap();
        assert_eq!(back, q);
    }
}
