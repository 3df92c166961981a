//! Exact t-SNE over a precomputed distance matrix.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::GroupingError;
use crate::embedding::DistanceMatrix;
use crate::CancelToken;

const PERPLEXITY_TOLERANCE: f64 = 1e-5;
const PERPLEXITY_STEPS: usize = 100;
const MIN_GAIN: f64 = 0.01;
const INIT_STD: f64 = 1e-4;

pub type Point = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionConfig {
    /// `None` picks `min(30, max(2, (n - 1) / 3))`.
    pub perplexity: Option<f64>,
    pub iterations: usize,
    pub early_exaggeration: f64,
    pub exaggeration_iterations: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        Self {
            perplexity: None,
            iterations: 1000,
            early_exaggeration: 12.0,
            exaggeration_iterations: 250,
            learning_rate: 200.0,
            seed: 0,
        }
    }
}

impl ProjectionConfig {
    pub fn perplexity_for(&self, n: usize) -> f64 {
        self.perplexity
            .unwrap_or_else(|| ((n as f64 - 1.0) / 3.0).clamp(2.0, 30.0))
    }
}

fn validate(distances: &DistanceMatrix, cfg: &ProjectionConfig) -> Result<f64, GroupingError> {
    let n = distances.len();
    if n < 3 {
        return Err(GroupingError::TooFewPoints(n));
    }
    for i in 0..n {
        if distances.get(i, i) != 0.0 {
            return Err(GroupingError::InvalidDistances(format!(
                "nonzero diagonal at {i}"
            )));
        }
        for j in (i + 1)..n {
            let d = distances.get(i, j);
            if !d.is_finite() || d < 0.0 || d != distances.get(j, i) {
                return Err(GroupingError::InvalidDistances(format!(
                    "entry ({i}, {j}) is negative, non-finite or asymmetric"
                )));
            }
        }
    }
    let perplexity = cfg.perplexity_for(n);
    if !(perplexity > 0.0 && perplexity < n as f64) {
        return Err(GroupingError::InvalidConfig(format!(
            "perplexity {perplexity} must lie in (0, {n})"
        )));
    }
    if cfg.iterations < cfg.exaggeration_iterations || cfg.iterations < 250 {
        return Err(GroupingError::InvalidConfig(format!(
            "iterations {} must be at least 250 and cover the exaggeration phase",
            cfg.iterations
        )));
    }
    Ok(perplexity)
}

/// Row-conditional affinities calibrated to the target perplexity by
/// bisection on the precision, then symmetrized and normalized.
fn joint_probabilities(distances: &DistanceMatrix, perplexity: f64) -> Vec<f64> {
    let n = distances.len();
    let target = perplexity.ln();
    let mut p = vec![0.0; n * n];
    let mut row = vec![0.0; n];

    for i in 0..n {
        let d = distances.row(i);
        let d_min = (0..n)
            .filter(|&j| j != i)
            .map(|j| d[j])
            .fold(f64::INFINITY, f64::min);
        let mut beta = 1.0;
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;

        for _ in 0..PERPLEXITY_STEPS {
            let mut sum = 0.0;
            let mut weighted = 0.0;
            for j in 0..n {
                row[j] = if j == i {
                    0.0
                } else {
                    (-(d[j] - d_min) * beta).exp()
                };
                sum += row[j];
                weighted += (d[j] - d_min) * row[j];
            }
            let entropy = sum.ln() + beta * weighted / sum;
            row.iter_mut().for_each(|v| *v /= sum);

            let diff = entropy - target;
            if diff.abs() <= PERPLEXITY_TOLERANCE {
                break;
            }
            if diff > 0.0 {
                lo = beta;
                beta = if hi.is_finite() {
                    (beta + hi) / 2.0
                } else {
                    beta * 2.0
                };
            } else {
                hi = beta;
                beta = if lo.is_finite() {
                    (beta + lo) / 2.0
                } else {
                    beta / 2.0
                };
            }
        }
        p[i * n..(i + 1) * n].copy_from_slice(&row);
    }

    let mut joint = vec![0.0; n * n];
    let scale = 2.0 * n as f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                joint[i * n + j] = ((p[i * n + j] + p[j * n + i]) / scale).max(1e-12);
            }
        }
    }
    joint
}

fn center(y: &mut [Point]) {
    let n = y.len() as f64;
    let mx = y.iter().map(|p| p[0]).sum::<f64>() / n;
    let my = y.iter().map(|p| p[1]).sum::<f64>() / n;
    for p in y.iter_mut() {
        p[0] -= mx;
        p[1] -= my;
    }
}

/// Embed `n >= 3` items into the plane so that neighbours under the given
/// distances stay neighbours. Deterministic for a fixed seed.
///
/// Fails with [`GroupingError::DegenerateInput`] when every pairwise
/// distance is zero; callers place all items at the origin in that case.
pub fn project_2d(
    distances: &DistanceMatrix,
    cfg: &ProjectionConfig,
    cancel: Option<&CancelToken>,
) -> Result<Vec<Point>, GroupingError> {
    let perplexity = validate(distances, cfg)?;
    let n = distances.len();
    if (0..n).all(|i| distances.row(i).iter().all(|&d| d == 0.0)) {
        return Err(GroupingError::DegenerateInput);
    }

    let p = joint_probabilities(distances, perplexity);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = Normal::new(0.0, INIT_STD).expect("valid normal");
    let mut y: Vec<Point> = (0..n)
        .map(|_| [normal.sample(&mut rng), normal.sample(&mut rng)])
        .collect();
    let mut update = vec![[0.0; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut grad = vec![[0.0; 2]; n];
    let mut num = vec![0.0; n * n];

    for iter in 0..cfg.iterations {
        if cancel.is_some_and(CancelToken::is_cancelled) {
            return Err(GroupingError::Cancelled);
        }
        let (exaggeration, momentum) = if iter < cfg.exaggeration_iterations {
            (cfg.early_exaggeration, 0.5)
        } else {
            (1.0, 0.8)
        };

        let mut z = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = y[i][0] - y[j][0];
                let dy = y[i][1] - y[j][1];
                let q = 1.0 / (1.0 + dx * dx + dy * dy);
                num[i * n + j] = q;
                num[j * n + i] = q;
                z += 2.0 * q;
            }
        }

        for i in 0..n {
            let mut g = [0.0; 2];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let q = num[i * n + j];
                let coeff = (exaggeration * p[i * n + j] - q / z) * q;
                g[0] += coeff * (y[i][0] - y[j][0]);
                g[1] += coeff * (y[i][1] - y[j][1]);
            }
            grad[i] = [4.0 * g[0], 4.0 * g[1]];
        }

        for i in 0..n {
            for k in 0..2 {
                gains[i][k] = if update[i][k] * grad[i][k] < 0.0 {
                    gains[i][k] + 0.2
                } else {
                    (gains[i][k] * 0.8).max(MIN_GAIN)
                };
                update[i][k] =
                    momentum * update[i][k] - cfg.learning_rate * gains[i][k] * grad[i][k];
                y[i][k] += update[i][k];
            }
        }
        center(&mut y);
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn euclid(a: Point, b: Point) -> f64 {
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
    }

    fn two_blocks(k: usize) -> DistanceMatrix {
        let n = 2 * k;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            0.0
                        } else if (i < k) == (j < k) {
                            0.01
                        } else {
                            1.0
                        }
                    })
                    .collect()
            })
            .collect();
        DistanceMatrix::from_rows(&rows)
    }

    /// Oracle: search 3600 directions for a line that puts every point of
    /// one block strictly on one side.
    fn linearly_separable(points: &[Point], in_first: impl Fn(usize) -> bool) -> bool {
        (0..3600).any(|step| {
            let theta = step as f64 * std::f64::consts::PI / 1800.0;
            let (c, s) = (theta.cos(), theta.sin());
            let proj = |p: &Point| p[0] * c + p[1] * s;
            let max_a = (0..points.len())
                .filter(|&i| in_first(i))
                .map(|i| proj(&points[i]))
                .fold(f64::NEG_INFINITY, f64::max);
            let min_b = (0..points.len())
                .filter(|&i| !in_first(i))
                .map(|i| proj(&points[i]))
                .fold(f64::INFINITY, f64::min);
            max_a < min_b
        })
    }

    #[test]
    fn equilateral_triangle_stays_symmetric() {
        let m = DistanceMatrix::from_rows(&[
            vec![0.0, 1.0, 1.0],
            vec![1.0, 0.0, 1.0],
            vec![1.0, 1.0, 0.0],
        ]);
        let y = project_2d(&m, &ProjectionConfig::default(), None).unwrap();
        let d: [f64; 3] = [euclid(y[0], y[1]), euclid(y[0], y[2]), euclid(y[1], y[2])];
        let max = d.iter().copied().fold(f64::MIN, f64::max);
        let min = d.iter().copied().fold(f64::MAX, f64::min);
        assert!(max <= min * 1.1, "{d:?}");
    }

    #[test]
    fn deterministic_for_seed() {
        let m = two_blocks(5);
        let cfg = ProjectionConfig {
            seed: 42,
            ..Default::default()
        };
        let a = project_2d(&m, &cfg, None).unwrap();
        let b = project_2d(&m, &cfg, None).unwrap();
        let bits = |v: &[Point]| {
            v.iter()
                .flat_map(|p| [p[0].to_bits(), p[1].to_bits()])
                .collect::<Vec<_>>()
        };
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn output_is_centered() {
        let y = project_2d(&two_blocks(4), &ProjectionConfig::default(), None).unwrap();
        let n = y.len() as f64;
        assert!((y.iter().map(|p| p[0]).sum::<f64>() / n).abs() < 1e-6);
        assert!((y.iter().map(|p| p[1]).sum::<f64>() / n).abs() < 1e-6);
    }

    #[test]
    fn separated_blocks_stay_separable() {
        let y = project_2d(&two_blocks(6), &ProjectionConfig::default(), None).unwrap();
        assert!(linearly_separable(&y, |i| i < 6));
    }

    #[test]
    fn all_zero_distances_are_degenerate() {
        let m = DistanceMatrix::zeros(4);
        assert!(matches!(
            project_2d(&m, &ProjectionConfig::default(), None),
            Err(GroupingError::DegenerateInput)
        ));
    }

    #[test]
    fn rejects_bad_inputs() {
        let cfg = ProjectionConfig::default();
        assert!(matches!(
            project_2d(&DistanceMatrix::zeros(2), &cfg, None),
            Err(GroupingError::TooFewPoints(2))
        ));
        let asym = DistanceMatrix::from_rows(&[
            vec![0.0, 1.0, 1.0],
            vec![0.5, 0.0, 1.0],
            vec![1.0, 1.0, 0.0],
        ]);
        assert!(matches!(
            project_2d(&asym, &cfg, None),
            Err(GroupingError::InvalidDistances(_))
        ));
        assert!(matches!(
            project_2d(
                &two_blocks(2),
                &ProjectionConfig {
                    perplexity: Some(4.0),
                    ..Default::default()
                },
                None
            ),
            Err(GroupingError::InvalidConfig(_))
        ));
        assert!(matches!(
            project_2d(
                &two_blocks(2),
                &ProjectionConfig {
                    iterations: 100,
                    ..Default::default()
                },
                None
            ),
            Err(GroupingError::InvalidConfig(_))
        ));
    }

    #[test]
    fn honours_cancellation() {
        let token = CancelToken::new();
        token.cancel();
        assert!(matches!(
            project_2d(&two_blocks(3), &ProjectionConfig::default(), Some(&token)),
            Err(GroupingError::Cancelled)
        ));
    }

    #[test]
    fn default_perplexity_rule() {
        let cfg = ProjectionConfig::default();
        assert_eq!(cfg.perplexity_for(3), 2.0);
        assert_eq!(cfg.perplexity_for(31), 10.0);
        assert_eq!(cfg.perplexity_for(500), 30.0);
    }
}
