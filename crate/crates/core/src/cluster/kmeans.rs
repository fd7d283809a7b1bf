//! Lloyd's k-means, with squared Euclidean distance or with correlation
//! distance on standardized rows.

use rand::seq::index;

use crate::rng;

pub const MAX_ITER: usize = 300;

/// Partition plus the objective after every update step.
pub struct KMeansFit {
    pub labels: Vec<usize>,
    pub objective: Vec<f64>,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Centers `row` and scales it to unit norm; zero-variance rows become zero.
pub fn standardize(row: &[f64]) -> Vec<f64> {
    let n = row.len() as f64;
    let mean = row.iter().sum::<f64>() / n;
    let centered: Vec<f64> = row.iter().map(|v| v - mean).collect();
    let norm = centered.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 1e-12 * (1.0 + mean.abs()) {
        centered.into_iter().map(|v| v / norm).collect()
    } else {
        vec![0.0; row.len()]
    }
}

/// `1 - x·c` for standardized `x` and `c`; 1 when either side is flat.
fn correlation_distance_std(x: &[f64], cs: &[f64]) -> f64 {
    if x.iter().all(|v| *v == 0.0) || cs.iter().all(|v| *v == 0.0) {
        return 1.0;
    }
    1.0 - x.iter().zip(cs).map(|(a, b)| a * b).sum::<f64>()
}

/// `1 - corr(x, c)` for a standardized row `x`; 1 when either side is flat.
pub fn correlation_distance(x: &[f64], c: &[f64]) -> f64 {
    correlation_distance_std(x, &standardize(c))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    SquaredEuclidean,
    Correlation,
}

/// Runs k-means on `rows` (already standardized for [`Metric::Correlation`]).
pub fn kmeans(rows: &[Vec<f64>], k: usize, metric: Metric, seed: u64) -> KMeansFit {
    let n = rows.len();
    let dim = rows[0].len();
    // Centroids as compared: raw, or standardized for correlation.
    let prepare = |c: &[f64]| match metric {
        Metric::SquaredEuclidean => c.to_vec(),
        Metric::Correlation => standardize(c),
    };
    let dist = |x: &[f64], c: &[f64]| match metric {
        Metric::SquaredEuclidean => sq_dist(x, c),
        Metric::Correlation => correlation_distance_std(x, c),
    };
    let mut r = rng::stream(seed, "kmeans-init", k as u64);
    let mut init: Vec<usize> = index::sample(&mut r, n, k).into_vec();
    init.sort_unstable();
    let mut centroids: Vec<Vec<f64>> = init.iter().map(|&i| rows[i].clone()).collect();
    let mut labels = vec![usize::MAX; n];
    let mut objective = Vec::new();
    let mut iterations = 0;

    for _ in 0..MAX_ITER {
        iterations += 1;
        let mut changed = false;
        let mut cost = vec![0.0; n];
        let prepared: Vec<Vec<f64>> = centroids.iter().map(|c| prepare(c)).collect();
        for (q, row) in rows.iter().enumerate() {
            let (best, d) = prepared
                .iter()
                .enumerate()
                .map(|(c, cen)| (c, dist(row, cen)))
                .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
            if labels[q] != best {
                labels[q] = best;
                changed = true;
            }
            cost[q] = d;
        }
        // Reseed empty clusters with the point farthest from its centroid.
        let mut sizes = vec![0usize; k];
        for &l in &labels {
            sizes[l] += 1;
        }
        for c in 0..k {
            if sizes[c] > 0 {
                continue;
            }
            let far = (0..n)
                .filter(|&q| sizes[labels[q]] > 1)
                .fold(None, |acc: Option<usize>, q| match acc {
                    Some(b) if cost[b] >= cost[q] => Some(b),
                    _ => Some(q),
                });
            if let Some(q) = far {
                sizes[labels[q]] -= 1;
                labels[q] = c;
                sizes[c] = 1;
                cost[q] = 0.0;
                changed = true;
            }
        }
        for (c, cen) in centroids.iter_mut().enumerate() {
            let mut sum = vec![0.0; dim];
            let mut count = 0usize;
            for (q, row) in rows.iter().enumerate() {
                if labels[q] == c {
                    count += 1;
                    for (s, v) in sum.iter_mut().zip(row) {
                        *s += v;
                    }
                }
            }
            if count > 0 {
                *cen = sum.into_iter().map(|s| s / count as f64).collect();
            }
        }
        let prepared: Vec<Vec<f64>> = centroids.iter().map(|c| prepare(c)).collect();
        let j: f64 = rows
            .iter()
            .zip(&labels)
            .map(|(row, &l)| dist(row, &prepared[l]))
            .sum();
        objective.push(j);
        if !changed {
            break;
        }
    }
    KMeansFit {
        labels,
        objective,
        iterations,
    }
}
