//! Independent oracles shared by the integration and acceptance targets.
//!
//! The M4 recursion, the Fréchet sampler and the exact-profile test are
//! written out again from the model definition; crate functions appear only
//! as the subject of a comparison, so agreement is evidence, not echo.

#![allow(dead_code)]

pub mod props;

use cm3::simulate::{sample_spectral_many, simulate};
use cm3::theory::profile_probability;
use cm3::ParameterSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Unit-Fréchet by inversion of `exp(-1/z)`.
pub fn frechet(rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    -1.0 / u.ln()
}

/// Innovations `Z[s][j]` for `s` in `0..len` and the simulated `X[t][d]` for
/// `t` in `0..len - K + 1`, where row `t` uses `Z[t + K - 1 - i]` at lag `i`.
pub struct OracleSeries {
    pub z: Vec<Vec<f64>>,
    pub x: Vec<Vec<f64>>,
}

// Index loops mirror the model definition on purpose.
#[allow(clippy::needless_range_loop)]
pub fn simulate_oracle(params: &ParameterSet, t: usize, seed: u64) -> OracleSeries {
    let (k, l, d) = (params.k(), params.l(), params.d());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = t + k - 1;
    let z: Vec<Vec<f64>> = (0..len).map(|_| (0..l).map(|_| frechet(&mut rng)).collect()).collect();
    let x = (0..t)
        .map(|row| {
            (0..d)
                .map(|site| {
                    let mut m = f64::NEG_INFINITY;
                    for j in 0..l {
                        for i in 0..k {
                            m = m.max(params.get(j, i, site) * z[row + k - 1 - i][j]);
                        }
                    }
                    m
                })
                .collect()
        })
        .collect();
    OracleSeries { z, x }
}

/// Whether rows `start..start + K` are the exact `l`-profile driven by the
/// innovation entering at `start` with lag 0.
pub fn is_exact_profile(params: &ParameterSet, series: &OracleSeries, start: usize, l: usize) -> bool {
    let k = params.k();
    let zeta = series.z[start + k - 1][l];
    (0..k).all(|i| (0..params.d()).all(|site| series.x[start + i][site] == params.get(l, i, site) * zeta))
}

/// Empirical frequency of `l`-profiles over `n` windows, spaced `2K` apart.
pub fn profile_frequency(params: &ParameterSet, n: usize, seed: u64) -> Vec<f64> {
    let k = params.k();
    let series = simulate_oracle(params, 2 * k * n, seed);
    let mut counts = vec![0u64; params.l()];
    for w in 0..n {
        for (l, c) in counts.iter_mut().enumerate() {
            if is_exact_profile(params, &series, 2 * k * w, l) {
                *c += 1;
            }
        }
    }
    counts.iter().map(|&c| c as f64 / n as f64).collect()
}

/// Draws `X_0` directly from its `K·L` innovations and returns `(‖X_0‖, I, J)`
/// where `(I, J)` attains the sup at the site carrying the sup norm.
pub fn classify_x0(params: &ParameterSet, rng: &mut ChaCha8Rng) -> (f64, usize, usize) {
    let (k, l, d) = (params.k(), params.l(), params.d());
    let z: Vec<f64> = (0..k * l).map(|_| frechet(rng)).collect();
    let mut best = (f64::NEG_INFINITY, 0, 0);
    for j in 0..l {
        for i in 0..k {
            for site in 0..d {
                let v = params.get(j, i, site) * z[j * k + i];
                if v > best.0 {
                    best = (v, i, j);
                }
            }
        }
    }
    best
}

/// Total-variation distance between two probability vectors.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Kolmogorov–Smirnov statistic of `xs` against the unit-Fréchet CDF.
pub fn ks_frechet(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = (-1.0 / x).exp();
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Closed-form against empirical profile probability for one pattern.
#[derive(Debug, Clone)]
pub struct ProfileCheck {
    pub pattern: usize,
    pub closed: f64,
    pub empirical: f64,
    /// Binomial standard error at the closed-form value.
    pub se: f64,
}

impl ProfileCheck {
    pub fn z(&self) -> f64 {
        (self.empirical - self.closed) / self.se
    }
}

pub fn profile_check(params: &ParameterSet, n: usize, seed: u64) -> Vec<ProfileCheck> {
    profile_frequency(params, n, seed)
        .into_iter()
        .enumerate()
        .map(|(pattern, empirical)| {
            let closed = profile_probability(params, pattern).unwrap();
            ProfileCheck {
                pattern,
                closed,
                empirical,
                se: (closed * (1.0 - closed) / n as f64).sqrt(),
            }
        })
        .collect()
}

/// Law of `(I, J)` given `‖X_0‖ > threshold`, from `n` oracle exceedances,
/// against the law of `n` spectral draws; returns the total variation.
pub fn spectral_check(params: &ParameterSet, threshold: f64, n: usize, seed: u64) -> f64 {
    let (k, l) = (params.k(), params.l());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut conditional = vec![0.0; k * l];
    let mut hits = 0;
    while hits < n {
        let (norm, i, j) = classify_x0(params, &mut rng);
        if norm > threshold {
            conditional[j * k + i] += 1.0;
            hits += 1;
        }
    }
    let mut drawn = vec![0.0; k * l];
    for d in sample_spectral_many(params, 0, 0, n, seed).unwrap() {
        drawn[d.pattern * k + d.lag] += 1.0;
    }
    conditional.iter_mut().chain(drawn.iter_mut()).for_each(|v| *v /= n as f64);
    total_variation(&conditional, &drawn)
}

/// Largest per-site KS statistic of a noiseless simulation of length `n`.
pub fn margin_ks(params: &ParameterSet, n: usize, seed: u64) -> f64 {
    let sample = simulate(params, n, 0.0, seed).unwrap();
    (0..params.d()).map(|d| ks_frechet(&sample.column(d))).fold(0.0, f64::max)
}
