//! Closed-form quantities: block-profile probabilities, their bounds, the
//! extremal index and the sample-size rule, plus a Monte Carlo estimator of
//! the extremal index.
//!
//! A length-`K` block starting at `t` is a *profile of type* `l*` when
//! `(X_t, …, X_{t+K-1}) = Z_t^{(l*)} (a_0^{(l*)}, …, a_{K-1}^{(l*)})` at every
//! site. Its probability is
//!
//! ```text
//! p^{(l*)} = 1 / (1 + Σ_{(k, l) ≠ (K, l*)} 1 / m_k^{(l; l*)})
//!          = harm(m) / ((2K - 1) L)
//! ```
//!
//! where `m_k^{(l; l*)}` is the minimum over sites and over lag pairs
//! `(u, v)` with `v - u = K - k` of `a_u^{(l*)} / a_v^{(l)}`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ParameterSet, VariationBound};
use crate::rng;
use crate::simulate::Stream;

/// Minima `m[k][l]` for one target pattern, `k` in `0..2K-1` (0-based).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimaMatrix {
    pub target: usize,
    pub k: usize,
    pub l: usize,
    /// Row-major `(2K - 1) × L`.
    pub entries: Vec<f64>,
}

impl MinimaMatrix {
    /// Wraps raw entries, e.g. an initial state of the frequency-matching
    /// iteration that was not derived from shapes.
    pub fn from_entries(target: usize, k: usize, l: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != (2 * k - 1) * l || target >= l {
            return Err(Error::Dimension(format!(
                "{} entries for K={k}, L={l}, target {target}",
                entries.len()
            )));
        }
        if let Some(v) = entries.iter().find(|v| !(**v > 0.0)) {
            return Err(Error::NonPositive {
                value: *v,
                location: "minima matrix".into(),
            });
        }
        Ok(Self { target, k, l, entries })
    }

    #[inline]
    pub fn get(&self, kk: usize, l: usize) -> f64 {
        self.entries[kk * self.l + l]
    }

    /// Sum of reciprocals of every entry.
    pub fn reciprocal_sum(&self) -> f64 {
        self.entries.iter().map(|m| 1.0 / m).sum()
    }

    /// Harmonic mean of the `(2K - 1) L` entries.
    pub fn harmonic_mean(&self) -> f64 {
        harmonic_mean(&self.entries)
    }

    /// `1 / Σ 1/m`, equal to `harm / ((2K - 1) L)`.
    pub fn probability(&self) -> f64 {
        1.0 / self.reciprocal_sum()
    }
}

pub fn harmonic_mean(xs: &[f64]) -> f64 {
    xs.len() as f64 / xs.iter().map(|x| 1.0 / x).sum::<f64>()
}

/// Minima matrix of target `target` for possibly un-normalized weights.
pub fn minima_matrix(shapes: &ParameterSet, target: usize) -> Result<MinimaMatrix> {
    let (k, l, d) = (shapes.k(), shapes.l(), shapes.d());
    if k == 0 || l == 0 || d == 0 || shapes.values().len() != k * l * d || target >= l {
        return Err(Error::Dimension(format!(
            "minima matrix of target {target} for K={k}, L={l}, D={d}"
        )));
    }
    if let Some((idx, v)) = shapes.values().iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NonPositive {
            value: *v,
            location: format!("flat index {idx}"),
        });
    }
    let rows = 2 * k - 1;
    let mut entries = vec![f64::INFINITY; rows * l];
    for kk in 0..rows {
        // v - u = K - 1 - kk
        let shift = k as isize - 1 - kk as isize;
        for u in 0..k {
            let v = u as isize + shift;
            if v < 0 || v >= k as isize {
                continue;
            }
            let num = shapes.lag(target, u);
            for other in 0..l {
                let den = shapes.lag(other, v as usize);
                let m = num
                    .iter()
                    .zip(den)
                    .map(|(a, b)| a / b)
                    .fold(f64::INFINITY, f64::min);
                let slot = &mut entries[kk * l + other];
                *slot = slot.min(m);
            }
        }
    }
    entries[(k - 1) * l + target] = 1.0;
    Ok(MinimaMatrix {
        target,
        k,
        l,
        entries,
    })
}

/// All `L` minima matrices of a weight set.
pub fn minima_matrices(shapes: &ParameterSet) -> Result<Vec<MinimaMatrix>> {
    (0..shapes.l()).map(|t| minima_matrix(shapes, t)).collect()
}

/// `p^{(l*)}` for a valid standard parameter set.
pub fn profile_probability(params: &ParameterSet, target: usize) -> Result<f64> {
    params.ensure_valid()?;
    Ok(minima_matrix(params, target)?.probability())
}

/// Per-pattern and global bounds on the profile probabilities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbabilityBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// `1 / (C (2K - 1))`, a lower bound on the total `Σ_l p^{(l)}`.
    pub global_lower: f64,
}

/// Exact profile probabilities with their bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileProbabilities {
    pub p: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub global_lower: f64,
}

pub fn profile_probability_bounds(c: &VariationBound, k: usize, l: usize) -> ProbabilityBounds {
    let blocks = (2 * k - 1) as f64;
    let n = blocks * l as f64;
    ProbabilityBounds {
        lower: c.per_pattern.iter().map(|c| 1.0 / (c * n)).collect(),
        upper: c.per_pattern.iter().map(|c| c / n).collect(),
        global_lower: global_lower_bound(c.global, k),
    }
}

/// `1 / (C (2K - 1))`, independent of `L` and of the number of sites.
pub fn global_lower_bound(c: f64, k: usize) -> f64 {
    1.0 / (c * (2 * k - 1) as f64)
}

pub fn profile_probabilities(params: &ParameterSet) -> Result<ProfileProbabilities> {
    params.ensure_valid()?;
    let p = minima_matrices(params)?
        .iter()
        .map(MinimaMatrix::probability)
        .collect();
    let bounds = profile_probability_bounds(&params.variation_bound()?, params.k(), params.l());
    Ok(ProfileProbabilities {
        p,
        lower: bounds.lower,
        upper: bounds.upper,
        global_lower: bounds.global_lower,
    })
}

/// Sample size `ceil(K - 1 + C M (2K - 1))` needed to expect `M`
/// repetitions of a given profile when only `C` is known.
pub fn min_sample_size(c: f64, k: usize, m: usize) -> u64 {
    let t = (k as f64 - 1.0) + c * m as f64 * (2 * k - 1) as f64;
    t.ceil() as u64
}

/// Extremal index of the sup-norm series:
/// `Σ_j max_i ‖a_i^{(j)}‖ / Σ_j Σ_i ‖a_i^{(j)}‖`.
pub fn extremal_index(params: &ParameterSet) -> Result<f64> {
    params.ensure_valid()?;
    let mut top = 0.0;
    let mut total = 0.0;
    for j in 0..params.l() {
        let norms: Vec<f64> = (0..params.k()).map(|i| params.sup_norm(j, i)).collect();
        top += norms.iter().copied().fold(0.0, f64::max);
        total += norms.iter().sum::<f64>();
    }
    Ok(top / total)
}

/// `Σ_j Σ_i ‖a_i^{(j)}‖`, the scale of the Fréchet law of `‖X_t‖`.
pub fn sup_norm_scale(params: &ParameterSet) -> f64 {
    (0..params.l())
        .flat_map(|j| (0..params.k()).map(move |i| (j, i)))
        .map(|(j, i)| params.sup_norm(j, i))
        .sum()
}

/// Monte Carlo estimates of the extremal index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McExtremalIndex {
    /// `-x ln P̂(max_{1..n} Y_t <= n x)` with `Y_t = ‖X_t‖ / scale`.
    pub max_route: f64,
    /// Inverse mean number of exceedances per exceeding block.
    pub cluster_route: Option<f64>,
    pub fraction_below: f64,
    pub exceeding_blocks: u64,
    pub exceedances: u64,
}

/// Number of sub-blocks each trial series is cut into for the cluster route.
pub const CLUSTER_BLOCKS_PER_TRIAL: usize = 50;

/// Estimates the extremal index from `trials` independent series of length
/// `n` at level `x`.
///
/// The sup-norm series is divided by its Fréchet scale first, so its margins
/// are unit-Fréchet and `P(max <= n x) -> exp(-θ / x)`. The cluster route
/// reuses the same series cut into [`CLUSTER_BLOCKS_PER_TRIAL`] blocks and
/// the same threshold `n x`.
pub fn mc_extremal_index(
    params: &ParameterSet,
    n: usize,
    x: f64,
    trials: usize,
    seed: u64,
) -> Result<McExtremalIndex> {
    params.ensure_valid()?;
    if n == 0 || trials == 0 || !(x > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need n >= 1, trials >= 1, x > 0 (n={n}, trials={trials}, x={x})"
        )));
    }
    let scale = sup_norm_scale(params);
    let level = n as f64 * x * scale;
    let block = (n / CLUSTER_BLOCKS_PER_TRIAL).max(1);
    let (below, blocks, exceed) = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut stream = Stream::new(params, rng::stream(seed, "mc-extremal-index", trial as u64));
            let mut row = vec![0.0; params.d()];
            let mut max = f64::NEG_INFINITY;
            let (mut blocks, mut exceed, mut in_block) = (0u64, 0u64, 0u64);
            for t in 0..n {
                let v = stream.next_sup(&mut row);
                max = max.max(v);
                if v > level {
                    in_block += 1;
                }
                if (t + 1) % block == 0 || t + 1 == n {
                    if in_block > 0 {
                        blocks += 1;
                        exceed += in_block;
                    }
                    in_block = 0;
                }
            }
            (u64::from(max <= level), blocks, exceed)
        })
        .reduce(|| (0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    if below == 0 {
        return Err(Error::InvalidArgument(format!(
            "no trial had max <= n x (n={n}, x={x}); increase x"
        )));
    }
    let fraction = below as f64 / trials as f64;
    Ok(McExtremalIndex {
        max_route: -x * fraction.ln(),
        cluster_route: (exceed > 0).then(|| blocks as f64 / exceed as f64),
        fraction_below: fraction,
        exceeding_blocks: blocks,
        exceedances: exceed,
    })
}
