//! Recovery of the parameter functions from a clustering of block shapes.
//!
//! Cluster representatives give the shapes `a_{i,0}^{(j)}` and cluster sizes
//! give the frequencies `f^{(j)}`. Each shape `j` is then rescaled by a
//! factor `c_j` until the profile probabilities `p^{(j)}` of the rescaled
//! shapes are proportional to `f`:
//!
//! ```text
//! c_j <- c_j · f^{(j)} / p_n^{(j)}
//! ```
//!
//! Rescaling pattern `l` by `c_l` multiplies the minima `m_k^{(l; l*)}` by
//! `c_{l*} / c_l`, so the iteration runs on the initial minima matrices and
//! the scale vector alone. A final per-site factor `α(x_d)` restores
//! standardization.

use serde::{Deserialize, Serialize};

use crate::blocks::{extract_blocks, QRule, Rescoring};
use crate::cluster::{self, build_table, Algorithm, ClusterModel, ShapeTable};
use crate::decluster::{estimate_k, KEstimator};
use crate::error::{Error, Result, Stage};
use crate::evaluate::EstimationReport;
use crate::model::ParameterSet;
use crate::simulate::SeriesSample;
use crate::theory::{minima_matrices, MinimaMatrix};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 1000;
/// Entries below this are raised to it before frequency matching.
pub const POSITIVITY_FLOOR: f64 = 1e-9;

pub const FLAG_NOT_CONVERGED: &str = "frequency-match-not-converged";
pub const FLAG_CLAMPED: &str = "clamped-nonpositive-shape";

/// `L̂` shapes of size `K × D` with their relative frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeSet {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "D")]
    pub d: usize,
    /// `shapes[j][i][d]`, strictly positive.
    pub shapes: Vec<Vec<Vec<f64>>>,
    /// Sums to 1.
    pub frequencies: Vec<f64>,
    /// Number of entries raised to [`POSITIVITY_FLOOR`].
    pub clamped: usize,
}

impl ShapeSet {
    pub fn new(shapes: Vec<Vec<Vec<f64>>>, frequencies: Vec<f64>) -> Result<Self> {
        let k = shapes.first().map_or(0, Vec::len);
        let d = shapes.first().and_then(|s| s.first()).map_or(0, Vec::len);
        if shapes.is_empty() || k == 0 || d == 0 || shapes.len() != frequencies.len() {
            return Err(Error::Dimension(format!(
                "{} shapes with {} frequencies",
                shapes.len(),
                frequencies.len()
            )));
        }
        if shapes.iter().any(|s| s.len() != k || s.iter().any(|r| r.len() != d)) {
            return Err(Error::Dimension("shapes of unequal size".into()));
        }
        if let Some(v) = shapes.iter().flatten().flatten().find(|v| !(**v > 0.0)) {
            return Err(Error::NonPositive {
                value: *v,
                location: "shape".into(),
            });
        }
        if let Some(v) = frequencies.iter().find(|v| !(**v > 0.0)) {
            return Err(Error::NonPositive {
                value: *v,
                location: "frequency".into(),
            });
        }
        let total: f64 = frequencies.iter().sum();
        Ok(Self {
            k,
            d,
            shapes,
            frequencies: frequencies.into_iter().map(|f| f / total).collect(),
            clamped: 0,
        })
    }

    pub fn l(&self) -> usize {
        self.shapes.len()
    }

    /// The shapes as un-normalized weights.
    pub fn weights(&self) -> ParameterSet {
        let values = self.shapes.iter().flatten().flatten().copied().collect();
        ParameterSet::new_unchecked(self.k, self.l(), self.d, values)
    }
}

/// Shapes from representatives and frequencies from cluster sizes.
pub fn shapes_and_frequencies(model: &ClusterModel, table: &ShapeTable) -> Result<ShapeSet> {
    if model.labels.len() != table.q || model.representatives.iter().any(|r| r.len() != table.cols()) {
        return Err(Error::Dimension("cluster model does not match the shape table".into()));
    }
    if let Some(j) = model.sizes.iter().position(|s| *s == 0) {
        return Err(Error::InvalidArgument(format!("cluster {j} is empty")));
    }
    let mut clamped = 0;
    let shapes = model
        .representatives
        .iter()
        .map(|row| {
            let mut m = table.unflatten(row);
            for v in m.iter_mut().flatten() {
                if !(*v >= POSITIVITY_FLOOR) {
                    *v = POSITIVITY_FLOOR;
                    clamped += 1;
                }
            }
            m
        })
        .collect();
    let frequencies = model.sizes.iter().map(|s| *s as f64 / table.q as f64).collect();
    let mut set = ShapeSet::new(shapes, frequencies)?;
    set.clamped = clamped;
    Ok(set)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Iteration {
    /// Pattern scales `c_j` of this state, geometric mean 1.
    pub scales: Vec<f64>,
    pub p: Vec<f64>,
    pub harmonic_means: Vec<f64>,
    /// `max_j |f̂_j - p̂_j|` with both vectors normalized to sum 1.
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointTrace {
    /// Entry 0 is the initial state; one entry per update after that.
    pub iterations: Vec<Iteration>,
    pub converged: bool,
    /// Accumulated scale per pattern, geometric mean 1.
    pub final_alphas: Vec<f64>,
    /// `α(x_d)`, filled by [`renormalize`].
    pub per_site_alpha: Vec<f64>,
}

impl FixedPointTrace {
    /// Number of updates applied.
    pub fn steps(&self) -> usize {
        self.iterations.len() - 1
    }
}

fn state(minima: &[MinimaMatrix], c: &[f64], f: &[f64]) -> Iteration {
    let l = c.len();
    let mut p = Vec::with_capacity(l);
    let mut harmonic_means = Vec::with_capacity(l);
    for (target, m) in minima.iter().enumerate() {
        let cells = m.entries.len();
        let recip: f64 = m
            .entries
            .iter()
            .enumerate()
            .map(|(idx, v)| c[idx % l] / (v * c[target]))
            .sum();
        p.push(1.0 / recip);
        harmonic_means.push(cells as f64 / recip);
    }
    let ps: f64 = p.iter().sum();
    let fs: f64 = f.iter().sum();
    let error = p
        .iter()
        .zip(f)
        .map(|(pj, fj)| (fj / fs - pj / ps).abs())
        .fold(0.0, f64::max);
    Iteration {
        scales: c.to_vec(),
        p,
        harmonic_means,
        error,
    }
}

/// The minima after scaling pattern `l` by `scales[l]`: entry `(kk, l)` of
/// target `l*` becomes `m[kk][l] · c_{l*} / c_l`, so column `l*` is fixed.
pub fn scaled_minima(minima: &[MinimaMatrix], scales: &[f64]) -> Vec<MinimaMatrix> {
    let l = scales.len();
    minima
        .iter()
        .map(|m| MinimaMatrix {
            entries: m
                .entries
                .iter()
                .enumerate()
                .map(|(idx, v)| v * scales[m.target] / scales[idx % l])
                .collect(),
            ..m.clone()
        })
        .collect()
}

/// Runs the iteration from initial minima matrices (one per target).
pub fn frequency_match_minima(minima: &[MinimaMatrix], f: &[f64], tol: f64, max_iter: usize) -> Result<FixedPointTrace> {
    let l = minima.len();
    if l == 0 || f.len() != l || minima.iter().enumerate().any(|(t, m)| m.l != l || m.target != t) {
        return Err(Error::Dimension(format!("{l} minima matrices for {} frequencies", f.len())));
    }
    if let Some(v) = f.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::NonPositive {
            value: *v,
            location: "frequency".into(),
        });
    }
    let mut c = vec![1.0; l];
    let mut iterations = vec![state(minima, &c, f)];
    let mut converged = iterations[0].error < tol;
    while !converged && iterations.len() <= max_iter {
        let last = iterations.last().unwrap();
        for j in 0..l {
            c[j] *= f[j] / last.p[j];
        }
        let log_mean = c.iter().map(|v| v.ln()).sum::<f64>() / l as f64;
        let g = log_mean.exp();
        c.iter_mut().for_each(|v| *v /= g);
        iterations.push(state(minima, &c, f));
        converged = iterations.last().unwrap().error < tol;
    }
    Ok(FixedPointTrace {
        iterations,
        converged,
        final_alphas: c,
        per_site_alpha: Vec::new(),
    })
}

/// Matches the profile probabilities of `shapes` to their frequencies.
pub fn frequency_match(shapes: &ShapeSet, tol: f64, max_iter: usize) -> Result<FixedPointTrace> {
    let minima = minima_matrices(&shapes.weights())?;
    frequency_match_minima(&minima, &shapes.frequencies, tol, max_iter)
}

/// Applies the pattern scales and the per-site factors
/// `α(x_d) = 1 / Σ_{j,i} c_j a_i^{(j)}(x_d)`; returns the standard set and
/// the factors.
pub fn renormalize(shapes: &ShapeSet, alphas: &[f64]) -> Result<(ParameterSet, Vec<f64>)> {
    if alphas.len() != shapes.l() {
        return Err(Error::Dimension(format!("{} scales for {} shapes", alphas.len(), shapes.l())));
    }
    let (k, l, d) = (shapes.k, shapes.l(), shapes.d);
    let mut per_site = vec![0.0; d];
    for (j, s) in shapes.shapes.iter().enumerate() {
        for row in s {
            for (acc, v) in per_site.iter_mut().zip(row) {
                *acc += alphas[j] * v;
            }
        }
    }
    if let Some((site, v)) = per_site.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::NonPositive {
            value: *v,
            location: format!("site {} total", site + 1),
        });
    }
    let per_site: Vec<f64> = per_site.into_iter().map(|t| 1.0 / t).collect();
    let mut values = Vec::with_capacity(k * l * d);
    for (j, s) in shapes.shapes.iter().enumerate() {
        for row in s {
            values.extend(row.iter().zip(&per_site).map(|(v, a)| a * alphas[j] * v));
        }
    }
    // Enforce the unit sum exactly up to rounding of the final division.
    let mut set = ParameterSet::new_unchecked(k, l, d, values);
    set.standardize_sites();
    set.ensure_valid()?;
    Ok((set, per_site))
}

/// Knobs of [`fit_pipeline`]. `None` selects the defaults described on each
/// field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Fixes `K̂` instead of estimating it.
    pub k: Option<usize>,
    /// Fixes `L̂` instead of estimating it.
    pub l: Option<usize>,
    /// K estimator 1..8; default 6 for `T <= 35`, else 7.
    pub k_variant: Option<usize>,
    /// L estimator 1..11; default 9 for `T <= 50`, else 2.
    pub l_variant: Option<usize>,
    /// Algorithm of the final clustering; default: the L estimator's.
    pub algorithm: Option<Algorithm>,
    pub q: QRule,
    pub rescoring: Rescoring,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            k: None,
            l: None,
            k_variant: None,
            l_variant: None,
            algorithm: None,
            q: QRule::Auto,
            rescoring: Rescoring::default(),
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            seed: 0,
        }
    }
}

pub fn default_k_variant(t: usize) -> usize {
    if t <= 35 {
        6
    } else {
        7
    }
}

pub fn default_l_variant(t: usize) -> usize {
    if t <= 50 {
        9
    } else {
        2
    }
}

/// Estimates `K`, extracts blocks, estimates `L`, clusters, matches
/// frequencies and renormalizes.
pub fn fit_pipeline(sample: &SeriesSample, c: f64, options: &FitOptions) -> Result<EstimationReport> {
    if sample.t < 2 {
        return Err(Error::InvalidArgument(format!("T = {} < 2", sample.t)).at(Stage::EstimateK));
    }
    let mut flags = Vec::new();
    let k_variant = options.k_variant.unwrap_or_else(|| default_k_variant(sample.t));
    let k = match options.k {
        Some(0) => return Err(Error::InvalidArgument("K must be >= 1".into()).at(Stage::EstimateK)),
        Some(k) => k,
        None => KEstimator::from_index(k_variant)
            .and_then(|est| estimate_k(sample, c, est))
            .map_err(|e| e.at(Stage::EstimateK))?,
    };
    if sample.t <= k {
        return Err(Error::InvalidArgument(format!("T = {} must exceed K = {k}", sample.t)).at(Stage::Extraction));
    }
    let q = options.q.resolve(c, k, sample.t);
    let extraction = extract_blocks(sample, k, q, options.rescoring).map_err(|e| e.at(Stage::Extraction))?;
    if extraction.blocks.is_empty() {
        return Err(Error::InvalidArgument("no blocks extracted".into()).at(Stage::Extraction));
    }
    let table = build_table(&extraction.blocks).map_err(|e| e.at(Stage::Extraction))?;

    let l_variant = options.l_variant.unwrap_or_else(|| default_l_variant(sample.t));
    let variant_algorithm = if l_variant == 11 {
        Algorithm::Ward
    } else {
        cluster::variant_spec(l_variant).map_err(|e| e.at(Stage::EstimateL))?.0
    };
    let algorithm = options.algorithm.unwrap_or(variant_algorithm);
    let l = match options.l {
        Some(0) => return Err(Error::InvalidArgument("L must be >= 1".into()).at(Stage::EstimateL)),
        Some(l) if l > table.q => {
            flags.push(format!("L reduced from {l} to Q = {}", table.q));
            table.q
        }
        Some(l) => l,
        None => {
            let sel = cluster::estimate_l(&table, l_variant, options.seed).map_err(|e| e.at(Stage::EstimateL))?;
            flags.extend(sel.flags);
            sel.l
        }
    };
    let model = cluster::cluster(&table, algorithm, l, options.seed).map_err(|e| e.at(Stage::Clustering))?;
    let shapes = shapes_and_frequencies(&model, &table).map_err(|e| e.at(Stage::FrequencyMatch))?;
    if shapes.clamped > 0 {
        flags.push(FLAG_CLAMPED.into());
    }
    let mut trace = frequency_match(&shapes, options.tol, options.max_iter).map_err(|e| e.at(Stage::FrequencyMatch))?;
    if !trace.converged {
        flags.push(FLAG_NOT_CONVERGED.into());
    }
    let (fitted, per_site) = renormalize(&shapes, &trace.final_alphas).map_err(|e| e.at(Stage::Renormalize))?;
    trace.per_site_alpha = per_site;
    flags.extend(extraction.diagnostics);

    Ok(EstimationReport {
        k_hat: k,
        l_hat: model.k,
        k_variant: options.k.is_none().then_some(k_variant),
        l_variant: options.l.is_none().then_some(l_variant),
        algorithm,
        q_requested: q,
        q_found: table.q,
        fitted,
        frequencies: shapes.frequencies,
        trace,
        hausdorff: None,
        k_correct: None,
        l_correct: None,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::Algorithm;

    fn table2_minima() -> Vec<MinimaMatrix> {
        vec![
            MinimaMatrix::from_entries(0, 1, 2, vec![5.95, 2.62]).unwrap(),
            MinimaMatrix::from_entries(1, 1, 2, vec![6.03, 7.11]).unwrap(),
        ]
    }

    #[test]
    fn table2_trajectory() {
        let trace = frequency_match_minima(&table2_minima(), &[1.0, 1.0], DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let first = [3.64, 5.25, 4.85, 4.94, 4.91, 4.92];
        let second = [6.53, 4.57, 5.01, 4.90, 4.93, 4.92];
        for (n, (a, b)) in first.iter().zip(&second).enumerate() {
            let h = &trace.iterations[n].harmonic_means;
            assert!((h[0] - a).abs() <= 0.01, "step {n}: {h:?}");
            assert!((h[1] - b).abs() <= 0.01, "step {n}: {h:?}");
        }
        for it in &trace.iterations {
            let m = scaled_minima(&table2_minima(), &it.scales);
            assert!((m[0].get(0, 0) - 5.95).abs() < 1e-12);
            assert!((m[1].get(0, 1) - 7.11).abs() < 1e-12);
            for (mm, h) in m.iter().zip(&it.harmonic_means) {
                assert!((mm.harmonic_mean() - h).abs() < 1e-12);
            }
        }
        assert!(trace.converged);
        let h = &trace.iterations.last().unwrap().harmonic_means;
        assert!((h[0] - h[1]).abs() < 1e-8);
    }

    #[test]
    fn matched_input_takes_zero_steps() {
        let shapes = ShapeSet::new(vec![vec![vec![0.5, 0.2], vec![0.3, 0.1]]], vec![1.0]).unwrap();
        let trace = frequency_match(&shapes, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(trace.steps(), 0);
        assert_eq!(trace.final_alphas, vec![1.0]);
    }

    #[test]
    fn single_pattern_renormalizes_per_site() {
        let shapes = ShapeSet::new(vec![vec![vec![2.0, 1.0], vec![6.0, 3.0]]], vec![0.3]).unwrap();
        let (set, alpha) = renormalize(&shapes, &[1.0]).unwrap();
        assert_eq!(set.profile(0), &[0.25, 0.25, 0.75, 0.75]);
        assert_eq!(alpha, vec![1.0 / 8.0, 1.0 / 4.0]);
    }

    #[test]
    fn true_profiles_and_probabilities_round_trip() {
        for seed in 0..10 {
            let truth = ParameterSet::random(3, 3, 4, 4.0, seed).unwrap();
            let probs: Vec<f64> = (0..3)
                .map(|j| crate::theory::profile_probability(&truth, j).unwrap())
                .collect();
            // Shapes are profiles up to an arbitrary per-pattern scale.
            let shapes: Vec<Vec<Vec<f64>>> = (0..3)
                .map(|j| {
                    let scale = [0.3, 7.0, 1.9][j];
                    (0..3).map(|i| truth.lag(j, i).iter().map(|v| v * scale).collect()).collect()
                })
                .collect();
            let set = ShapeSet::new(shapes, probs).unwrap();
            let trace = frequency_match(&set, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
            assert!(trace.converged);
            let (fitted, _) = renormalize(&set, &trace.final_alphas).unwrap();
            for (a, b) in fitted.values().iter().zip(truth.values()) {
                assert!((a - b).abs() < 1e-8, "seed {seed}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn equal_frequencies_equalize_probabilities() {
        let truth = ParameterSet::random(2, 4, 3, 5.0, 9).unwrap();
        let shapes: Vec<Vec<Vec<f64>>> = (0..4)
            .map(|j| (0..2).map(|i| truth.lag(j, i).to_vec()).collect())
            .collect();
        let set = ShapeSet::new(shapes, vec![1.0; 4]).unwrap();
        let trace = frequency_match(&set, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!(trace.converged);
        let p = &trace.iterations.last().unwrap().p;
        for v in p {
            assert!((v - p[0]).abs() / p[0] < 1e-9);
        }
    }

    #[test]
    fn shapes_from_model_use_sizes() {
        let rows = vec![vec![1.0, 0.5], vec![1.0, 0.5], vec![1.0, 0.5], vec![0.2, 1.0]];
        let table = ShapeTable::from_rows(2, 1, &rows).unwrap();
        let model = cluster::cluster(&table, Algorithm::Pam, 2, 0).unwrap();
        let set = shapes_and_frequencies(&model, &table).unwrap();
        assert_eq!(set.frequencies, vec![0.75, 0.25]);
        assert_eq!(set.shapes[0], vec![vec![1.0], vec![0.5]]);
    }

    #[test]
    fn nonpositive_centroids_are_clamped() {
        let rows = vec![vec![1.0, -0.5], vec![1.0, 0.1]];
        let table = ShapeTable::from_rows(2, 1, &rows).unwrap();
        let model = cluster::cluster(&table, Algorithm::Ward, 2, 0).unwrap();
        let set = shapes_and_frequencies(&model, &table).unwrap();
        assert_eq!(set.clamped, 1);
        assert_eq!(set.shapes[0][1][0], POSITIVITY_FLOOR);
    }

    #[test]
    fn short_series_fails_at_extraction() {
        let s = SeriesSample::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        let opts = FitOptions {
            k: Some(2),
            ..FitOptions::default()
        };
        let err = fit_pipeline(&s, 2.0, &opts).unwrap_err();
        assert_eq!(err.stage(), Some(Stage::Extraction));
    }
}
