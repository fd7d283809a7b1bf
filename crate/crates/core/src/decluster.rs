//! Exceedance marking, runs declustering and the eight estimators of `K`.
//!
//! Exceedances are values above `max / C`, either on the sup-norm series
//! (scalar scan) or per site with a site-specific threshold (multivariate
//! scan). Consecutive exceedances form one cluster; the cluster sizes are
//! then averaged by mean, median or mode.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulate::{sup_norm_series, SeriesSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanMode {
    Scalar,
    Multivariate,
}

/// Exceedance marks: a `T`-vector (scalar) or a `T × D` row-major matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Marks {
    pub t: usize,
    /// 1 for scalar marks, `D` otherwise.
    pub columns: usize,
    pub marks: Vec<bool>,
}

impl Marks {
    pub fn get(&self, t: usize, c: usize) -> bool {
        self.marks[t * self.columns + c]
    }

    pub fn column(&self, c: usize) -> impl Iterator<Item = bool> + '_ {
        (0..self.t).map(move |t| self.get(t, c))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClusterSizeSequence {
    pub sizes: Vec<usize>,
    pub source: ScanMode,
}

fn mark_column(values: &[f64], c: f64) -> Vec<bool> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let threshold = max / c;
    // The maximum itself always counts, which also covers C = 1.
    values.iter().map(|&v| v > threshold || v == max).collect()
}

/// Marks values above `max / C`.
pub fn mark_exceedances(sample: &SeriesSample, c: f64, mode: ScanMode) -> Result<Marks> {
    if sample.t == 0 || sample.d == 0 {
        return Err(Error::InvalidArgument("empty series".into()));
    }
    if !(c >= 1.0) {
        return Err(Error::InvalidArgument(format!("C must be >= 1, got {c}")));
    }
    match mode {
        ScanMode::Scalar => Ok(Marks {
            t: sample.t,
            columns: 1,
            marks: mark_column(&sup_norm_series(sample), c),
        }),
        ScanMode::Multivariate => {
            let mut marks = vec![false; sample.t * sample.d];
            for d in 0..sample.d {
                for (t, m) in mark_column(&sample.column(d), c).into_iter().enumerate() {
                    marks[t * sample.d + d] = m;
                }
            }
            Ok(Marks {
                t: sample.t,
                columns: sample.d,
                marks,
            })
        }
    }
}

/// Lengths of maximal runs of `true` in one sequence.
pub fn runs(marks: impl IntoIterator<Item = bool>) -> Vec<usize> {
    let mut out = Vec::new();
    let mut current = 0;
    for m in marks {
        if m {
            current += 1;
        } else if current > 0 {
            out.push(current);
            current = 0;
        }
    }
    if current > 0 {
        out.push(current);
    }
    out
}

/// Runs declustering with separation zero; per-site runs are pooled in site
/// order.
pub fn run_lengths(marks: &Marks) -> ClusterSizeSequence {
    let sizes = (0..marks.columns).flat_map(|c| runs(marks.column(c))).collect();
    ClusterSizeSequence {
        sizes,
        source: if marks.columns == 1 {
            ScanMode::Scalar
        } else {
            ScanMode::Multivariate
        },
    }
}

pub fn mean(sizes: &[usize]) -> f64 {
    sizes.iter().sum::<usize>() as f64 / sizes.len() as f64
}

pub fn median(sizes: &[usize]) -> f64 {
    let mut s = sizes.to_vec();
    s.sort_unstable();
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2] as f64
    } else {
        (s[n / 2 - 1] + s[n / 2]) as f64 / 2.0
    }
}

/// Most frequent size; ties go to the larger value.
pub fn mode(sizes: &[usize]) -> usize {
    let max = sizes.iter().copied().max().unwrap_or(0);
    let mut counts = vec![0usize; max + 1];
    for &s in sizes {
        counts[s] += 1;
    }
    let mut best = 0;
    for (v, &c) in counts.iter().enumerate() {
        if c > 0 && c >= counts[best] {
            best = v;
        }
    }
    best
}

/// The eight estimators of the temporal dependence length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KEstimator {
    /// ceil(mean), scalar
    K1,
    /// round(mean), scalar
    K2,
    /// ceil(mean), multivariate
    K3,
    /// round(mean), multivariate
    K4,
    /// ceil(median), scalar
    K5,
    /// ceil(median), multivariate
    K6,
    /// mode, scalar
    K7,
    /// mode, multivariate
    K8,
}

impl KEstimator {
    pub const ALL: [KEstimator; 8] = [
        KEstimator::K1,
        KEstimator::K2,
        KEstimator::K3,
        KEstimator::K4,
        KEstimator::K5,
        KEstimator::K6,
        KEstimator::K7,
        KEstimator::K8,
    ];

    pub fn from_index(variant: usize) -> Result<Self> {
        variant
            .checked_sub(1)
            .and_then(|i| Self::ALL.get(i).copied())
            .ok_or_else(|| Error::InvalidArgument(format!("K estimator variant must be 1..8, got {variant}")))
    }

    pub fn index(self) -> usize {
        self as usize + 1
    }

    pub fn mode(self) -> ScanMode {
        match self {
            KEstimator::K1 | KEstimator::K2 | KEstimator::K5 | KEstimator::K7 => ScanMode::Scalar,
            _ => ScanMode::Multivariate,
        }
    }

    /// Applies this estimator's average to a size sequence.
    pub fn average(self, sizes: &[usize]) -> Result<usize> {
        if sizes.is_empty() {
            return Err(Error::NoExceedances);
        }
        let k = match self {
            KEstimator::K1 | KEstimator::K3 => mean(sizes).ceil() as usize,
            // f64::round is half away from zero.
            KEstimator::K2 | KEstimator::K4 => mean(sizes).round() as usize,
            KEstimator::K5 | KEstimator::K6 => median(sizes).ceil() as usize,
            KEstimator::K7 | KEstimator::K8 => mode(sizes),
        };
        Ok(k.max(1))
    }
}

/// Cluster sizes for the scan mode `mode`.
pub fn cluster_sizes(sample: &SeriesSample, c: f64, mode: ScanMode) -> Result<ClusterSizeSequence> {
    Ok(run_lengths(&mark_exceedances(sample, c, mode)?))
}

pub fn estimate_k(sample: &SeriesSample, c: f64, variant: KEstimator) -> Result<usize> {
    let sizes = cluster_sizes(sample, c, variant.mode())?;
    variant.average(&sizes.sizes)
}

/// All eight estimates, sharing the two scans.
pub fn estimate_k_all(sample: &SeriesSample, c: f64) -> Result<[usize; 8]> {
    let scalar = cluster_sizes(sample, c, ScanMode::Scalar)?;
    let multi = cluster_sizes(sample, c, ScanMode::Multivariate)?;
    let mut out = [0; 8];
    for (slot, est) in out.iter_mut().zip(KEstimator::ALL) {
        let sizes = match est.mode() {
            ScanMode::Scalar => &scalar.sizes,
            ScanMode::Multivariate => &multi.sizes,
        };
        *slot = est.average(sizes)?;
    }
    Ok(out)
}
