//! Estimation reports and their scoring against a known parameter set.
//!
//! Each profile `j` is one point of `R^{D·K}` (its weights flattened site by
//! site), so a parameter set is a finite point set and two sets are compared
//! by the Hausdorff distance.

use serde::{Deserialize, Serialize};

use crate::cluster::Algorithm;
use crate::error::{Error, Result};
use crate::fit::FixedPointTrace;
use crate::model::ParameterSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    #[serde(rename = "K")]
    pub k_hat: usize,
    #[serde(rename = "L")]
    pub l_hat: usize,
    /// K estimator used, absent when `K` was fixed.
    pub k_variant: Option<usize>,
    /// L estimator used, absent when `L` was fixed.
    pub l_variant: Option<usize>,
    pub algorithm: Algorithm,
    pub q_requested: usize,
    pub q_found: usize,
    pub fitted: ParameterSet,
    pub frequencies: Vec<f64>,
    pub trace: FixedPointTrace,
    /// Present only after scoring against a truth with the same `K`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hausdorff: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_correct: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_correct: Option<bool>,
    pub flags: Vec<String>,
}

/// One point per profile: `(a_0(x_1), …, a_{K-1}(x_1), a_0(x_2), …)`.
pub fn hausdorff_points(params: &ParameterSet) -> Vec<Vec<f64>> {
    (0..params.l())
        .map(|j| {
            (0..params.d())
                .flat_map(|d| (0..params.k()).map(move |i| params.get(j, i, d)))
                .collect()
        })
        .collect()
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `sup_{a ∈ A} inf_{b ∈ B} |a - b|`.
pub fn directed_hausdorff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .map(|p| b.iter().map(|q| euclid(p, q)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

/// Hausdorff distance between two nonempty finite point sets.
pub fn hausdorff_sets(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    directed_hausdorff(a, b).max(directed_hausdorff(b, a))
}

/// Distance between the profile sets of two parameter sets of equal `K`, `D`.
pub fn hausdorff(truth: &ParameterSet, estimate: &ParameterSet) -> Result<f64> {
    if truth.k() != estimate.k() || truth.d() != estimate.d() {
        return Err(Error::Dimension(format!(
            "truth is K={}, D={}; estimate is K={}, D={}",
            truth.k(),
            truth.d(),
            estimate.k(),
            estimate.d()
        )));
    }
    Ok(hausdorff_sets(&hausdorff_points(truth), &hausdorff_points(estimate)))
}

/// Marks `K̂` and `L̂` against the truth and attaches the distance when
/// `K̂ = K` (a wrong `K̂` is a failure with no distance).
pub fn evaluate_fit(truth: &ParameterSet, report: &EstimationReport) -> EstimationReport {
    let mut scored = report.clone();
    let k_ok = report.k_hat == truth.k() && report.fitted.d() == truth.d();
    scored.k_correct = Some(report.k_hat == truth.k());
    scored.l_correct = Some(report.l_hat == truth.l());
    scored.hausdorff = if k_ok { hausdorff(truth, &report.fitted).ok() } else { None };
    scored
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_sets_are_at_zero() {
        let p = ParameterSet::random(2, 3, 4, 3.0, 1).unwrap();
        assert_eq!(hausdorff(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn three_four_five() {
        let a = vec![vec![0.0, 0.0, 0.0]];
        let b = vec![vec![3.0, 4.0, 0.0]];
        assert_eq!(hausdorff_sets(&a, &b), 5.0);
    }

    #[test]
    fn directed_distances_are_asymmetric() {
        let a = vec![vec![0.0], vec![2.0]];
        let b = vec![vec![0.0]];
        assert_eq!(directed_hausdorff(&a, &b), 2.0);
        assert_eq!(directed_hausdorff(&b, &a), 0.0);
        assert_eq!(hausdorff_sets(&a, &b), 2.0);
    }

    #[test]
    fn points_are_site_major() {
        let p = ParameterSet::new(2, 1, 2, vec![0.6, 0.3, 0.4, 0.7]).unwrap();
        assert_eq!(hausdorff_points(&p), vec![vec![0.6, 0.4, 0.3, 0.7]]);
    }

    #[test]
    fn mismatched_k_is_refused() {
        let a = ParameterSet::random(2, 1, 3, 2.0, 0).unwrap();
        let b = ParameterSet::random(3, 1, 3, 2.0, 0).unwrap();
        assert!(hausdorff(&a, &b).is_err());
    }
}
