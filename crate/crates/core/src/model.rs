//! Parameter sets of the discretized moving-maxima model.
//!
//! A [`ParameterSet`] holds the weights `a[j][i][d]` for pattern `j`, lag `i`
//! and site `d`. A set is *standard* when the weights at every site sum to
//! one, which makes every margin of the simulated process unit-Fréchet.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Absolute tolerance on the per-site sum of weights.
pub const STANDARDIZATION_TOL: f64 = 1e-12;

/// Weights of a standard M4 process with `k` lags, `l` patterns and `d` sites.
///
/// Values are stored flat in `j`-major, then `i`, then `d` order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    k: usize,
    l: usize,
    d: usize,
    sites: Option<Vec<Vec<f64>>>,
    values: Vec<f64>,
}

/// Per-pattern and global variation bounds `C`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariationBound {
    pub per_pattern: Vec<f64>,
    pub global: f64,
}

impl ParameterSet {
    /// Builds a parameter set and checks it with [`ParameterSet::validate`].
    pub fn new(k: usize, l: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        let set = Self::new_unchecked(k, l, d, values);
        let violations = set.validate();
        if violations.is_empty() {
            Ok(set)
        } else {
            Err(Error::InvalidParams(violations))
        }
    }

    /// Builds a set without checking positivity or standardization.
    ///
    /// Useful for validation reports and for un-normalized shapes.
    pub fn new_unchecked(k: usize, l: usize, d: usize, values: Vec<f64>) -> Self {
        Self {
            k,
            l,
            d,
            sites: None,
            values,
        }
    }

    /// Builds a set from nested `values[j][i][d]`.
    pub fn from_nested(nested: &[Vec<Vec<f64>>]) -> Result<Self> {
        let (k, l, d, values) = flatten_nested(nested)?;
        Self::new(k, l, d, values)
    }

    pub fn with_sites(mut self, sites: Vec<Vec<f64>>) -> Result<Self> {
        if sites.len() != self.d {
            return Err(Error::Dimension(format!(
                "{} site coordinates for D = {}",
                sites.len(),
                self.d
            )));
        }
        self.sites = Some(sites);
        Ok(self)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn sites(&self) -> Option<&[Vec<f64>]> {
        self.sites.as_deref()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, j: usize, i: usize, d: usize) -> f64 {
        self.values[(j * self.k + i) * self.d + d]
    }

    /// Weights of pattern `j` at lag `i`, one per site.
    pub fn lag(&self, j: usize, i: usize) -> &[f64] {
        let start = (j * self.k + i) * self.d;
        &self.values[start..start + self.d]
    }

    /// Profile of pattern `j` as a flat `K × D` slice (time-major).
    pub fn profile(&self, j: usize) -> &[f64] {
        let n = self.k * self.d;
        &self.values[j * n..(j + 1) * n]
    }

    /// Sup norm over sites of `a_i^{(j)}`.
    pub fn sup_norm(&self, j: usize, i: usize) -> f64 {
        self.lag(j, i).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Sum over patterns and lags at site `d`.
    pub fn site_sum(&self, d: usize) -> f64 {
        (0..self.l)
            .flat_map(|j| (0..self.k).map(move |i| (j, i)))
            .map(|(j, i)| self.get(j, i, d))
            .sum()
    }

    pub fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.l)
            .map(|j| (0..self.k).map(|i| self.lag(j, i).to_vec()).collect())
            .collect()
    }

    /// Lists every violated invariant; empty iff valid.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.k == 0 || self.l == 0 || self.d == 0 {
            out.push(format!(
                "dimensions must be positive (K={}, L={}, D={})",
                self.k, self.l, self.d
            ));
        }
        let expected = self.k * self.l * self.d;
        if self.values.len() != expected {
            out.push(format!(
                "expected {} values for K={}, L={}, D={}, found {}",
                expected,
                self.k,
                self.l,
                self.d,
                self.values.len()
            ));
            return out;
        }
        if let Some(sites) = &self.sites {
            if sites.len() != self.d {
                out.push(format!("{} site coordinates for D = {}", sites.len(), self.d));
            }
        }
        let non_positive = self.values.iter().filter(|v| !(**v > 0.0)).count();
        if non_positive > 0 {
            out.push(format!("non-positive entry ({non_positive} found)"));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            out.push("non-finite entry".to_string());
        }
        for d in 0..self.d {
            let s = self.site_sum(d);
            if !((s - 1.0).abs() <= STANDARDIZATION_TOL) {
                out.push(format!("site {} sum = {}", d + 1, s));
            }
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    pub(crate) fn ensure_valid(&self) -> Result<()> {
        let violations = self.validate();
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(violations))
        }
    }

    /// Smallest constants `C^{(l*)}` bounding every same-site ratio
    /// `a_k^{(l*)}(x_d) / a_{k'}^{(l)}(x_d)` and its reciprocal.
    pub fn variation_bound(&self) -> Result<VariationBound> {
        self.ensure_valid()?;
        let mut per_pattern = vec![1.0_f64; self.l];
        for d in 0..self.d {
            let mut lo_all = f64::INFINITY;
            let mut hi_all = 0.0_f64;
            let mut lo = vec![f64::INFINITY; self.l];
            let mut hi = vec![0.0_f64; self.l];
            for j in 0..self.l {
                for i in 0..self.k {
                    let v = self.get(j, i, d);
                    lo[j] = lo[j].min(v);
                    hi[j] = hi[j].max(v);
                }
                lo_all = lo_all.min(lo[j]);
                hi_all = hi_all.max(hi[j]);
            }
            for j in 0..self.l {
                let c = (hi[j] / lo_all).max(hi_all / lo[j]);
                per_pattern[j] = per_pattern[j].max(c);
            }
        }
        let global = per_pattern.iter().copied().fold(1.0, f64::max);
        Ok(VariationBound {
            per_pattern,
            global,
        })
    }

    /// Orders patterns lexicographically by their flattened profiles.
    pub fn canonicalize(&mut self) {
        let n = self.k * self.d;
        let mut patterns: Vec<Vec<f64>> = self.values.chunks(n).map(<[f64]>::to_vec).collect();
        patterns.sort_by(|a, b| {
            a.iter()
                .zip(b)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        self.values = patterns.concat();
    }

    /// Random standard set whose variation bound does not exceed `c_target`.
    ///
    /// Raw entries are uniform on `[1/c_target, 1]`; each site column is then
    /// rescaled to sum to one, which keeps all same-site ratios.
    pub fn random(k: usize, l: usize, d: usize, c_target: f64, seed: u64) -> Result<Self> {
        if k == 0 || l == 0 || d == 0 {
            return Err(Error::InvalidArgument(format!(
                "dimensions must be positive (K={k}, L={l}, D={d})"
            )));
        }
        if !(c_target >= 1.0) || !c_target.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "variation bound must be >= 1, got {c_target}"
            )));
        }
        let mut rng = rng::stream(seed, "parameters", 0);
        let lo = 1.0 / c_target;
        let mut values: Vec<f64> = (0..k * l * d)
            .map(|_| lo + (1.0 - lo) * rng.random::<f64>())
            .collect();
        let mut set = Self::new_unchecked(k, l, d, std::mem::take(&mut values));
        set.standardize_sites();
        set.canonicalize();
        set.ensure_valid()?;
        Ok(set)
    }

    /// Divides every site column by its sum.
    pub(crate) fn standardize_sites(&mut self) {
        for d in 0..self.d {
            let s = self.site_sum(d);
            for j in 0..self.l {
                for i in 0..self.k {
                    self.values[(j * self.k + i) * self.d + d] /= s;
                }
            }
        }
    }
}

fn flatten_nested(nested: &[Vec<Vec<f64>>]) -> Result<(usize, usize, usize, Vec<f64>)> {
    let l = nested.len();
    let k = nested.first().map_or(0, Vec::len);
    let d = nested.first().and_then(|p| p.first()).map_or(0, Vec::len);
    let mut values = Vec::with_capacity(k * l * d);
    for (j, pattern) in nested.iter().enumerate() {
        if pattern.len() != k {
            return Err(Error::Dimension(format!(
                "pattern {} has {} lags, expected {k}",
                j + 1,
                pattern.len()
            )));
        }
        for (i, lag) in pattern.iter().enumerate() {
            if lag.len() != d {
                return Err(Error::Dimension(format!(
                    "pattern {} lag {i} has {} sites, expected {d}",
                    j + 1,
                    lag.len()
                )));
            }
            values.extend_from_slice(lag);
        }
    }
    Ok((k, l, d, values))
}

#[derive(Serialize, Deserialize)]
struct ParameterSetJson {
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "L")]
    l: usize,
    #[serde(rename = "D")]
    d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sites: Option<Vec<Vec<f64>>>,
    values: Vec<Vec<Vec<f64>>>,
}

impl Serialize for ParameterSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        ParameterSetJson {
            k: self.k,
            l: self.l,
            d: self.d,
            sites: self.sites.clone(),
            values: self.to_nested(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ParameterSet {
    fn deserialize<De: serde::Deserializer<'de>>(deserializer: De) -> std::result::Result<Self, De::Error> {
        use serde::de::Error as _;
        let raw = ParameterSetJson::deserialize(deserializer)?;
        let (k, l, d, values) = flatten_nested(&raw.values).map_err(De::Error::custom)?;
        if (k, l, d) != (raw.k, raw.l, raw.d) {
            return Err(De::Error::custom(format!(
                "header K={}, L={}, D={} disagrees with values ({k}, {l}, {d})",
                raw.k, raw.l, raw.d
            )));
        }
        let mut set = ParameterSet::new_unchecked(k, l, d, values);
        set.sites = raw.sites;
        Ok(set)
    }
}
