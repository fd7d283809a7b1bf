//! Unit-Fréchet innovations, series simulation and the spectral sampler.
//!
//! The practical model is
//! `X_t(d) = max_{j, i} a[j][i][d] * Z_{t-i}^{(j)} + eps_t(d)` with i.i.d.
//! unit-Fréchet `Z` and Gaussian `eps`. Innovations for the `K - 1` lags
//! before the first output time are drawn up front, so the returned window is
//! an exact stationary sample.

use rand::distr::Open01;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ParameterSet;
use crate::rng::{self, Rng};

/// One unit-Fréchet draw by inversion: `Z = -1 / ln U`.
#[inline]
pub fn frechet(rng: &mut Rng) -> f64 {
    let u: f64 = rng.sample(Open01);
    -1.0 / u.ln()
}

/// `n` i.i.d. unit-Fréchet draws.
pub fn sample_frechet(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng::stream(seed, "frechet", 0);
    (0..n).map(|_| frechet(&mut rng)).collect()
}

/// Unit-Fréchet CDF.
pub fn frechet_cdf(z: f64) -> f64 {
    if z <= 0.0 {
        0.0
    } else {
        (-1.0 / z).exp()
    }
}

/// A `T × D` series, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSample {
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(rename = "D")]
    pub d: usize,
    pub values: Vec<f64>,
    pub sigma: f64,
    pub seed: u64,
}

impl SeriesSample {
    pub fn new(t: usize, d: usize, values: Vec<f64>, sigma: f64, seed: u64) -> Result<Self> {
        if values.len() != t * d {
            return Err(Error::Dimension(format!(
                "{} values for T={t}, D={d}",
                values.len()
            )));
        }
        if !(sigma >= 0.0) {
            return Err(Error::InvalidArgument(format!("sigma must be >= 0, got {sigma}")));
        }
        Ok(Self {
            t,
            d,
            values,
            sigma,
            seed,
        })
    }

    /// Builds a sample from rows `[t][d]`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Self::new(rows.len(), d, rows.concat(), 0.0, 0)
    }

    #[inline]
    pub fn get(&self, t: usize, d: usize) -> f64 {
        self.values[t * self.d + d]
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.d..(t + 1) * self.d]
    }

    pub fn column(&self, d: usize) -> Vec<f64> {
        (0..self.t).map(|t| self.get(t, d)).collect()
    }

    /// Multiplies every value by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }
}

/// `out[t] = max_d X_t(d)`.
pub fn sup_norm_series(sample: &SeriesSample) -> Vec<f64> {
    (0..sample.t)
        .map(|t| sample.row(t).iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect()
}

/// Innovations `Z_p^{(j)}` for `p` from `2 - K` to `T` (1-based times).
///
/// Index `q = p + K - 2` so that `Z_{t-i}` for 0-based output time `t` sits at
/// `q = t - i + K - 1`.
#[derive(Debug, Clone)]
pub struct Innovations {
    k: usize,
    l: usize,
    values: Vec<f64>,
}

impl Innovations {
    /// `Z_{t - i}^{(j)}` for 0-based output time `t`.
    #[inline]
    pub fn at(&self, t: usize, i: usize, j: usize) -> f64 {
        self.values[(t + self.k - 1 - i) * self.l + j]
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn l(&self) -> usize {
        self.l
    }
}

/// Simulates `T` observations of the practical model.
pub fn simulate(params: &ParameterSet, t: usize, sigma: f64, seed: u64) -> Result<SeriesSample> {
    simulate_with_innovations(params, t, sigma, seed).map(|(s, _)| s)
}

/// As [`simulate`], also returning the innovations behind the series.
pub fn simulate_with_innovations(
    params: &ParameterSet,
    t: usize,
    sigma: f64,
    seed: u64,
) -> Result<(SeriesSample, Innovations)> {
    params.ensure_valid()?;
    if t == 0 {
        return Err(Error::InvalidArgument("T must be >= 1".into()));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("sigma must be >= 0, got {sigma}")));
    }
    let (k, l, d) = (params.k(), params.l(), params.d());
    let mut rng = rng::stream(seed, "innovations", 0);
    let z: Vec<f64> = (0..(t + k - 1) * l).map(|_| frechet(&mut rng)).collect();
    let innovations = Innovations { k, l, values: z };

    let mut values = vec![f64::NEG_INFINITY; t * d];
    for (step, row) in values.chunks_mut(d).enumerate() {
        for j in 0..l {
            for i in 0..k {
                let zi = innovations.at(step, i, j);
                for (x, a) in row.iter_mut().zip(params.lag(j, i)) {
                    let v = a * zi;
                    if v > *x {
                        *x = v;
                    }
                }
            }
        }
    }
    if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let mut noise = rng::stream(seed, "noise", 0);
        for v in &mut values {
            *v += normal.sample(&mut noise);
        }
    }
    Ok((SeriesSample::new(t, d, values, sigma, seed)?, innovations))
}

/// Streaming noise-free simulator for long Monte Carlo runs.
///
/// Keeps a ring of the last `K` innovation vectors instead of the whole
/// history.
pub struct Stream<'a> {
    params: &'a ParameterSet,
    rng: Rng,
    ring: Vec<f64>,
    head: usize,
}

impl<'a> Stream<'a> {
    pub fn new(params: &'a ParameterSet, rng: Rng) -> Self {
        let (k, l) = (params.k(), params.l());
        let mut s = Self {
            params,
            rng,
            ring: vec![0.0; k * l],
            head: 0,
        };
        // Pre-fill the K - 1 lags before the first output time.
        for _ in 0..k.saturating_sub(1) {
            s.push_innovations();
        }
        s
    }

    fn push_innovations(&mut self) {
        let l = self.params.l();
        let slot = self.head * l;
        for j in 0..l {
            self.ring[slot + j] = frechet(&mut self.rng);
        }
        self.head = (self.head + 1) % self.params.k();
    }

    /// Innovation `Z_{now - i}^{(j)}` relative to the last emitted row.
    #[inline]
    pub fn lagged(&self, i: usize, j: usize) -> f64 {
        let k = self.params.k();
        let slot = (self.head + k - 1 - i) % k;
        self.ring[slot * self.params.l() + j]
    }

    /// Emits the next row into `out` (length `D`).
    pub fn next_row(&mut self, out: &mut [f64]) {
        self.push_innovations();
        out.fill(f64::NEG_INFINITY);
        for j in 0..self.params.l() {
            for i in 0..self.params.k() {
                let z = self.lagged(i, j);
                for (x, a) in out.iter_mut().zip(self.params.lag(j, i)) {
                    let v = a * z;
                    if v > *x {
                        *x = v;
                    }
                }
            }
        }
    }

    /// Sup norm of the next row.
    pub fn next_sup(&mut self, scratch: &mut [f64]) -> f64 {
        self.next_row(scratch);
        scratch.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// A draw `(Θ_{-s}, …, Θ_t)` of the spectral process with its `(I, J)` pick.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralDraw {
    pub s: usize,
    pub t: usize,
    /// `(s + t + 1) × D`, row `r` is time offset `r - s`.
    pub window: Vec<f64>,
    /// Lag `I` in `0..K`.
    pub lag: usize,
    /// Pattern `J` in `0..L` (0-based).
    pub pattern: usize,
}

impl SpectralDraw {
    pub fn offset_row(&self, offset: isize, d: usize) -> &[f64] {
        let r = (offset + self.s as isize) as usize;
        &self.window[r * d..(r + 1) * d]
    }
}

/// Law of `(I, J)`: `P[(i, j)] ∝ max_d a[j][i][d]`, as `(i, j, prob)`.
pub fn spectral_law(params: &ParameterSet) -> Vec<(usize, usize, f64)> {
    let mut out: Vec<(usize, usize, f64)> = (0..params.l())
        .flat_map(|j| (0..params.k()).map(move |i| (i, j)))
        .map(|(i, j)| (i, j, params.sup_norm(j, i)))
        .collect();
    let total: f64 = out.iter().map(|x| x.2).sum();
    for x in &mut out {
        x.2 /= total;
    }
    out
}

/// Deterministic spectral window for a fixed pick `(lag, pattern)`.
pub fn spectral_window(params: &ParameterSet, lag: usize, pattern: usize, s: usize, t: usize) -> Vec<f64> {
    let d = params.d();
    let norm = params.sup_norm(pattern, lag);
    let mut window = vec![0.0; (s + t + 1) * d];
    for r in 0..s + t + 1 {
        let u = r as isize - s as isize + lag as isize;
        if u >= 0 && (u as usize) < params.k() {
            for (w, a) in window[r * d..(r + 1) * d]
                .iter_mut()
                .zip(params.lag(pattern, u as usize))
            {
                *w = a / norm;
            }
        }
    }
    window
}

/// Samples the spectral process of a standard M4 on offsets `-s..=t`.
pub fn sample_spectral(params: &ParameterSet, s: usize, t: usize, seed: u64) -> Result<SpectralDraw> {
    params.ensure_valid()?;
    let mut rng = rng::stream(seed, "spectral", 0);
    Ok(draw_spectral(params, &spectral_law(params), s, t, &mut rng))
}

/// Many spectral draws from one seed.
pub fn sample_spectral_many(
    params: &ParameterSet,
    s: usize,
    t: usize,
    n: usize,
    seed: u64,
) -> Result<Vec<SpectralDraw>> {
    params.ensure_valid()?;
    let law = spectral_law(params);
    let mut rng = rng::stream(seed, "spectral", 0);
    Ok((0..n).map(|_| draw_spectral(params, &law, s, t, &mut rng)).collect())
}

fn draw_spectral(
    params: &ParameterSet,
    law: &[(usize, usize, f64)],
    s: usize,
    t: usize,
    rng: &mut Rng,
) -> SpectralDraw {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut pick = law[law.len() - 1];
    for entry in law {
        acc += entry.2;
        if u < acc {
            pick = *entry;
            break;
        }
    }
    let (lag, pattern, _) = pick;
    SpectralDraw {
        s,
        t,
        window: spectral_window(params, lag, pattern, s, t),
        lag,
        pattern,
    }
}
