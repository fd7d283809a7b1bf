//! Seeded Monte Carlo benchmarks.
//!
//! Every trial draws its parameter set and its series from streams keyed by
//! `(T, trial index)`, so results do not depend on execution order. Trials at
//! one `T` cycle through the feasible `(C, D, K, L)` grid cells.

use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blocks::{extract_blocks, QRule, Rescoring};
use crate::cluster::{build_table, estimate_l_all, Algorithm};
use crate::decluster::estimate_k_all;
use crate::error::{Error, Result};
use crate::evaluate::hausdorff;
use crate::fit::{fit_pipeline, FitOptions};
use crate::model::ParameterSet;
use crate::rng::derive_seed;
use crate::simulate::{simulate, simulate_with_innovations, Innovations, SeriesSample};
use crate::theory::profile_probability;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    KSuccess,
    LSuccess,
    BlockCount,
    HausdorffHist,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::KSuccess => "k-success",
            Experiment::LSuccess => "l-success",
            Experiment::BlockCount => "block-count",
            Experiment::HausdorffHist => "hausdorff-hist",
        }
    }
}

impl FromStr for Experiment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [
            Experiment::KSuccess,
            Experiment::LSuccess,
            Experiment::BlockCount,
            Experiment::HausdorffHist,
        ]
        .into_iter()
        .find(|e| e.name() == s)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown experiment '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub experiment: Experiment,
    #[serde(rename = "C")]
    pub c: Vec<f64>,
    #[serde(rename = "D")]
    pub d: Vec<usize>,
    #[serde(rename = "K")]
    pub k: Vec<usize>,
    #[serde(rename = "L")]
    pub l: Vec<usize>,
    #[serde(rename = "T")]
    pub t: Vec<usize>,
    /// Trials per `T` value.
    pub trials: usize,
    #[serde(default)]
    pub sigma: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "auto")]
    pub q: QRule,
    #[serde(default)]
    pub rescoring: Rescoring,
}

fn auto() -> QRule {
    QRule::Auto
}

/// Every other value of the published grids.
const FIGURE_T: [usize; 11] = [10, 20, 50, 100, 500, 1000, 1500, 2500, 5000, 7500, 10000];

/// Full `C` and `D` grids of the pattern-level experiments.
const PATTERN_C: [f64; 5] = [2.0, 4.0, 6.0, 8.0, 10.0];
const PATTERN_D: [usize; 5] = [1, 5, 10, 15, 20];

impl BenchmarkConfig {
    /// Desk-scale defaults for each experiment.
    pub fn default_for(experiment: Experiment) -> Self {
        let base = Self {
            experiment,
            c: vec![],
            d: vec![],
            k: vec![],
            l: vec![],
            t: FIGURE_T.to_vec(),
            trials: 2000,
            sigma: 0.0,
            seed: 1,
            q: QRule::Auto,
            rescoring: Rescoring::default(),
        };
        match experiment {
            Experiment::KSuccess => Self {
                c: vec![1.0, 3.0, 5.0, 7.0, 9.0],
                d: (1..=19).step_by(2).collect(),
                k: vec![1, 3, 5],
                l: vec![1, 3, 5],
                ..base
            },
            Experiment::LSuccess => Self {
                c: PATTERN_C.to_vec(),
                d: PATTERN_D.to_vec(),
                k: vec![2, 3, 4, 5],
                l: vec![1, 2, 3, 4, 5],
                trials: 1000,
                ..base
            },
            Experiment::BlockCount => Self {
                c: vec![5.0],
                d: vec![20],
                k: vec![5],
                l: vec![5],
                t: vec![5000],
                trials: 20,
                ..base
            },
            Experiment::HausdorffHist => Self {
                c: PATTERN_C.to_vec(),
                d: PATTERN_D.to_vec(),
                k: vec![2, 3, 4, 5],
                l: vec![1, 2, 3, 4, 5],
                t: vec![100, 500, 1000, 5000],
                trials: 200,
                sigma: 1.0,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        for (name, empty) in [
            ("C", self.c.is_empty()),
            ("D", self.d.is_empty()),
            ("K", self.k.is_empty()),
            ("L", self.l.is_empty()),
            ("T", self.t.is_empty()),
        ] {
            if empty {
                problems.push(format!("grid {name} is empty"));
            }
        }
        if self.trials == 0 {
            problems.push("trials must be >= 1".into());
        }
        if self.c.iter().any(|c| !(*c >= 1.0)) {
            problems.push("C values must be >= 1".into());
        }
        if self.d.iter().chain(&self.k).chain(&self.l).chain(&self.t).any(|v| *v == 0) {
            problems.push("D, K, L and T values must be >= 1".into());
        }
        if !(self.sigma >= 0.0) {
            problems.push("sigma must be >= 0".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(problems.join("; ")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cell {
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "D")]
    pub d: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "L")]
    pub l: usize,
}

fn feasible(experiment: Experiment, cell: &Cell, t: usize) -> bool {
    match experiment {
        Experiment::KSuccess => true,
        Experiment::LSuccess | Experiment::HausdorffHist => (cell.k + 1) * cell.l <= t,
        Experiment::BlockCount => t >= cell.k,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuccessRow {
    pub variant: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub trials: usize,
    pub successes: usize,
}

impl SuccessRow {
    pub fn proportion(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockCountRow {
    pub trial: usize,
    #[serde(rename = "T")]
    pub t: usize,
    /// `Σ_l p^{(l)} (T - K + 1)`.
    pub expected: f64,
    pub found: u64,
    pub expected_per_pattern: Vec<f64>,
    pub found_per_pattern: Vec<u64>,
}

impl BlockCountRow {
    pub fn within_three_sd(&self) -> bool {
        (self.found as f64 - self.expected).abs() <= 3.0 * self.expected.sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceRow {
    #[serde(rename = "T")]
    pub t: usize,
    pub trial: usize,
    pub cell: Cell,
    pub l_hat: Option<usize>,
    pub hausdorff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum BenchmarkResults {
    Success(Vec<SuccessRow>),
    BlockCount(Vec<BlockCountRow>),
    Distances(Vec<DistanceRow>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkOutput {
    pub experiment: Experiment,
    pub results: BenchmarkResults,
    /// Skipped cells and per-trial failures.
    pub log: Vec<String>,
}

impl BenchmarkOutput {
    pub fn success(&self, variant: usize, t: usize) -> Option<&SuccessRow> {
        match &self.results {
            BenchmarkResults::Success(rows) => rows.iter().find(|r| r.variant == variant && r.t == t),
            _ => None,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match &self.results {
            BenchmarkResults::Success(rows) => {
                out.push_str("variant,T,trials,successes,proportion\n");
                for r in rows {
                    let _ = writeln!(out, "{},{},{},{},{:.6}", r.variant, r.t, r.trials, r.successes, r.proportion());
                }
            }
            BenchmarkResults::BlockCount(rows) => {
                out.push_str("trial,T,expected,found,within_3sd\n");
                for r in rows {
                    let _ = writeln!(out, "{},{},{:.6},{},{}", r.trial, r.t, r.expected, r.found, r.within_three_sd());
                }
            }
            BenchmarkResults::Distances(rows) => {
                out.push_str("T,trial,C,D,K,L,L_hat,hausdorff\n");
                for r in rows {
                    let l_hat = r.l_hat.map(|v| v.to_string()).unwrap_or_default();
                    let h = r.hausdorff.map(|v| format!("{v:.16e}")).unwrap_or_default();
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{},{},{}",
                        r.t, r.trial, r.cell.c, r.cell.d, r.cell.k, r.cell.l, l_hat, h
                    );
                }
            }
        }
        out
    }
}

/// Counts windows that are exact profiles, using the innovations: the
/// window starting at `t` is an `l`-profile when `X_{t+i} = a_i^{(l)} Z_t^{(l)}`
/// for every lag and site.
pub fn count_exact_profiles(params: &ParameterSet, sample: &SeriesSample, z: &Innovations) -> Vec<u64> {
    let (k, l) = (params.k(), params.l());
    let mut counts = vec![0u64; l];
    if sample.t < k {
        return counts;
    }
    for start in 0..=sample.t - k {
        for (j, count) in counts.iter_mut().enumerate() {
            let zj = z.at(start, 0, j);
            let hit = (0..k).all(|i| {
                sample
                    .row(start + i)
                    .iter()
                    .zip(params.lag(j, i))
                    .all(|(x, a)| *x == a * zj)
            });
            if hit {
                *count += 1;
                break;
            }
        }
    }
    counts
}

struct Trial {
    t: usize,
    index: usize,
    cell: Cell,
    params_seed: u64,
    series_seed: u64,
}

fn schedule(config: &BenchmarkConfig, log: &mut Vec<String>) -> Vec<Trial> {
    let cells: Vec<Cell> = config
        .c
        .iter()
        .flat_map(|&c| {
            config.d.iter().flat_map(move |&d| {
                config
                    .k
                    .iter()
                    .flat_map(move |&k| config.l.iter().map(move |&l| Cell { c, d, k, l }))
            })
        })
        .collect();
    let mut trials = Vec::new();
    for &t in &config.t {
        let ok: Vec<Cell> = cells.iter().copied().filter(|c| feasible(config.experiment, c, t)).collect();
        for c in cells.iter().filter(|c| !feasible(config.experiment, c, t)) {
            log.push(format!(
                "skip T={t} C={} D={} K={} L={}: infeasible ((K+1)L > T)",
                c.c, c.d, c.k, c.l
            ));
        }
        if ok.is_empty() {
            log.push(format!("skip T={t}: no feasible cell"));
            continue;
        }
        for index in 0..config.trials {
            let key = ((t as u64) << 32) | index as u64;
            trials.push(Trial {
                t,
                index,
                cell: ok[index % ok.len()],
                params_seed: derive_seed(config.seed, "bench-params", key),
                series_seed: derive_seed(config.seed, "bench-series", key),
            });
        }
    }
    trials
}

fn tally(config: &BenchmarkConfig, trials: &[Trial], hits: &[Vec<bool>], variants: usize) -> Vec<SuccessRow> {
    let mut rows = Vec::new();
    for variant in 1..=variants {
        for &t in &config.t {
            let at_t: Vec<&Vec<bool>> = trials.iter().zip(hits).filter(|(tr, _)| tr.t == t).map(|x| x.1).collect();
            if at_t.is_empty() {
                continue;
            }
            rows.push(SuccessRow {
                variant,
                t,
                trials: at_t.len(),
                successes: at_t.iter().filter(|h| h[variant - 1]).count(),
            });
        }
    }
    rows
}

fn trial_failure(log: &mut Vec<String>, trial: &Trial, err: &str) {
    log.push(format!(
        "trial T={} #{} (C={} D={} K={} L={}): {err}",
        trial.t, trial.index, trial.cell.c, trial.cell.d, trial.cell.k, trial.cell.l
    ));
}

pub fn run_benchmark(config: &BenchmarkConfig) -> Result<BenchmarkOutput> {
    config.validate()?;
    let mut log = Vec::new();
    let trials = schedule(config, &mut log);
    let params_of =
        |tr: &Trial| ParameterSet::random(tr.cell.k, tr.cell.l, tr.cell.d, tr.cell.c, tr.params_seed);

    let results = match config.experiment {
        Experiment::KSuccess => {
            let out: Vec<std::result::Result<Vec<bool>, String>> = trials
                .par_iter()
                .map(|tr| {
                    let params = params_of(tr).map_err(|e| e.to_string())?;
                    let sample = simulate(&params, tr.t, config.sigma, tr.series_seed).map_err(|e| e.to_string())?;
                    let ks = estimate_k_all(&sample, tr.cell.c).map_err(|e| e.to_string())?;
                    Ok(ks.iter().map(|k| *k == tr.cell.k).collect())
                })
                .collect();
            let hits = collect_hits(&trials, out, 8, &mut log);
            BenchmarkResults::Success(tally(config, &trials, &hits, 8))
        }
        Experiment::LSuccess => {
            let out: Vec<std::result::Result<Vec<bool>, String>> = trials
                .par_iter()
                .map(|tr| {
                    let params = params_of(tr).map_err(|e| e.to_string())?;
                    let sample = simulate(&params, tr.t, config.sigma, tr.series_seed).map_err(|e| e.to_string())?;
                    let q = config.q.resolve(tr.cell.c, tr.cell.k, tr.t);
                    let ex = extract_blocks(&sample, tr.cell.k, q, config.rescoring).map_err(|e| e.to_string())?;
                    let table = build_table(&ex.blocks).map_err(|e| e.to_string())?;
                    let ls = estimate_l_all(&table, tr.series_seed).map_err(|e| e.to_string())?;
                    Ok(ls.iter().map(|s| s.l == tr.cell.l).collect())
                })
                .collect();
            let hits = collect_hits(&trials, out, 11, &mut log);
            BenchmarkResults::Success(tally(config, &trials, &hits, 11))
        }
        Experiment::BlockCount => {
            let out: Vec<Result<BlockCountRow>> = trials
                .par_iter()
                .map(|tr| {
                    let params = params_of(tr)?;
                    let (sample, z) = simulate_with_innovations(&params, tr.t, 0.0, tr.series_seed)?;
                    let windows = (tr.t - tr.cell.k + 1) as f64;
                    let expected_per_pattern = (0..params.l())
                        .map(|j| profile_probability(&params, j).map(|p| p * windows))
                        .collect::<Result<Vec<f64>>>()?;
                    let found_per_pattern = count_exact_profiles(&params, &sample, &z);
                    Ok(BlockCountRow {
                        trial: tr.index,
                        t: tr.t,
                        expected: expected_per_pattern.iter().sum(),
                        found: found_per_pattern.iter().sum(),
                        expected_per_pattern,
                        found_per_pattern,
                    })
                })
                .collect();
            BenchmarkResults::BlockCount(out.into_iter().collect::<Result<Vec<_>>>()?)
        }
        Experiment::HausdorffHist => {
            let out: Vec<DistanceRow> = trials
                .par_iter()
                .map(|tr| {
                    let row = |l_hat, h| DistanceRow {
                        t: tr.t,
                        trial: tr.index,
                        cell: tr.cell,
                        l_hat,
                        hausdorff: h,
                    };
                    let Ok(params) = params_of(tr) else {
                        return row(None, None);
                    };
                    let Ok(sample) = simulate(&params, tr.t, config.sigma, tr.series_seed) else {
                        return row(None, None);
                    };
                    let options = FitOptions {
                        k: Some(tr.cell.k),
                        l: Some(tr.cell.l),
                        algorithm: Some(Algorithm::Pam),
                        q: config.q,
                        rescoring: config.rescoring,
                        seed: tr.series_seed,
                        ..FitOptions::default()
                    };
                    match fit_pipeline(&sample, tr.cell.c, &options) {
                        Ok(report) => row(Some(report.l_hat), hausdorff(&params, &report.fitted).ok()),
                        Err(_) => row(None, None),
                    }
                })
                .collect();
            for (tr, r) in trials.iter().zip(&out) {
                if r.hausdorff.is_none() {
                    trial_failure(&mut log, tr, "pipeline failed");
                }
            }
            BenchmarkResults::Distances(out)
        }
    };
    Ok(BenchmarkOutput {
        experiment: config.experiment,
        results,
        log,
    })
}

fn collect_hits(
    trials: &[Trial],
    out: Vec<std::result::Result<Vec<bool>, String>>,
    variants: usize,
    log: &mut Vec<String>,
) -> Vec<Vec<bool>> {
    trials
        .iter()
        .zip(out)
        .map(|(tr, r)| {
            r.unwrap_or_else(|e| {
                trial_failure(log, tr, &e);
                vec![false; variants]
            })
        })
        .collect()
}
