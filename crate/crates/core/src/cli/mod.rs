//! Command-line interface.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data errors.

pub mod bench;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::blocks::{extract_blocks, BlockShape, Extraction, QRule, Rescoring};
use crate::cluster::{self, build_table, Algorithm, Clusterer};
use crate::decluster::{cluster_sizes, estimate_k_all, KEstimator, ScanMode};
use crate::error::Error;
use crate::evaluate::{evaluate_fit, EstimationReport};
use crate::fit::{fit_pipeline, FitOptions, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::io;
use crate::model::ParameterSet;
use crate::simulate::simulate;
use crate::theory;

use bench::{run_benchmark, BenchmarkConfig, Experiment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "cm3", version, about = "Simulate and fit moving-maxima extreme-value processes")]
struct Cli {
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a series from a parameter file or from random parameters.
    Simulate {
        /// Parameter set JSON; random parameters are drawn when absent.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long = "K", default_value_t = 2)]
        k: usize,
        #[arg(long = "L", default_value_t = 1)]
        l: usize,
        #[arg(long = "D", default_value_t = 1)]
        d: usize,
        /// Variation bound for random parameters.
        #[arg(long = "C", default_value_t = 2.0)]
        c: f64,
        #[arg(long = "T")]
        t: usize,
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        /// Where to write the parameters that were used.
        #[arg(long)]
        params_out: Option<PathBuf>,
    },
    /// Closed-form quantities of a parameter set.
    Theory {
        #[arg(long)]
        params: PathBuf,
        /// Target number of occurrences of each profile for the sample-size rule.
        #[arg(long = "M", default_value_t = 1)]
        m: usize,
    },
    /// Estimate the temporal dependence length K.
    EstimateK {
        #[arg(long)]
        input: PathBuf,
        #[arg(long = "C")]
        c: f64,
        /// Estimator 1..8; all eight when absent.
        #[arg(long)]
        variant: Option<usize>,
    },
    /// Extract blocks of extremes.
    Extract {
        #[arg(long)]
        input: PathBuf,
        #[arg(long = "K")]
        k: usize,
        /// Number of blocks, or `auto` (needs --C).
        #[arg(long = "Q", default_value = "auto")]
        q: QRule,
        #[arg(long = "C")]
        c: Option<f64>,
        #[arg(long, default_value = "masked", value_parser = parse_rescoring)]
        rescoring: Rescoring,
    },
    /// Estimate the number of patterns L from extracted blocks.
    EstimateL {
        #[arg(long)]
        blocks: PathBuf,
        /// Estimator 1..11.
        #[arg(long, default_value_t = 2)]
        variant: usize,
        /// Evaluate every k up to k_max instead of stopping early.
        #[arg(long)]
        full: bool,
    },
    /// Run the full estimation pipeline.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long = "C")]
        c: f64,
        #[arg(long = "K")]
        k: Option<usize>,
        #[arg(long = "L")]
        l: Option<usize>,
        #[arg(long)]
        k_variant: Option<usize>,
        #[arg(long)]
        l_variant: Option<usize>,
        #[arg(long, value_parser = parse_algorithm)]
        algorithm: Option<Algorithm>,
        #[arg(long = "Q", default_value = "auto")]
        q: QRule,
        #[arg(long, default_value = "masked", value_parser = parse_rescoring)]
        rescoring: Rescoring,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
        max_iter: usize,
    },
    /// Score an estimation report against the true parameters.
    Evaluate {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Run a seeded Monte Carlo benchmark.
    Benchmark {
        experiment: String,
        /// Benchmark config JSON; desk defaults when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the number of trials per T.
        #[arg(long)]
        trials: Option<usize>,
    },
}

fn parse_rescoring(s: &str) -> Result<Rescoring, String> {
    match s {
        "per-iteration" => Ok(Rescoring::PerIteration),
        "masked" => Ok(Rescoring::Masked),
        _ => Err(format!("expected 'per-iteration' or 'masked', got '{s}'")),
    }
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Data(e.into())
    }
}

type CliResult<T> = Result<T, Failure>;

/// Parses `argv` (including the program name), runs the command and returns
/// the exit code.
pub fn cli_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            1
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::Data(e.into())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Data(e.into()))?;
    Ok(serde_json::from_str(&text)?)
}

fn json_only(format: Option<Format>, command: &str) -> CliResult<()> {
    match format {
        Some(Format::Csv) => Err(Failure::Usage(format!("{command} has no CSV output"))),
        _ => Ok(()),
    }
}

#[derive(Serialize)]
struct TheoryOutput {
    variation_bound: crate::model::VariationBound,
    probabilities: theory::ProfileProbabilities,
    minima: Vec<theory::MinimaMatrix>,
    extremal_index: f64,
    min_sample_size: u64,
}

#[derive(Serialize)]
struct KOutput {
    estimates: Vec<KEntry>,
    scalar_sizes: Vec<usize>,
    multivariate_sizes: Vec<usize>,
}

#[derive(Serialize)]
struct KEntry {
    variant: usize,
    #[serde(rename = "K")]
    k: usize,
}

#[derive(Deserialize)]
struct BlocksFile {
    blocks: Vec<BlockShape>,
}

fn run(cli: Cli) -> CliResult<()> {
    let seed = cli.seed.unwrap_or(0);
    let out = cli.out.as_deref();
    match cli.command {
        Command::Simulate {
            params,
            k,
            l,
            d,
            c,
            t,
            sigma,
            params_out,
        } => {
            let params: ParameterSet = match params {
                Some(path) => read_json(&path)?,
                None => ParameterSet::random(k, l, d, c, seed)?,
            };
            let sample = simulate(&params, t, sigma, seed)?;
            if let Some(p) = params_out {
                fs::write(p, to_json(&params)?).map_err(|e| Failure::Data(e.into()))?;
            }
            match (cli.format, out) {
                (Some(Format::Json), _) => emit(out, &to_json(&sample)?),
                (_, Some(path)) => Ok(io::write_series(path, &sample)?),
                (_, None) => emit(None, &io::series_to_csv(&sample)),
            }
        }
        Command::Theory { params, m } => {
            json_only(cli.format, "theory")?;
            let params: ParameterSet = read_json(&params)?;
            let bound = params.variation_bound()?;
            let output = TheoryOutput {
                min_sample_size: theory::min_sample_size(bound.global, params.k(), m),
                variation_bound: bound,
                probabilities: theory::profile_probabilities(&params)?,
                minima: theory::minima_matrices(&params)?,
                extremal_index: theory::extremal_index(&params)?,
            };
            emit(out, &to_json(&output)?)
        }
        Command::EstimateK { input, c, variant } => {
            let sample = io::read_series(&input)?;
            let all = estimate_k_all(&sample, c)?;
            let estimates: Vec<KEntry> = match variant {
                Some(v) => {
                    let est = KEstimator::from_index(v).map_err(|e| Failure::Usage(e.to_string()))?;
                    vec![KEntry {
                        variant: v,
                        k: all[est.index() - 1],
                    }]
                }
                None => (1..=8).map(|v| KEntry { variant: v, k: all[v - 1] }).collect(),
            };
            if cli.format == Some(Format::Csv) {
                let mut text = String::from("variant,K\n");
                for e in &estimates {
                    let _ = writeln!(text, "{},{}", e.variant, e.k);
                }
                return emit(out, &text);
            }
            let output = KOutput {
                estimates,
                scalar_sizes: cluster_sizes(&sample, c, ScanMode::Scalar)?.sizes,
                multivariate_sizes: cluster_sizes(&sample, c, ScanMode::Multivariate)?.sizes,
            };
            emit(out, &to_json(&output)?)
        }
        Command::Extract {
            input,
            k,
            q,
            c,
            rescoring,
        } => {
            let sample = io::read_series(&input)?;
            let q = match (q, c) {
                (QRule::Auto, None) => return Err(Failure::Usage("--Q auto needs --C".into())),
                (QRule::Auto, Some(c)) => QRule::Auto.resolve(c, k, sample.t),
                (QRule::Fixed(q), _) => q,
            };
            let extraction: Extraction = extract_blocks(&sample, k, q, rescoring)?;
            if cli.format == Some(Format::Csv) {
                let mut text = String::from("start,norm");
                for d in 1..=sample.d {
                    for i in 0..k {
                        let _ = write!(text, ",d{d}_{i}");
                    }
                }
                text.push('\n');
                for b in &extraction.blocks {
                    let _ = write!(text, "{},{:.16e}", b.start + 1, b.norm);
                    for v in cluster::flatten_block(&b.matrix) {
                        let _ = write!(text, ",{v:.16e}");
                    }
                    text.push('\n');
                }
                return emit(out, &text);
            }
            emit(out, &to_json(&extraction)?)
        }
        Command::EstimateL { blocks, variant, full } => {
            let file: BlocksFile = read_json(&blocks)?;
            let table = build_table(&file.blocks)?;
            let selection = match (variant, full) {
                (11, _) => cluster::estimate_l(&table, 11, seed)?,
                (v, full) => {
                    let (algorithm, criterion) = cluster::variant_spec(v).map_err(|e| Failure::Usage(e.to_string()))?;
                    let mut cl = Clusterer::new(&table, seed);
                    let criteria = [criterion];
                    cluster::select_many(&mut cl, algorithm, &criteria, full)?.remove(0)
                }
            };
            if cli.format == Some(Format::Csv) {
                let mut text = String::from("k,sse_ratio,total_silhouette_ratio\n");
                for m in &selection.per_k_metrics {
                    let sil = m.total_silhouette_ratio.map(|s| format!("{s:.16e}")).unwrap_or_default();
                    let _ = writeln!(text, "{},{:.16e},{}", m.k, m.sse_ratio, sil);
                }
                return emit(out, &text);
            }
            emit(out, &to_json(&selection)?)
        }
        Command::Fit {
            input,
            c,
            k,
            l,
            k_variant,
            l_variant,
            algorithm,
            q,
            rescoring,
            tol,
            max_iter,
        } => {
            json_only(cli.format, "fit")?;
            if k_variant.is_some_and(|v| !(1..=8).contains(&v)) {
                return Err(Failure::Usage("--k-variant must be 1..8".into()));
            }
            if l_variant.is_some_and(|v| !(1..=11).contains(&v)) {
                return Err(Failure::Usage("--l-variant must be 1..11".into()));
            }
            let sample = io::read_series(&input)?;
            let options = FitOptions {
                k,
                l,
                k_variant,
                l_variant,
                algorithm,
                q,
                rescoring,
                tol,
                max_iter,
                seed,
            };
            let report = fit_pipeline(&sample, c, &options)?;
            emit(out, &to_json(&report)?)
        }
        Command::Evaluate { truth, report } => {
            json_only(cli.format, "evaluate")?;
            let truth: ParameterSet = read_json(&truth)?;
            let report: EstimationReport = read_json(&report)?;
            emit(out, &to_json(&evaluate_fit(&truth, &report))?)
        }
        Command::Benchmark {
            experiment,
            config,
            trials,
        } => {
            let experiment: Experiment = experiment.parse().map_err(|e: Error| Failure::Usage(e.to_string()))?;
            let mut cfg = match config {
                Some(path) => read_json::<BenchmarkConfig>(&path)?,
                None => BenchmarkConfig::default_for(experiment),
            };
            if cfg.experiment != experiment {
                return Err(Failure::Usage(format!(
                    "config is for {}, not {}",
                    cfg.experiment.name(),
                    experiment.name()
                )));
            }
            if let Some(n) = trials {
                cfg.trials = n;
            }
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let output = run_benchmark(&cfg)?;
            for line in &output.log {
                eprintln!("{line}");
            }
            match cli.format {
                Some(Format::Json) => emit(out, &to_json(&output)?),
                _ => emit(out, &output.to_csv()),
            }
        }
    }
}
