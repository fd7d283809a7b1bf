//! Series files: a CSV with header `t,d1,…,dD` plus a JSON sidecar holding
//! `{T, D, sigma, seed}`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulate::SeriesSample;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(rename = "D")]
    pub d: usize,
    pub sigma: f64,
    pub seed: u64,
}

/// `series.csv` -> `series.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// CSV text; values in `{:.16e}`, which round-trips every `f64`.
pub fn series_to_csv(sample: &SeriesSample) -> String {
    let mut out = String::from("t");
    for d in 1..=sample.d {
        let _ = write!(out, ",d{d}");
    }
    out.push('\n');
    for t in 0..sample.t {
        let _ = write!(out, "{}", t + 1);
        for v in sample.row(t) {
            let _ = write!(out, ",{v:.16e}");
        }
        out.push('\n');
    }
    out
}

pub fn series_from_csv(text: &str) -> Result<SeriesSample> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Parse("empty series file".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.first() != Some(&"t") {
        return Err(Error::Parse(format!("header must start with 't', got {header:?}")));
    }
    let d = cols.len() - 1;
    let mut values = Vec::new();
    let mut t = 0;
    for (n, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != d + 1 {
            return Err(Error::Parse(format!("line {}: {} fields, expected {}", n + 2, fields.len(), d + 1)));
        }
        for f in &fields[1..] {
            let v: f64 = f
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad number {f:?}", n + 2)))?;
            if !v.is_finite() {
                return Err(Error::Parse(format!("line {}: non-finite value", n + 2)));
            }
            values.push(v);
        }
        t += 1;
    }
    SeriesSample::new(t, d, values, 0.0, 0)
}

pub fn write_series(path: &Path, sample: &SeriesSample) -> Result<()> {
    fs::write(path, series_to_csv(sample))?;
    let side = Sidecar {
        t: sample.t,
        d: sample.d,
        sigma: sample.sigma,
        seed: sample.seed,
    };
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&side)? + "\n")?;
    Ok(())
}

/// Reads a series CSV, taking `sigma` and `seed` from the sidecar if present.
pub fn read_series(path: &Path) -> Result<SeriesSample> {
    let mut sample = series_from_csv(&fs::read_to_string(path)?)?;
    let side = sidecar_path(path);
    if side.exists() {
        let meta: Sidecar = serde_json::from_str(&fs::read_to_string(side)?)?;
        if meta.t != sample.t || meta.d != sample.d {
            return Err(Error::Dimension(format!(
                "sidecar says T={}, D={}; CSV has T={}, D={}",
                meta.t, meta.d, sample.t, sample.d
            )));
        }
        sample.sigma = meta.sigma;
        sample.seed = meta.seed;
    }
    Ok(sample)
}
