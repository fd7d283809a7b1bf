//! Clustering of block shapes and selection of the number of patterns.
//!
//! Each extracted block becomes one row of a [`ShapeTable`]: the `D` site
//! vectors of length `K` placed one after another. Rows are clustered by one
//! of five algorithms and the number of clusters is chosen by the elbow rule
//! (`SSE / SStot <= 0.20`) or the silhouette rule (`TtSil / Q >= 0.85`).

pub mod hierarchical;
pub mod kmeans;
pub mod pam;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::blocks::BlockShape;
use crate::error::{Error, Result};

pub const ELBOW_THRESHOLD: f64 = 0.20;
pub const SILHOUETTE_THRESHOLD: f64 = 0.85;
pub const LOW_VARIANCE: f64 = 0.005;
pub const MAX_CLUSTERS: usize = 30;

pub const FLAG_CRITERION_UNMET: &str = "criterion-unmet";
pub const FLAG_LOW_VARIANCE: &str = "low-variance";
pub const FLAG_SINGLE_CLUSTER: &str = "single-cluster-silhouette";

/// `Q × (K·D)` table, row-major; row `q` holds site 1's `K` values, then
/// site 2's, and so on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeTable {
    pub q: usize,
    pub k: usize,
    pub d: usize,
    pub data: Vec<f64>,
}

impl ShapeTable {
    pub fn from_rows(k: usize, d: usize, rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() || k * d == 0 {
            return Err(Error::Dimension("shape table needs Q >= 1 and K*D >= 1".into()));
        }
        if let Some(r) = rows.iter().find(|r| r.len() != k * d) {
            return Err(Error::Dimension(format!("row of length {} in a table with K*D = {}", r.len(), k * d)));
        }
        Ok(Self {
            q: rows.len(),
            k,
            d,
            data: rows.concat(),
        })
    }

    pub fn cols(&self) -> usize {
        self.k * self.d
    }

    pub fn row(&self, q: usize) -> &[f64] {
        let c = self.cols();
        &self.data[q * c..(q + 1) * c]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.q).map(|q| self.row(q).to_vec()).collect()
    }

    /// Inverse of the row layout: `K` rows (time) of `D` values.
    pub fn unflatten(&self, row: &[f64]) -> Vec<Vec<f64>> {
        (0..self.k)
            .map(|i| (0..self.d).map(|d| row[d * self.k + i]).collect())
            .collect()
    }
}

pub fn flatten_block(matrix: &[Vec<f64>]) -> Vec<f64> {
    let k = matrix.len();
    let d = matrix.first().map_or(0, Vec::len);
    (0..d).flat_map(|s| (0..k).map(move |i| matrix[i][s])).collect()
}

pub fn build_table(blocks: &[BlockShape]) -> Result<ShapeTable> {
    let first = blocks
        .first()
        .ok_or_else(|| Error::Dimension("no blocks to tabulate".into()))?;
    let (k, d) = (first.k(), first.d());
    if let Some(b) = blocks.iter().find(|b| b.k() != k || b.d() != d) {
        return Err(Error::Dimension(format!(
            "block at t={} is {}x{}, expected {k}x{d}",
            b.start,
            b.k(),
            b.d()
        )));
    }
    let rows: Vec<Vec<f64>> = blocks.iter().map(|b| flatten_block(&b.matrix)).collect();
    ShapeTable::from_rows(k, d, &rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Ward,
    Centroid,
    KmeansEuclid,
    KmeansPearson,
    Pam,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Ward,
        Algorithm::Centroid,
        Algorithm::KmeansEuclid,
        Algorithm::KmeansPearson,
        Algorithm::Pam,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Ward => "ward",
            Algorithm::Centroid => "centroid",
            Algorithm::KmeansEuclid => "kmeans-euclid",
            Algorithm::KmeansPearson => "kmeans-pearson",
            Algorithm::Pam => "pam",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown algorithm '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Elbow,
    Silhouette,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Linkage {
    Ward,
    Centroid,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterModel {
    pub algorithm: Algorithm,
    pub k: usize,
    /// Cluster index per row, in `0..k`, numbered by first appearance.
    pub labels: Vec<usize>,
    /// One table row per cluster: means, or medoids for PAM.
    pub representatives: Vec<Vec<f64>>,
    pub sizes: Vec<usize>,
    pub sse_ratio: f64,
    pub silhouettes: Vec<f64>,
    pub total_silhouette_ratio: f64,
    /// k-means objective per iteration, or PAM cost after BUILD and each swap.
    pub objective: Vec<f64>,
}

/// Renumbers arbitrary cluster ids by order of first appearance.
pub fn canonical_labels(raw: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    raw.iter()
        .map(|r| {
            let next = map.len();
            *map.entry(*r).or_insert(next)
        })
        .collect()
}

pub fn squared_distances(rows: &[Vec<f64>]) -> (Vec<f64>, usize) {
    let n = rows.len();
    let mut sq = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            sq[i * n + j] = d;
            sq[j * n + i] = d;
        }
    }
    (sq, n)
}

fn cluster_means(table: &ShapeTable, labels: &[usize], k: usize) -> Vec<Vec<f64>> {
    let c = table.cols();
    let mut sums = vec![vec![0.0; c]; k];
    let mut counts = vec![0usize; k];
    for (q, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(table.row(q)) {
            *s += v;
        }
    }
    sums.into_iter()
        .zip(counts)
        .map(|(s, n)| s.into_iter().map(|v| v / n as f64).collect())
        .collect()
}

/// Sum over clusters and variables of `(nbobs - 1) s^2`, i.e. the centered
/// sum of squares.
fn within_sum_of_squares(table: &ShapeTable, labels: &[usize], k: usize) -> f64 {
    let means = cluster_means(table, labels, k);
    labels
        .iter()
        .enumerate()
        .map(|(q, &l)| {
            table
                .row(q)
                .iter()
                .zip(&means[l])
                .map(|(x, m)| (x - m) * (x - m))
                .sum::<f64>()
        })
        .sum()
}

/// `SSE / SStot`; 0 when the table has no spread.
pub fn sse_ratio(table: &ShapeTable, labels: &[usize]) -> f64 {
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    let sse = within_sum_of_squares(table, labels, k);
    let tot = within_sum_of_squares(table, &vec![0; table.q], 1);
    if tot > 0.0 {
        sse / tot
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Silhouette {
    pub values: Vec<f64>,
    pub total_ratio: f64,
    pub diagnostic: Option<String>,
}

/// Silhouettes from a precomputed `n × n` dissimilarity matrix.
pub fn silhouette_from(dist: &[f64], n: usize, labels: &[usize]) -> Silhouette {
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    if k < 2 {
        return Silhouette {
            values: vec![0.0; n],
            total_ratio: 0.0,
            diagnostic: Some("silhouette undefined for a single cluster".into()),
        };
    }
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    let mut values = vec![0.0; n];
    let mut sums = vec![0.0; k];
    for q in 0..n {
        let own = labels[q];
        if sizes[own] == 1 {
            continue;
        }
        sums.iter_mut().for_each(|s| *s = 0.0);
        for p in 0..n {
            sums[labels[p]] += dist[q * n + p];
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        values[q] = if m > 0.0 { (b - a) / m } else { 0.0 };
    }
    let total_ratio = values.iter().sum::<f64>() / n as f64;
    Silhouette {
        values,
        total_ratio,
        diagnostic: None,
    }
}

/// Silhouettes under squared Euclidean distance; singletons score 0.
pub fn silhouette(table: &ShapeTable, labels: &[usize]) -> Silhouette {
    let (sq, n) = squared_distances(&table.rows());
    silhouette_from(&sq, n, labels)
}

/// True when every column's sample variance is below [`LOW_VARIANCE`]
/// (always true for a single row).
pub fn low_variance(table: &ShapeTable) -> bool {
    if table.q < 2 {
        return true;
    }
    let n = table.q as f64;
    (0..table.cols()).all(|c| {
        let mean = (0..table.q).map(|q| table.row(q)[c]).sum::<f64>() / n;
        let var = (0..table.q).map(|q| (table.row(q)[c] - mean).powi(2)).sum::<f64>() / (n - 1.0);
        var < LOW_VARIANCE
    })
}

/// Caches the distance matrices and dendrograms shared across `k`.
pub struct Clusterer<'a> {
    table: &'a ShapeTable,
    seed: u64,
    sq: Vec<f64>,
    euclid: Option<Vec<f64>>,
    standardized: Option<Vec<Vec<f64>>>,
    ward: Option<hierarchical::Dendrogram>,
    centroid: Option<hierarchical::Dendrogram>,
}

impl<'a> Clusterer<'a> {
    pub fn new(table: &'a ShapeTable, seed: u64) -> Self {
        let (sq, _) = squared_distances(&table.rows());
        Self {
            table,
            seed,
            sq,
            euclid: None,
            standardized: None,
            ward: None,
            centroid: None,
        }
    }

    pub fn table(&self) -> &ShapeTable {
        self.table
    }

    fn raw_partition(&mut self, algorithm: Algorithm, k: usize) -> (Vec<usize>, Option<Vec<usize>>, Vec<f64>) {
        let n = self.table.q;
        match algorithm {
            Algorithm::Ward | Algorithm::Centroid => {
                let (slot, linkage) = match algorithm {
                    Algorithm::Ward => (&mut self.ward, Linkage::Ward),
                    _ => (&mut self.centroid, Linkage::Centroid),
                };
                let sq = &self.sq;
                let dendro = slot.get_or_insert_with(|| hierarchical::linkage(sq, n, linkage));
                (dendro.cut(k), None, Vec::new())
            }
            Algorithm::KmeansEuclid => {
                let fit = kmeans::kmeans(&self.table.rows(), k, kmeans::Metric::SquaredEuclidean, self.seed);
                (fit.labels, None, fit.objective)
            }
            Algorithm::KmeansPearson => {
                let table = self.table;
                let rows = self
                    .standardized
                    .get_or_insert_with(|| table.rows().iter().map(|r| kmeans::standardize(r)).collect());
                let fit = kmeans::kmeans(rows, k, kmeans::Metric::Correlation, self.seed);
                (fit.labels, None, fit.objective)
            }
            Algorithm::Pam => {
                let sq = &self.sq;
                let euclid = self.euclid.get_or_insert_with(|| sq.iter().map(|v| v.sqrt()).collect());
                let fit = pam::pam(euclid, n, k);
                let mut labels = fit.labels;
                for (pos, &m) in fit.medoids.iter().enumerate() {
                    labels[m] = pos;
                }
                (labels, Some(fit.medoids), fit.cost)
            }
        }
    }

    /// Partitions the table into `k` clusters.
    pub fn fit(&mut self, algorithm: Algorithm, k: usize) -> Result<ClusterModel> {
        let n = self.table.q;
        if k == 0 || k > n {
            return Err(Error::InvalidArgument(format!("k = {k} outside 1..={n}")).at(crate::error::Stage::Clustering));
        }
        let (raw, medoids, objective) = self.raw_partition(algorithm, k);
        let labels = canonical_labels(&raw);
        let k = labels.iter().copied().max().map_or(0, |m| m + 1);
        let representatives = match medoids {
            Some(meds) => {
                let mut reps = vec![Vec::new(); k];
                for m in meds {
                    reps[labels[m]] = self.table.row(m).to_vec();
                }
                reps
            }
            None => cluster_means(self.table, &labels, k),
        };
        let mut sizes = vec![0usize; k];
        for &l in &labels {
            sizes[l] += 1;
        }
        let sil = silhouette_from(&self.sq, n, &labels);
        Ok(ClusterModel {
            algorithm,
            k,
            sse_ratio: sse_ratio(self.table, &labels),
            labels,
            representatives,
            sizes,
            silhouettes: sil.values,
            total_silhouette_ratio: sil.total_ratio,
            objective,
        })
    }
}

/// One-shot clustering; `seed` drives k-means initialization.
pub fn cluster(table: &ShapeTable, algorithm: Algorithm, k: usize, seed: u64) -> Result<ClusterModel> {
    Clusterer::new(table, seed).fit(algorithm, k)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KMetrics {
    pub k: usize,
    pub sse_ratio: f64,
    /// Absent for `k = 1`.
    pub total_silhouette_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Selection {
    #[serde(rename = "L")]
    pub l: usize,
    pub flags: Vec<String>,
    pub per_k_metrics: Vec<KMetrics>,
}

impl Selection {
    pub fn criterion_met(&self) -> bool {
        !self.flags.iter().any(|f| f == FLAG_CRITERION_UNMET)
    }
}

/// Largest number of clusters scanned on `q` rows.
pub fn k_max(q: usize) -> usize {
    q.min(MAX_CLUSTERS)
}

fn pick(metrics: &[KMetrics], criterion: Criterion) -> Selection {
    let selected = match criterion {
        Criterion::Elbow => metrics.iter().find(|m| m.sse_ratio <= ELBOW_THRESHOLD),
        Criterion::Silhouette => metrics
            .iter()
            .find(|m| m.total_silhouette_ratio.is_some_and(|s| s >= SILHOUETTE_THRESHOLD)),
    };
    if let Some(m) = selected {
        return Selection {
            l: m.k,
            flags: Vec::new(),
            per_k_metrics: metrics.to_vec(),
        };
    }
    // Best value, smallest k on ties.
    let fallback = match criterion {
        Criterion::Elbow => metrics
            .iter()
            .fold(None::<&KMetrics>, |b, m| match b {
                Some(b) if b.sse_ratio <= m.sse_ratio => Some(b),
                _ => Some(m),
            })
            .map(|m| m.k),
        Criterion::Silhouette => metrics
            .iter()
            .filter_map(|m| m.total_silhouette_ratio.map(|s| (m.k, s)))
            .fold(None::<(usize, f64)>, |b, m| match b {
                Some(b) if b.1 >= m.1 => Some(b),
                _ => Some(m),
            })
            .map(|m| m.0),
    };
    Selection {
        l: fallback.unwrap_or(1),
        flags: vec![FLAG_CRITERION_UNMET.into()],
        per_k_metrics: metrics.to_vec(),
    }
}

fn low_variance_selection() -> Selection {
    Selection {
        l: 1,
        flags: vec![FLAG_LOW_VARIANCE.into()],
        per_k_metrics: Vec::new(),
    }
}

/// Scans `k = 1..=k_max` once for one algorithm, stopping as soon as every
/// requested criterion is met (or never, with `full`).
pub fn select_many(
    clusterer: &mut Clusterer<'_>,
    algorithm: Algorithm,
    criteria: &[Criterion],
    full: bool,
) -> Result<Vec<Selection>> {
    if low_variance(clusterer.table()) {
        return Ok(criteria.iter().map(|_| low_variance_selection()).collect());
    }
    let mut metrics = Vec::new();
    for k in 1..=k_max(clusterer.table().q) {
        let model = clusterer.fit(algorithm, k)?;
        metrics.push(KMetrics {
            k,
            sse_ratio: model.sse_ratio,
            total_silhouette_ratio: (k >= 2).then_some(model.total_silhouette_ratio),
        });
        let all_met = criteria.iter().all(|c| match c {
            Criterion::Elbow => metrics.iter().any(|m| m.sse_ratio <= ELBOW_THRESHOLD),
            Criterion::Silhouette => metrics
                .iter()
                .any(|m| m.total_silhouette_ratio.is_some_and(|s| s >= SILHOUETTE_THRESHOLD)),
        });
        if all_met && !full {
            break;
        }
    }
    Ok(criteria.iter().map(|c| pick(&metrics, *c)).collect())
}

pub fn select_k(table: &ShapeTable, algorithm: Algorithm, criterion: Criterion, seed: u64) -> Result<Selection> {
    let mut cl = Clusterer::new(table, seed);
    Ok(select_many(&mut cl, algorithm, &[criterion], false)?.remove(0))
}

/// (algorithm, criterion) of the estimators `L̂1..L̂10`.
pub fn variant_spec(variant: usize) -> Result<(Algorithm, Criterion)> {
    if !(1..=10).contains(&variant) {
        return Err(Error::InvalidArgument(format!("L estimator variant {variant} has no single algorithm")));
    }
    let algorithm = Algorithm::ALL[(variant - 1) / 2];
    let criterion = if variant % 2 == 1 {
        Criterion::Elbow
    } else {
        Criterion::Silhouette
    };
    Ok((algorithm, criterion))
}

/// Most frequent value; ties go to the smaller value.
fn mode_of(values: &[usize]) -> usize {
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    let mut best = (sorted[0], 0);
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|v| **v == sorted[i]).count();
        if j > best.1 {
            best = (sorted[i], j);
        }
        i += j;
    }
    best.0
}

/// All eleven estimates; entry `v - 1` is `L̂v`.
pub fn estimate_l_all(table: &ShapeTable, seed: u64) -> Result<[Selection; 11]> {
    let mut cl = Clusterer::new(table, seed);
    let mut out: Vec<Selection> = Vec::with_capacity(11);
    for algorithm in Algorithm::ALL {
        out.extend(select_many(&mut cl, algorithm, &[Criterion::Elbow, Criterion::Silhouette], false)?);
    }
    let ls: Vec<usize> = out.iter().map(|s| s.l).collect();
    out.push(Selection {
        l: mode_of(&ls),
        flags: Vec::new(),
        per_k_metrics: Vec::new(),
    });
    Ok(out.try_into().expect("eleven selections"))
}

/// Estimator `L̂variant` for `variant` in `1..=11`.
pub fn estimate_l(table: &ShapeTable, variant: usize, seed: u64) -> Result<Selection> {
    match variant {
        11 => Ok(estimate_l_all(table, seed)?[10].clone()),
        v => {
            let (algorithm, criterion) = variant_spec(v)?;
            select_k(table, algorithm, criterion, seed)
        }
    }
}
