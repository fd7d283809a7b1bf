//! Location of blocks of extremes.
//!
//! Each site marks its `K` largest values, the marks are summed over sites
//! into a per-time score `λ`, and the trailing moving sum of order `K` ranks
//! the windows. The best window is stored after dividing by the sup norm of
//! its first time slice, overlapping windows are discarded and the search
//! repeats until `Q` disjoint blocks are collected.

use serde::{Deserialize, Serialize};

use crate::decluster::Marks;
use crate::error::{Error, Result};
use crate::simulate::{sup_norm_series, SeriesSample};
use crate::theory::global_lower_bound;

/// Cap on the automatic number of blocks.
pub const MAX_AUTO_BLOCKS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockShape {
    /// First time index of the block (0-based).
    pub start: usize,
    /// Divisor `‖X_start‖_∞`.
    pub norm: f64,
    /// `K` rows of `D` normalized values.
    pub matrix: Vec<Vec<f64>>,
}

impl BlockShape {
    pub fn k(&self) -> usize {
        self.matrix.len()
    }

    pub fn d(&self) -> usize {
        self.matrix.first().map_or(0, Vec::len)
    }

    pub fn end(&self) -> usize {
        self.start + self.k() - 1
    }
}

/// Per-time extremal status sums and their trailing moving sums.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockScore {
    pub lambda: Vec<u32>,
    pub ms: Vec<u32>,
}

/// How scores evolve after a block has been extracted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rescoring {
    /// Scores are computed once; extracted windows are only masked.
    #[default]
    Masked,
    /// Marks are recomputed on the time points not yet covered by a block.
    PerIteration,
}

/// Requested number of blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QRule {
    Auto,
    Fixed(usize),
}

impl QRule {
    pub fn resolve(self, c: f64, k: usize, t: usize) -> usize {
        match self {
            QRule::Auto => auto_q(c, k, t),
            QRule::Fixed(q) => q,
        }
    }
}

impl std::str::FromStr for QRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(QRule::Auto);
        }
        s.parse::<usize>()
            .ok()
            .filter(|q| *q >= 1)
            .map(QRule::Fixed)
            .ok_or_else(|| Error::Parse(format!("Q must be a positive integer or 'auto', got {s:?}")))
    }
}

/// `min(ceil(T / (C (2K - 1))), 100)`, at least 1.
pub fn auto_q(c: f64, k: usize, t: usize) -> usize {
    let q = (global_lower_bound(c, k) * t as f64).ceil() as usize;
    q.clamp(1, MAX_AUTO_BLOCKS)
}

/// Marks the `K` largest values of `column`, restricted to `available`
/// times; equal values are taken in time order.
fn mark_largest(column: &[f64], available: &[bool], k: usize, marks: &mut [u32]) {
    let mut idx: Vec<usize> = (0..column.len()).filter(|&t| available[t]).collect();
    let by_rank = |a: &usize, b: &usize| column[*b].total_cmp(&column[*a]).then(a.cmp(b));
    if idx.len() > k {
        idx.select_nth_unstable_by(k - 1, by_rank);
        idx.truncate(k);
    }
    for t in idx {
        marks[t] += 1;
    }
}

fn scores_on(sample: &SeriesSample, k: usize, available: &[bool]) -> BlockScore {
    let mut lambda = vec![0u32; sample.t];
    for d in 0..sample.d {
        mark_largest(&sample.column(d), available, k, &mut lambda);
    }
    let mut ms = vec![0u32; sample.t];
    let mut acc = 0u32;
    for t in 0..sample.t {
        acc += lambda[t];
        if t >= k {
            acc -= lambda[t - k];
        }
        ms[t] = acc;
    }
    BlockScore { lambda, ms }
}

/// Per-site extremal status: `(t, d)` is marked when `X_t(d)` is among the
/// `K` largest values of site `d`.
pub fn extremal_status(sample: &SeriesSample, k: usize) -> Result<Marks> {
    check_dims(sample, k)?;
    let all = vec![true; sample.t];
    let mut marks = vec![false; sample.t * sample.d];
    let mut column_marks = vec![0u32; sample.t];
    for d in 0..sample.d {
        column_marks.iter_mut().for_each(|m| *m = 0);
        mark_largest(&sample.column(d), &all, k, &mut column_marks);
        for (t, m) in column_marks.iter().enumerate() {
            marks[t * sample.d + d] = *m > 0;
        }
    }
    Ok(Marks {
        t: sample.t,
        columns: sample.d,
        marks,
    })
}

/// Extremal status sums and moving sums of order `K` (truncated at the start).
pub fn extremal_scores(sample: &SeriesSample, k: usize) -> Result<BlockScore> {
    check_dims(sample, k)?;
    Ok(scores_on(sample, k, &vec![true; sample.t]))
}

fn check_dims(sample: &SeriesSample, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidArgument("K must be >= 1".into()));
    }
    if sample.t < k {
        return Err(Error::InvalidArgument(format!(
            "series of length {} is shorter than K = {k}",
            sample.t
        )));
    }
    Ok(())
}

/// Extracted blocks with diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Extraction {
    pub blocks: Vec<BlockShape>,
    pub requested: usize,
    pub diagnostics: Vec<String>,
}

/// Picks among tied window ends: an isolated maximum first (earliest), else
/// the window with the largest sum of sup norms.
fn break_ties(tied: &[usize], window_sum: impl Fn(usize) -> f64) -> usize {
    let n = tied.len();
    for (pos, &e) in tied.iter().enumerate() {
        let left = pos > 0 && tied[pos - 1] + 1 == e;
        let right = pos + 1 < n && tied[pos + 1] == e + 1;
        if !left && !right {
            return e;
        }
    }
    let mut best = tied[0];
    let mut best_sum = window_sum(best);
    for &e in &tied[1..] {
        let s = window_sum(e);
        if s > best_sum {
            best = e;
            best_sum = s;
        }
    }
    best
}

/// Extracts up to `q` time-disjoint blocks of length `k`.
pub fn extract_blocks(sample: &SeriesSample, k: usize, q: usize, rescoring: Rescoring) -> Result<Extraction> {
    check_dims(sample, k)?;
    if q == 0 {
        return Err(Error::InvalidArgument("Q must be >= 1".into()));
    }
    let t_len = sample.t;
    let sup = sup_norm_series(sample);
    let mut prefix = vec![0.0; t_len + 1];
    for t in 0..t_len {
        prefix[t + 1] = prefix[t] + sup[t];
    }
    let window_sum = |end: usize| prefix[end + 1] - prefix[end + 1 - k];

    // eligible[end] for windows [end - k + 1, end]
    let mut eligible: Vec<bool> = (0..t_len).map(|e| e + 1 >= k).collect();
    let mut available = vec![true; t_len];
    let mut blocks = Vec::new();
    let mut diagnostics = Vec::new();
    let mut score = scores_on(sample, k, &available);
    let mut rescore = false;

    while blocks.len() < q {
        if rescore && rescoring == Rescoring::PerIteration {
            score = scores_on(sample, k, &available);
        }
        rescore = false;
        let Some(best) = (0..t_len).filter(|&e| eligible[e]).map(|e| score.ms[e]).max() else {
            break;
        };
        let tied: Vec<usize> = (0..t_len).filter(|&e| eligible[e] && score.ms[e] == best).collect();
        // With no marks left the isolation preference carries no signal.
        let end = if best == 0 {
            tied.iter().copied().reduce(|a, b| if window_sum(b) > window_sum(a) { b } else { a }).unwrap()
        } else {
            break_ties(&tied, window_sum)
        };
        let start = end + 1 - k;
        let norm = sup[start];
        if !(norm > 0.0) || !norm.is_finite() {
            diagnostics.push(format!(
                "window {start}..={end} skipped: first-slice sup norm {norm} is not positive"
            ));
            eligible[end] = false;
            continue;
        }
        let matrix = (start..=end)
            .map(|t| sample.row(t).iter().map(|v| v / norm).collect())
            .collect();
        blocks.push(BlockShape { start, norm, matrix });
        for a in &mut available[start..=end] {
            *a = false;
        }
        for e in &mut eligible[start..(end + k).min(t_len)] {
            *e = false;
        }
        rescore = true;
    }
    if blocks.len() < q {
        diagnostics.push(format!(
            "only {} disjoint blocks available, {} requested",
            blocks.len(),
            q
        ));
    }
    Ok(Extraction {
        blocks,
        requested: q,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked_example() -> SeriesSample {
        SeriesSample::from_rows(&[
            vec![5.0, 6.0],
            vec![3.0, 1.0],
            vec![4.0, 10.0],
            vec![14.0, 5.0],
            vec![19.0, 2.0],
            vec![2.0, 1.0],
            vec![7.0, 4.0],
        ])
        .unwrap()
    }

    #[test]
    fn status_of_worked_example() {
        let m = extremal_status(&worked_example(), 3).unwrap();
        let site1: Vec<bool> = m.column(0).collect();
        let site2: Vec<bool> = m.column(1).collect();
        let bits = |v: &[u8]| v.iter().map(|b| *b == 1).collect::<Vec<_>>();
        assert_eq!(site1, bits(&[0, 0, 0, 1, 1, 0, 1]));
        assert_eq!(site2, bits(&[1, 0, 1, 1, 0, 0, 0]));
    }

    #[test]
    fn unmarked_windows_are_ranked_by_sup_sum() {
        let s = SeriesSample::from_rows(&[1.0, 2.0, 9.0, 3.0, 8.0, 1.0, 5.0].map(|v| vec![v])).unwrap();
        let ex = extract_blocks(&s, 1, 3, Rescoring::Masked).unwrap();
        let starts: Vec<usize> = ex.blocks.iter().map(|b| b.start).collect();
        assert_eq!(starts, vec![2, 4, 6]);
    }

    #[test]
    fn scores_of_worked_example() {
        let s = extremal_scores(&worked_example(), 3).unwrap();
        assert_eq!(s.lambda, vec![1, 0, 1, 2, 1, 0, 1]);
        assert_eq!(s.ms, vec![1, 1, 2, 3, 4, 3, 2]);
    }

    #[test]
    fn first_block_of_worked_example() {
        for rescoring in [Rescoring::Masked, Rescoring::PerIteration] {
            let ex = extract_blocks(&worked_example(), 3, 1, rescoring).unwrap();
            let b = &ex.blocks[0];
            assert_eq!((b.start, b.end()), (2, 4));
            assert_eq!(b.norm, 10.0);
            let site1: Vec<f64> = b.matrix.iter().map(|r| r[0]).collect();
            let site2: Vec<f64> = b.matrix.iter().map(|r| r[1]).collect();
            assert_eq!(site1, vec![4.0 / 10.0, 14.0 / 10.0, 19.0 / 10.0]);
            assert_eq!(site2, vec![10.0 / 10.0, 5.0 / 10.0, 2.0 / 10.0]);
        }
    }

    #[test]
    fn increasing_series_marks_last_values() {
        let s = SeriesSample::from_rows(&(0..6).map(|t| vec![t as f64]).collect::<Vec<_>>()).unwrap();
        let sc = extremal_scores(&s, 2).unwrap();
        assert_eq!(sc.lambda, vec![0, 0, 0, 0, 1, 1]);
        assert_eq!(&sc.ms[4..], &[1, 2]);
    }

    #[test]
    fn duplicate_values_marked_in_time_order() {
        let s = SeriesSample::from_rows(&[vec![1.0], vec![3.0], vec![3.0], vec![3.0]]).unwrap();
        assert_eq!(extremal_scores(&s, 2).unwrap().lambda, vec![0, 1, 1, 0]);
    }

    #[test]
    fn isolated_maximum_beats_consecutive_maxima() {
        // ms pattern (.., 4, 2, 4, 4) from the tie-breaking illustration.
        let tied = [3, 5, 6];
        assert_eq!(break_ties(&tied, |e| e as f64), 3);
        // Only consecutive maxima: largest window sum wins.
        assert_eq!(break_ties(&[5, 6, 7], |e| if e == 6 { 10.0 } else { 1.0 }), 6);
        // Several isolated maxima: earliest.
        assert_eq!(break_ties(&[2, 5, 9], |_| 0.0), 2);
    }

    #[test]
    fn two_spikes_give_two_blocks() {
        let k = 3;
        let mut rows = vec![vec![1.0, 1.0]; 30];
        for (t, v) in [(5, 50.0), (6, 40.0), (7, 30.0), (20, 60.0), (21, 20.0), (22, 10.0)] {
            rows[t] = vec![v, v / 2.0];
        }
        let s = SeriesSample::from_rows(&rows).unwrap();
        for rescoring in [Rescoring::Masked, Rescoring::PerIteration] {
            let ex = extract_blocks(&s, k, 2, rescoring).unwrap();
            let mut starts: Vec<usize> = ex.blocks.iter().map(|b| b.start).collect();
            starts.sort_unstable();
            assert_eq!(starts, vec![5, 20], "{rescoring:?}");
        }
    }

    #[test]
    fn too_many_blocks_requested() {
        let s = SeriesSample::from_rows(&(0..10).map(|t| vec![(t * 7 % 5) as f64 + 1.0]).collect::<Vec<_>>()).unwrap();
        let ex = extract_blocks(&s, 3, 10, Rescoring::PerIteration).unwrap();
        assert!(ex.blocks.len() <= 3);
        assert!(!ex.diagnostics.is_empty());
        let mut covered = [false; 10];
        for b in &ex.blocks {
            for c in &mut covered[b.start..=b.end()] {
                assert!(!*c);
                *c = true;
            }
        }
    }

    #[test]
    fn short_series_is_rejected() {
        let s = SeriesSample::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        assert!(extremal_scores(&s, 3).is_err());
        assert!(extract_blocks(&s, 3, 1, Rescoring::Masked).is_err());
    }

    #[test]
    fn auto_q_rule() {
        assert_eq!(auto_q(5.0, 5, 5000), 100);
        assert_eq!(auto_q(5.0, 5, 450), 10);
        assert_eq!(auto_q(5.0, 5, 451), 11);
        assert_eq!(auto_q(10.0, 5, 20), 1);
        assert_eq!("auto".parse::<QRule>().unwrap(), QRule::Auto);
        assert_eq!("7".parse::<QRule>().unwrap(), QRule::Fixed(7));
        assert!("0".parse::<QRule>().is_err());
    }
}
