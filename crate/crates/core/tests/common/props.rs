//! Property bodies and their input strategies, run by `properties.rs` through
//! `proptest!` and by the acceptance target through an explicit runner.

use cm3::blocks::{extract_blocks, Rescoring};
use cm3::cluster::kmeans::{kmeans, standardize, Metric};
use cm3::cluster::pam::pam;
use cm3::cluster::{cluster, silhouette, squared_distances, Algorithm, ShapeTable};
use cm3::evaluate::hausdorff_sets;
use cm3::fit::{fit_pipeline, frequency_match, renormalize, FitOptions, ShapeSet, DEFAULT_MAX_ITER, DEFAULT_TOL};
use cm3::simulate::simulate;
use cm3::ParameterSet;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

pub type Sets = (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>);
pub type Small = (usize, usize, usize, f64, u64);

pub fn point_set(dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-10.0..10.0f64, dim), 1..6)
}

pub fn three_sets() -> impl Strategy<Value = Sets> {
    (1usize..5).prop_flat_map(|dim| (point_set(dim), point_set(dim), point_set(dim)))
}

/// Rows drawn around three separated centres, so clusters exist.
pub fn clustered_rows() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..4, 4usize..20).prop_flat_map(|(dim, n)| {
        prop::collection::vec(
            (0usize..3, prop::collection::vec(-0.5..0.5f64, dim))
                .prop_map(|(c, noise)| noise.iter().map(|e| c as f64 * 3.0 + e).collect::<Vec<f64>>()),
            n,
        )
    })
}

/// `(K, L, D, C, seed)` of a small random parameter set.
pub fn small_params() -> impl Strategy<Value = Small> {
    (1usize..4, 1usize..4, 1usize..4, 1.5..5.0f64, any::<u64>())
}

pub fn block_inputs() -> impl Strategy<Value = (Small, usize, usize, bool)> {
    (small_params(), 10usize..300, 1usize..40, any::<bool>())
}

pub fn silhouette_inputs() -> impl Strategy<Value = (Vec<Vec<f64>>, usize, usize)> {
    (clustered_rows(), 2usize..6, 0usize..5)
}

pub fn monotone_inputs() -> impl Strategy<Value = (Vec<Vec<f64>>, usize, u64)> {
    (clustered_rows(), 1usize..6, any::<u64>())
}

pub fn renorm_inputs() -> impl Strategy<Value = ((usize, usize, usize), Vec<f64>, Vec<f64>)> {
    (
        (1usize..4, 1usize..5, 1usize..5),
        prop::collection::vec(0.05..3.0f64, 80),
        prop::collection::vec(0.1..1.0f64, 5),
    )
}

pub fn determinism_inputs() -> impl Strategy<Value = (Small, usize)> {
    (small_params(), 60usize..400)
}

pub fn hausdorff_axioms((a, b, c): Sets) -> Result<(), TestCaseError> {
    let ab = hausdorff_sets(&a, &b);
    prop_assert!(ab >= 0.0);
    prop_assert_eq!(hausdorff_sets(&a, &a), 0.0);
    prop_assert_eq!(ab, hausdorff_sets(&b, &a));
    let bound = hausdorff_sets(&a, &c) + hausdorff_sets(&c, &b);
    prop_assert!(ab <= bound * (1.0 + 1e-12) + 1e-12, "triangle: {ab} > {bound}");
    Ok(())
}

pub fn blocks_disjoint_and_normalized(
    ((k, l, d, c, seed), t, q, masked): (Small, usize, usize, bool),
) -> Result<(), TestCaseError> {
    let params = ParameterSet::random(k, l, d, c, seed).unwrap();
    let sample = simulate(&params, t, 0.0, seed ^ 0x5eed).unwrap();
    let rescoring = if masked { Rescoring::Masked } else { Rescoring::PerIteration };
    let ex = extract_blocks(&sample, k, q, rescoring).unwrap();
    prop_assert!(ex.blocks.len() <= q);
    prop_assert!(ex.blocks.len() <= t / k);
    let mut spans: Vec<(usize, usize)> = ex.blocks.iter().map(|b| (b.start, b.end())).collect();
    spans.sort_unstable();
    for w in spans.windows(2) {
        prop_assert!(w[0].1 < w[1].0, "overlap {:?}", w);
    }
    for b in &ex.blocks {
        prop_assert_eq!(b.matrix.len(), k);
        prop_assert!(b.end() < t);
        let first = b.matrix[0].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(first, 1.0);
    }
    Ok(())
}

pub fn silhouettes_in_range((rows, k, algo): (Vec<Vec<f64>>, usize, usize)) -> Result<(), TestCaseError> {
    let k = k.min(rows.len());
    let table = ShapeTable::from_rows(rows[0].len(), 1, &rows).unwrap();
    let model = cluster(&table, Algorithm::ALL[algo], k, 7).unwrap();
    let s = silhouette(&table, &model.labels);
    for v in &s.values {
        prop_assert!((-1.0..=1.0).contains(v), "{v}");
    }
    prop_assert!((-1.0..=1.0).contains(&s.total_ratio));
    prop_assert!((-1.0..=1.0).contains(&model.total_silhouette_ratio));
    prop_assert!((0.0..=1.0 + 1e-12).contains(&model.sse_ratio));
    Ok(())
}

pub fn objectives_never_increase((rows, k, seed): (Vec<Vec<f64>>, usize, u64)) -> Result<(), TestCaseError> {
    let k = k.min(rows.len());
    for metric in [Metric::SquaredEuclidean, Metric::Correlation] {
        let data: Vec<Vec<f64>> = match metric {
            Metric::SquaredEuclidean => rows.clone(),
            Metric::Correlation => rows.iter().map(|r| standardize(r)).collect(),
        };
        let fit = kmeans(&data, k, metric, seed);
        prop_assert!(!fit.objective.is_empty());
        for w in fit.objective.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0), "{:?}", fit.objective);
        }
        let mut sizes = vec![0usize; k];
        for &lab in &fit.labels {
            sizes[lab] += 1;
        }
        prop_assert!(sizes.iter().all(|s| *s > 0));
    }
    let (sq, n) = squared_distances(&rows);
    let dist: Vec<f64> = sq.iter().map(|v| v.sqrt()).collect();
    let fit = pam(&dist, n, k);
    for w in fit.cost.windows(2) {
        prop_assert!(w[1] <= w[0], "{:?}", fit.cost);
    }
    prop_assert_eq!(fit.medoids.len(), k);
    for (pos, &m) in fit.medoids.iter().enumerate() {
        prop_assert_eq!(fit.labels[m], pos);
    }
    Ok(())
}

pub fn renormalized_sites_sum_to_one(
    ((k, l, d), raw, freq): ((usize, usize, usize), Vec<f64>, Vec<f64>),
) -> Result<(), TestCaseError> {
    let shapes: Vec<Vec<Vec<f64>>> = (0..l)
        .map(|j| (0..k).map(|i| (0..d).map(|s| raw[(j * 16 + i * 4 + s) % raw.len()]).collect()).collect())
        .collect();
    let set = ShapeSet::new(shapes, freq[..l].to_vec()).unwrap();
    let trace = frequency_match(&set, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
    let (fitted, per_site) = renormalize(&set, &trace.final_alphas).unwrap();
    prop_assert_eq!(per_site.len(), d);
    for s in 0..d {
        prop_assert!((fitted.site_sum(s) - 1.0).abs() <= 1e-12, "site {s}: {}", fitted.site_sum(s));
    }
    prop_assert!(fitted.is_valid(), "{:?}", fitted.validate());
    Ok(())
}

pub fn pipeline_is_deterministic(((k, l, d, c, seed), t): (Small, usize)) -> Result<(), TestCaseError> {
    let params = ParameterSet::random(k, l, d, c, seed).unwrap();
    let run = || {
        let sample = simulate(&params, t, 0.5, seed).unwrap();
        let options = FitOptions {
            seed,
            ..FitOptions::default()
        };
        fit_pipeline(&sample, c, &options)
            .map(|r| serde_json::to_string(&r).unwrap())
            .map_err(|e| e.to_string())
    };
    prop_assert_eq!(run(), run());
    Ok(())
}

/// `(name, cases)` of each suite, as run by both targets.
pub const SUITES: [(&str, u32); 6] = [
    ("hausdorff metric axioms", 1000),
    ("block disjointness", 128),
    ("silhouette range", 128),
    ("k-means/PAM monotonicity", 128),
    ("per-site renormalization", 128),
    ("end-to-end seed determinism", 24),
];
