mod common;

use cm3::blocks::{extract_blocks, extremal_scores, extremal_status, Rescoring};
use cm3::evaluate::{evaluate_fit, hausdorff};
use cm3::fit::{fit_pipeline, frequency_match_minima, scaled_minima, FitOptions};
use cm3::simulate::{simulate, SeriesSample};
use cm3::theory::MinimaMatrix;
use cm3::ParameterSet;

fn worked_series() -> SeriesSample {
    let rows = [[5.0, 6.0], [3.0, 1.0], [4.0, 10.0], [14.0, 5.0], [19.0, 2.0], [2.0, 1.0], [7.0, 4.0]];
    SeriesSample::from_rows(&rows.map(|r| r.to_vec())).unwrap()
}

#[test]
fn worked_example_status_scores_and_block() {
    let sample = worked_series();
    let marks = extremal_status(&sample, 3).unwrap();
    let site = |d: usize| marks.column(d).map(|m| if m { '1' } else { '0' }).collect::<String>();
    assert_eq!(site(0), "0001101");
    assert_eq!(site(1), "1011000");

    let score = extremal_scores(&sample, 3).unwrap();
    assert_eq!(score.lambda, vec![1, 0, 1, 2, 1, 0, 1]);
    assert_eq!(score.ms, vec![1, 1, 2, 3, 4, 3, 2]);

    let ex = extract_blocks(&sample, 3, 1, Rescoring::Masked).unwrap();
    let block = &ex.blocks[0];
    assert_eq!((block.start, block.end(), block.norm), (2, 4, 10.0));
    let site_one: Vec<f64> = block.matrix.iter().map(|r| r[0]).collect();
    let site_two: Vec<f64> = block.matrix.iter().map(|r| r[1]).collect();
    for (got, want) in site_one.iter().zip([0.4, 1.4, 1.9]).chain(site_two.iter().zip([1.0, 0.5, 0.2])) {
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
}

#[test]
fn both_rescoring_rules_agree_on_the_first_block() {
    let sample = worked_series();
    let a = extract_blocks(&sample, 3, 2, Rescoring::Masked).unwrap();
    let b = extract_blocks(&sample, 3, 2, Rescoring::PerIteration).unwrap();
    assert_eq!(a.blocks[0], b.blocks[0]);
}

#[test]
fn two_pattern_iteration_trajectory() {
    let minima = vec![
        MinimaMatrix::from_entries(0, 1, 2, vec![5.95, 2.62]).unwrap(),
        MinimaMatrix::from_entries(1, 1, 2, vec![6.03, 7.11]).unwrap(),
    ];
    let trace = frequency_match_minima(&minima, &[1.0, 1.0], 1e-10, 200).unwrap();
    let want = [[3.64, 6.53], [5.25, 4.57], [4.85, 5.01], [4.94, 4.90], [4.91, 4.93], [4.92, 4.92]];
    for (it, w) in trace.iterations.iter().zip(want) {
        assert!((it.harmonic_means[0] - w[0]).abs() <= 0.01);
        assert!((it.harmonic_means[1] - w[1]).abs() <= 0.01);
        let m = scaled_minima(&minima, &it.scales);
        assert!((m[0].entries[0] - 5.95).abs() < 1e-12 && (m[1].entries[1] - 7.11).abs() < 1e-12);
    }
    let last = trace.iterations.last().unwrap();
    assert!(trace.converged && (last.p[0] - last.p[1]).abs() < 1e-9);
}

fn separated_truth() -> ParameterSet {
    // Mirror-image patterns: equal sup norms, so top extremes split evenly.
    #[rustfmt::skip]
    let raw = [
        [[0.8, 0.1], [0.2, 0.1]],
        [[0.1, 0.8], [0.1, 0.2]],
    ];
    let mut values: Vec<f64> = raw.iter().flat_map(|p| p.iter().flat_map(|lag| lag.iter().copied())).collect();
    for d in 0..2 {
        let sum: f64 = values.iter().skip(d).step_by(2).sum();
        values.iter_mut().skip(d).step_by(2).for_each(|v| *v /= sum);
    }
    ParameterSet::new(2, 2, 2, values).unwrap()
}

#[test]
fn fit_recovers_a_well_separated_instance() {
    let truth = separated_truth();
    let sample = simulate(&truth, 20_000, 0.0, 9).unwrap();
    let options = FitOptions {
        k: Some(2),
        l: Some(2),
        seed: 9,
        ..FitOptions::default()
    };
    let report = evaluate_fit(&truth, &fit_pipeline(&sample, 10.0, &options).unwrap());
    assert!(report.fitted.is_valid());
    assert_eq!(report.k_correct, Some(true));
    let h = report.hausdorff.unwrap();
    assert!(h < 0.05, "hausdorff {h}");
    assert!((hausdorff(&truth, &report.fitted).unwrap() - h).abs() < 1e-15);
}

#[test]
fn fit_estimates_k_on_a_long_series() {
    let truth = separated_truth();
    let sample = simulate(&truth, 10_000, 0.0, 4).unwrap();
    let report = fit_pipeline(&sample, 10.0, &FitOptions::default()).unwrap();
    assert_eq!(report.k_hat, 2);
    assert_eq!(report.k_variant, Some(7));
    assert!(report.q_found >= 2);
}


