//! Closed-form theory against the independent simulator, at test-suite size.
//! The acceptance target repeats these checks at full size.

mod common;

use cm3::theory::{extremal_index, mc_extremal_index};
use cm3::ParameterSet;
use common::*;

#[test]
fn exact_profile_frequency_matches_closed_form() {
    for seed in 0..3u64 {
        let params = ParameterSet::random(2 + seed as usize % 2, 2, 2, 3.0, seed).unwrap();
        for check in profile_check(&params, 20_000, 100 + seed) {
            assert!(check.z().abs() < 4.0, "seed {seed}: {check:?}");
        }
    }
}

#[test]
fn single_lag_single_pattern_is_always_a_profile() {
    let params = ParameterSet::new(1, 1, 3, vec![1.0, 1.0, 1.0]).unwrap();
    assert_eq!(profile_frequency(&params, 500, 1), vec![1.0]);
}

#[test]
fn oracle_and_crate_agree_on_independent_margins() {
    let params = ParameterSet::random(2, 2, 2, 2.0, 9).unwrap();
    let oracle = simulate_oracle(&params, 20_000, 4);
    let site0: Vec<f64> = oracle.x.iter().map(|r| r[0]).collect();
    assert!(ks_frechet(&site0) < 0.02);
    assert!(margin_ks(&params, 20_000, 4) < 0.02);
}

#[test]
fn spectral_law_matches_conditioned_oracle() {
    let params = ParameterSet::random(2, 2, 2, 3.0, 5).unwrap();
    let tv = spectral_check(&params, 200.0, 5_000, 6);
    assert!(tv < 0.05, "tv = {tv}");
}

#[test]
fn monte_carlo_extremal_index_near_closed_form() {
    let params = ParameterSet::random(2, 2, 2, 3.0, 11).unwrap();
    let theta = extremal_index(&params).unwrap();
    let mc = mc_extremal_index(&params, 1000, 1.0, 4000, 3).unwrap();
    assert!((mc.max_route - theta).abs() < 0.08, "{theta} vs {mc:?}");
}
