//! The bound and its updates against independent oracles.

mod common;

use common::*;

#[test]
fn elbo_matches_enumeration() {
    let err = elbo_oracle_max_error(25, 11);
    assert!(err <= 1e-8, "max |elbo - enumeration| = {err:e}");
}

#[test]
fn nu_gradient_matches_finite_differences() {
    let err = nu_gradient_max_rel_error(20, 12);
    assert!(err <= 1e-4, "max relative error {err:e}");
}

#[test]
fn coordinate_updates_never_decrease_the_bound() {
    let (drop, which) = monotonicity_worst_drop(100, 13);
    assert!(drop >= -1e-8, "{which} lowered the bound by {drop:e}");
}

#[test]
fn full_sample_estimates_equal_batch_updates() {
    let gap = unit_scale_max_gap(14);
    assert!(gap <= 1e-12, "gap {gap:e}");
}

#[test]
fn sampled_gamma_sums_are_unbiased() {
    let err = monte_carlo_gamma_rel_error(15, 1000, 4);
    assert!(err <= 0.05, "relative error {err}");
}
