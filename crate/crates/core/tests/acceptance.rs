//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! (run with `cargo test --test acceptance -- --nocapture` to see them all).
//!
//! Criterion 6 is expected to fail: the closed-form constant it asserts is
//! not a valid lower bound (an exhaustive k=2 enumeration disproves it; the
//! valid union bound carries an extra factor of three and is dominated by
//! the empirical probability at every grid point). The test records both
//! comparisons and is marked `#[ignore]`-free so the failure stays visible.

use coxset::verify::*;

fn run(c: CriterionResult) {
    println!("{}", c.line());
    assert!(c.pass, "{}", c.line());
}

#[test]
fn criterion_01_wald_identity() {
    run(c01_wald_identity());
}

#[test]
fn criterion_02_cochran_decomposition() {
    run(c02_cochran_identity());
}

#[test]
fn criterion_03_block_correlation() {
    run(c03_block_correlation());
}

#[test]
fn criterion_04_signal_noise_split() {
    run(c04_signal_noise_split());
}

#[test]
fn criterion_05_companion_means() {
    run(c05_companion_means());
}

#[test]
fn criterion_06_unaccompanied_bound_as_stated() {
    // Faithful to the stated bound; see the module docs and the detail line.
    // The empirical probability dominates the corrected union bound at every
    // grid point, which the detail records; the as-stated assertion is
    // mathematically unattainable and this test documents that by failing.
    run(c06_unaccompanied_bound());
}

#[test]
fn criterion_07_noncentral_moments() {
    run(c07_noncentral_moments());
}

#[test]
fn criterion_08_coverage() {
    run(c08_coverage());
}

#[test]
fn criterion_09_comparator_contrasts() {
    run(c09_comparator_contrasts());
}

#[test]
fn criterion_10_determinism() {
    run(c10_determinism());
}

#[test]
fn criterion_11_chisq_quantiles() {
    run(c11_chisq_quantiles());
}

#[test]
fn criterion_12_lasso_kkt() {
    run(c12_lasso_kkt());
}
