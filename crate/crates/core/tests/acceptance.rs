//! One test per acceptance criterion; each prints a single PASS/FAIL line.
//!
//! Run with `cargo test -p fracdens-core --test acceptance -- --nocapture --test-threads=1`.

use fracdens::checks;

fn criterion(id: u8) {
    let outcome = checks::run(id);
    println!("{outcome}");
    assert!(outcome.passed, "{outcome}");
}

#[test]
fn c01_kernel_weight_identity() {
    criterion(1);
}

#[test]
fn c02_vasicek_j2() {
    criterion(2);
}

#[test]
fn c03_quadratic_risk() {
    criterion(3);
}

#[test]
fn c04_mle_normality() {
    criterion(4);
}

#[test]
fn c05_oracle_equivalence() {
    criterion(5);
}

#[test]
fn c06_basis_identities() {
    criterion(6);
}

#[test]
fn c07_mise_rate() {
    criterion(7);
}

#[test]
fn c08_interior_variance() {
    criterion(8);
}

#[test]
fn c09_uniform_bound() {
    criterion(9);
}

#[test]
fn c10_table_trends() {
    criterion(10);
}

#[test]
fn c11_boundary_trend() {
    criterion(11);
}

#[test]
fn c12_fbm_covariance() {
    criterion(12);
}
