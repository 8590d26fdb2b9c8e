//! Acceptance suite: every criterion at full size, one PASS/FAIL line each.
//!
//! The lines go straight to the stderr handle, so they appear even when the
//! test harness captures `println!` output.

use std::io::Write;

use rabi_zeta::validation::{criteria, run_criterion, Suite, DEFAULT_SEED};

#[test]
fn acceptance_criteria() {
    let mut failed = Vec::new();
    writeln!(std::io::stderr()).expect("write to stderr");
    for c in criteria() {
        let report = run_criterion(&c, Suite::Full, DEFAULT_SEED);
        writeln!(std::io::stderr(), "{}", report.line()).expect("write to stderr");
        if !report.passed {
            failed.push(report.id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
