//! One-sample smokes for the two slowest suites, which the acceptance gate
//! does not cover.  Run in-process so the optimized test profile applies.

use tracelift_cli::{run_verify, VerifyRequest};

fn smoke(suite: &str) {
    let req = VerifyRequest {
        suite: suite.into(),
        samples: Some(1),
        ..VerifyRequest::default()
    };
    let outcome = run_verify(&req, (1, "test")).expect("suite runs");
    for r in &outcome.reports {
        eprintln!("{}", r.text_line());
    }
    assert!(outcome.all_passed(), "suite {suite} did not pass");
}

#[test]
fn rearrangement_identities_replay_once() {
    smoke("lemma-3.2-3.4");
}

#[test]
fn trace_combination_collapses_once() {
    smoke("eq-16");
}
