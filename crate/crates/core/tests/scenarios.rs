use std::path::Path;

use bach_core::scenario::{parse_scenario, run_scenario};
use bach_core::KernelConfig;

fn run(name: &str) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.scn"));
    let src = std::fs::read_to_string(&path).unwrap();
    let scenario = parse_scenario(&src).unwrap_or_else(|e| panic!("{name}: {e}"));
    let report = run_scenario(&scenario, &KernelConfig::default());
    assert!(report.passed(), "{name}\n{report}");
}

#[test]
fn counted_forward_rule() {
    run("fig1_forward");
}

#[test]
fn suspended_backward_ask() {
    run("fig2_backward");
}

#[test]
fn forward() {
    run("forward");
}

#[test]
fn copy() {
    run("copy");
}

#[test]
fn broadcast() {
    run("broadcast");
}

#[test]
fn merge() {
    run("merge");
}

#[test]
fn inherit() {
    run("inherit");
}

#[test]
fn engagement() {
    run("engagement");
}
