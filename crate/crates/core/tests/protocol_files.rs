//! The shipped protocol files must agree with the programmatic builders:
//! parsing and running each file yields the same distribution as the
//! corresponding builder, and the files pass the same verification suites.

use qlocc_core::{
    build_dense_coding, build_teleportation, compare_distributions, parse_protocol,
    parse_protocol_with_overrides, protocol_name, run, verify_dense_coding_with,
    verify_teleportation_with, Amplitude, ProtocolError,
};

fn shipped(name: &str) -> String {
    let path = format!("{}/../../protocols/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("reading {path}: {e}"))
}

#[test]
fn teleport_file_matches_builder_distribution() {
    let text = shipped("teleport.qp");
    assert_eq!(protocol_name(&text).unwrap(), "teleport");
    let (p, w) = parse_protocol(&text).unwrap();
    // The file's message qubit is 0.6|0⟩ + 0.8|1⟩.
    let (bp, bw) = build_teleportation(Amplitude::new(0.6, 0.0), Amplitude::new(0.8, 0.0)).unwrap();
    let d_file = run(&p, &w).unwrap();
    let d_built = run(&bp, &bw).unwrap();
    let (ok, err) = compare_distributions(&d_file, &d_built, 1e-9);
    assert!(ok, "max probability error {err}");
}

#[test]
fn teleport_file_overridden_matches_builder() {
    let text = shipped("teleport.qp");
    let alpha = Amplitude::new(0.0, 0.0);
    let beta = Amplitude::new(0.0, 1.0);
    let (p, w) = parse_protocol_with_overrides(&text, Some((alpha, beta))).unwrap();
    let (bp, bw) = build_teleportation(alpha, beta).unwrap();
    let (ok, err) = compare_distributions(&run(&p, &w).unwrap(), &run(&bp, &bw).unwrap(), 1e-9);
    assert!(ok, "max probability error {err}");
}

#[test]
fn teleport_file_passes_the_sweep_suite() {
    let text = shipped("teleport.qp");
    let build = |alpha: Amplitude, beta: Amplitude| {
        parse_protocol_with_overrides(&text, Some((alpha, beta))).map_err(ProtocolError::from)
    };
    let states = qlocc_core::sample_initial_states(4 + 5, 3);
    let report = verify_teleportation_with(build, &states, 1e-9).unwrap();
    assert!(report.passed, "failures: {:#?}", report.failures);
    assert_eq!(report.trials, 9);
}

#[test]
fn densecode_file_matches_builder_distribution() {
    let text = shipped("densecode.qp");
    assert_eq!(protocol_name(&text).unwrap(), "densecode");
    let (p, w) = parse_protocol(&text).unwrap();
    // The file's declared input is (a0, a1) = (1, 1).
    let (bp, bw) = build_dense_coding(1, 1).unwrap();
    let (ok, err) = compare_distributions(&run(&p, &w).unwrap(), &run(&bp, &bw).unwrap(), 1e-9);
    assert!(ok, "max probability error {err}");
}

#[test]
fn densecode_file_passes_the_suite_on_all_inputs() {
    let text = shipped("densecode.qp");
    let build = |a0: i64, a1: i64| {
        let (p, mut w) = parse_protocol(&text)?;
        w.classical.insert("a0".into(), a0);
        w.classical.insert("a1".into(), a1);
        Ok((p, w))
    };
    let report =
        verify_dense_coding_with(build, &[(0, 0), (0, 1), (1, 0), (1, 1)], 1e-9).unwrap();
    assert!(report.passed, "failures: {:#?}", report.failures);
    assert_eq!(report.trials, 4);
}
