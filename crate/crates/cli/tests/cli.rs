//! End-to-end tests of the `qlocc` binary: exit codes, output formats, and
//! determinism.

use std::process::{Command, Output};

fn qlocc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qlocc"))
        .args(args)
        .output()
        .expect("spawning qlocc")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("qlocc terminated by signal")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout is UTF-8")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("stderr is UTF-8")
}

fn shipped(name: &str) -> String {
    format!("{}/../../protocols/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn fixture(name: &str) -> String {
    format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn run_teleport_prints_sorted_branches_and_exits_zero() {
    let out = qlocc(&["run", &shipped("teleport.qp")]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let expected = "\
prob 0.250000  a0=0 a1=0 b0=0 b1=0  c=2 q=0 t=2  state 0.600000|000> + 0.800000|001>
prob 0.250000  a0=0 a1=1 b0=0 b1=1  c=2 q=0 t=2  state 0.600000|010> + 0.800000|011>
prob 0.250000  a0=1 a1=0 b0=1 b1=0  c=2 q=0 t=2  state 0.600000|100> + 0.800000|101>
prob 0.250000  a0=1 a1=1 b0=1 b1=1  c=2 q=0 t=2  state 0.600000|110> + 0.800000|111>
";
    assert_eq!(stdout(&out), expected);
}

#[test]
fn run_output_is_byte_identical_across_runs() {
    let first = qlocc(&["run", &shipped("teleport.qp")]);
    let second = qlocc(&["run", &shipped("teleport.qp")]);
    assert_eq!(code(&first), 0);
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn run_densecode_prints_single_phase_branch() {
    let out = qlocc(&["run", &shipped("densecode.qp")]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert_eq!(
        stdout(&out),
        "prob 1.000000  a0=1 a1=1 b0=1 b1=1  c=0 q=1 t=1  state -1.000000i|11>\n"
    );
}

#[test]
fn run_densecode_with_input_overrides() {
    let out = qlocc(&["run", &shipped("densecode.qp"), "--a0", "0", "--a1", "1"]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert_eq!(
        stdout(&out),
        "prob 1.000000  a0=0 a1=1 b0=0 b1=1  c=0 q=1 t=1  state 1.000000|01>\n"
    );
}

#[test]
fn run_teleport_with_amplitude_overrides() {
    let out = qlocc(&[
        "run",
        &shipped("teleport.qp"),
        "--alpha",
        "0,1",
        "--beta",
        "0,0",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 4);
    assert!(
        text.contains("prob 0.250000  a0=0 a1=0 b0=0 b1=0  c=2 q=0 t=2  state 1.000000i|000>"),
        "unexpected output:\n{text}"
    );
}

#[test]
fn run_missing_file_exits_two() {
    let out = qlocc(&["run", "missing.qp"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("missing.qp"), "stderr: {}", stderr(&out));
}

#[test]
fn run_parse_error_exits_two_with_position() {
    let out = qlocc(&["run", &fixture("bad_statement.qp")]);
    assert_eq!(code(&out), 2);
    let err = stderr(&out);
    assert!(err.contains("bad_statement.qp:5:1: error:"), "stderr: {err}");
}

#[test]
fn run_json_reports_branch_fields() {
    let out = qlocc(&["run", &shipped("densecode.qp"), "--format", "json"]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).expect("valid JSON");
    let branches = doc["branches"].as_array().expect("branches array");
    assert_eq!(branches.len(), 1);
    let b = &branches[0];
    assert!((b["prob"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert_eq!(b["vars"]["b0"], 1);
    assert_eq!(b["vars"]["b1"], 1);
    assert_eq!(b["c"], 0);
    assert_eq!(b["q"], 1);
    // Final state is -i|11>: entry 3 is [0, -1].
    let state = b["state"].as_array().unwrap();
    assert_eq!(state.len(), 4);
    assert!((state[3][1].as_f64().unwrap() + 1.0).abs() < 1e-9);
}

#[test]
fn verify_teleport_builtin_passes() {
    let out = qlocc(&["verify", "teleport", "--trials", "2", "--seed", "7"]);
    assert_eq!(code(&out), 0, "stdout: {}", stdout(&out));
    let text = stdout(&out);
    assert!(text.contains("fixed probes: PASS (4 trials)"), "{text}");
    assert!(text.contains("random states (seed 7): PASS (2 trials)"), "{text}");
    assert!(text.contains("teleport: PASS (6 trials"), "{text}");
}

#[test]
fn verify_densecode_builtin_prints_four_pass_rows() {
    let out = qlocc(&["verify", "densecode"]);
    assert_eq!(code(&out), 0, "stdout: {}", stdout(&out));
    let text = stdout(&out);
    for (a0, a1) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
        assert!(
            text.contains(&format!("input (a0, a1) = ({a0}, {a1}): PASS (1 trial)")),
            "missing row for ({a0}, {a1}):\n{text}"
        );
    }
    assert!(text.contains("densecode: PASS (4 trials"), "{text}");
}

#[test]
fn verify_json_mirrors_report_fields() {
    let out = qlocc(&["verify", "densecode", "--format", "json"]);
    assert_eq!(code(&out), 0);
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).expect("valid JSON");
    let obj = doc.as_object().expect("top-level object");
    let mut keys: Vec<&str> = obj.keys().map(String::as_str).collect();
    keys.sort_unstable();
    assert_eq!(keys, ["failures", "max_prob_error", "passed", "trials"]);
    assert_eq!(doc["passed"], true);
    assert_eq!(doc["trials"], 4);
    assert_eq!(doc["failures"].as_array().unwrap().len(), 0);
    assert!(doc["max_prob_error"].as_f64().unwrap() <= 1e-9);
}

#[test]
fn verify_shipped_teleport_file_passes() {
    let out = qlocc(&["verify", &shipped("teleport.qp"), "--trials", "1"]);
    assert_eq!(code(&out), 0, "stdout: {}", stdout(&out));
    assert!(stdout(&out).contains("teleport: PASS"), "{}", stdout(&out));
}

#[test]
fn verify_shipped_densecode_file_passes() {
    let out = qlocc(&["verify", &shipped("densecode.qp")]);
    assert_eq!(code(&out), 0, "stdout: {}", stdout(&out));
    assert!(stdout(&out).contains("densecode: PASS (4 trials"), "{}", stdout(&out));
}

#[test]
fn verify_single_state_with_amplitude_overrides() {
    let out = qlocc(&[
        "verify",
        "teleport",
        "--alpha",
        "0.6,0",
        "--beta",
        "-0.8,0",
    ]);
    assert_eq!(code(&out), 0, "stdout: {}", stdout(&out));
    let text = stdout(&out);
    assert!(
        text.contains("input state alpha = (0.600000, 0.000000), beta = (-0.800000, 0.000000): PASS"),
        "{text}"
    );
    assert!(text.contains("teleport: PASS (1 trial,"), "{text}");
}

#[test]
fn verify_single_input_with_bit_overrides() {
    let out = qlocc(&["verify", "densecode", "--a0", "1", "--a1", "0"]);
    assert_eq!(code(&out), 0, "stdout: {}", stdout(&out));
    let text = stdout(&out);
    assert!(text.contains("input (a0, a1) = (1, 0): PASS (1 trial)"), "{text}");
    assert!(text.contains("densecode: PASS (1 trial,"), "{text}");
}

#[test]
fn verify_mutated_teleport_file_fails_with_exit_one() {
    let out = qlocc(&["verify", &fixture("teleport_noz.qp"), "--trials", "1"]);
    assert_eq!(code(&out), 1, "stdout: {}", stdout(&out));
    let text = stdout(&out);
    assert!(text.contains("teleport: FAIL"), "{text}");
    assert!(text.contains("fixed probes: FAIL"), "{text}");
}

#[test]
fn verify_mutated_teleport_file_fails_in_json_too() {
    let out = qlocc(&[
        "verify",
        &fixture("teleport_noz.qp"),
        "--trials",
        "1",
        "--format",
        "json",
    ]);
    assert_eq!(code(&out), 1);
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).expect("valid JSON");
    assert_eq!(doc["passed"], false);
    assert!(!doc["failures"].as_array().unwrap().is_empty());
}

#[test]
fn verify_unknown_protocol_file_exits_two() {
    let out = qlocc(&["verify", &fixture("unknown_protocol.qp")]);
    assert_eq!(code(&out), 2);
    assert!(
        stderr(&out).contains("unknown protocol `bb84`"),
        "stderr: {}",
        stderr(&out)
    );
}

#[test]
fn verify_missing_file_exits_two() {
    let out = qlocc(&["verify", "no_such_file.qp"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn alpha_without_beta_is_a_usage_error() {
    let out = qlocc(&["verify", "teleport", "--alpha", "1,0"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn unnormalized_amplitudes_are_a_usage_error() {
    let out = qlocc(&["verify", "teleport", "--alpha", "1,0", "--beta", "1,0"]);
    assert_eq!(code(&out), 2);
    assert!(
        stderr(&out).contains("|alpha|^2 + |beta|^2"),
        "stderr: {}",
        stderr(&out)
    );
}

#[test]
fn nonpositive_tolerance_is_a_usage_error() {
    let out = qlocc(&["verify", "teleport", "--tol", "0"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn zero_trials_is_a_usage_error() {
    let out = qlocc(&["verify", "teleport", "--trials", "0"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn out_of_range_bit_is_a_usage_error() {
    let out = qlocc(&["run", &shipped("densecode.qp"), "--a0", "2", "--a1", "0"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = qlocc(&["frobnicate"]);
    assert_eq!(code(&out), 2);
}
