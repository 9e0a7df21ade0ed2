//! Command-line front end: run protocol files and verify protocols against
//! their specification suites.
//!
//! Exit codes: 0 when the command succeeds (and, for `verify`, the suite
//! passes), 1 when a run fails or a specification is violated, 2 on usage,
//! I/O, or parse errors.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qlocc_core::{
    build_dense_coding, build_teleportation, parse_protocol, parse_protocol_with_overrides,
    protocol_name, render_error, run, sample_initial_states, verify_dense_coding_with,
    verify_teleportation_with, Amplitude, Distribution, Program, ProtocolError, StateVector,
    VerifyReport, World,
};

/// Amplitudes smaller than this are omitted from rendered states, and
/// real/imaginary parts smaller than this are omitted from rendered
/// amplitudes.
const RENDER_EPS: f64 = 1e-9;

#[derive(Parser)]
#[command(
    name = "qlocc",
    version,
    about = "Simulate and verify quantum communication protocols"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a protocol file and print the distribution over final worlds.
    Run {
        /// Protocol file to run.
        file: PathBuf,
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Check a protocol against its specification suite.
    ///
    /// The target is `teleport` or `densecode` for the built-in programs, or
    /// a path to a protocol file declaring one of those two protocols.
    Verify {
        /// `teleport`, `densecode`, or a protocol file.
        target: String,
        #[command(flatten)]
        opts: CommonOpts,
    },
}

#[derive(Args)]
struct CommonOpts {
    /// Numerical tolerance for probability and amplitude comparisons.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,

    /// Number of seeded pseudo-random teleportation input states checked in
    /// addition to the four fixed probes.
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    trials: u64,

    /// Seed for the pseudo-random input states.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,

    /// Message amplitude for |0>, as `RE,IM`. Requires --beta; together they
    /// must satisfy |alpha|^2 + |beta|^2 = 1. Replaces the single-qubit
    /// `init amp` line of a teleportation file, and restricts `verify` to
    /// this one input state.
    #[arg(long, value_parser = parse_complex, requires = "beta", allow_hyphen_values = true)]
    alpha: Option<Amplitude>,

    /// Message amplitude for |1>, as `RE,IM`. Requires --alpha.
    #[arg(long, value_parser = parse_complex, requires = "alpha", allow_hyphen_values = true)]
    beta: Option<Amplitude>,

    /// Value for the classical variable a0. Requires --a1; restricts dense
    /// coding to this one input.
    #[arg(long, value_parser = clap::value_parser!(i64).range(0..=1), requires = "a1")]
    a0: Option<i64>,

    /// Value for the classical variable a1. Requires --a0.
    #[arg(long, value_parser = clap::value_parser!(i64).range(0..=1), requires = "a0")]
    a1: Option<i64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

fn parse_complex(s: &str) -> Result<Amplitude, String> {
    let (re, im) = s
        .split_once(',')
        .ok_or_else(|| format!("expected `RE,IM`, got `{s}`"))?;
    let parse = |part: &str, name: &str| {
        part.trim()
            .parse::<f64>()
            .map_err(|e| format!("bad {name} part `{}`: {e}", part.trim()))
    };
    Ok(Amplitude::new(parse(re, "real")?, parse(im, "imaginary")?))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.cmd {
        Cmd::Run { file, opts } => cmd_run(&file, &opts),
        Cmd::Verify { target, opts } => cmd_verify(&target, &opts),
    };
    ExitCode::from(code)
}

/// Checks the constraints clap cannot express. A violation is a usage error.
fn validate(opts: &CommonOpts) -> Result<(), String> {
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(format!("--tol must be positive, got {}", opts.tol));
    }
    if let (Some(alpha), Some(beta)) = (opts.alpha, opts.beta) {
        let norm = alpha.norm_sqr() + beta.norm_sqr();
        if (norm - 1.0).abs() > RENDER_EPS {
            return Err(format!(
                "--alpha/--beta must satisfy |alpha|^2 + |beta|^2 = 1, got {norm}"
            ));
        }
    }
    Ok(())
}

fn usage_error(msg: &str) -> u8 {
    eprintln!("qlocc: error: {msg}");
    2
}

fn cmd_run(file: &Path, opts: &CommonOpts) -> u8 {
    if let Err(msg) = validate(opts) {
        return usage_error(&msg);
    }
    let path = file.display().to_string();
    let text = match std::fs::read_to_string(file) {
        Ok(text) => text,
        Err(e) => {
            eprintln!("qlocc: {path}: {e}");
            return 2;
        }
    };
    let overrides = opts.alpha.zip(opts.beta);
    let (program, mut world) = match parse_protocol_with_overrides(&text, overrides) {
        Ok(pw) => pw,
        Err(e) => {
            eprint!("{}", render_error(&path, &text, &e));
            return 2;
        }
    };
    if let Some(a0) = opts.a0 {
        world.classical.insert("a0".into(), a0);
    }
    if let Some(a1) = opts.a1 {
        world.classical.insert("a1".into(), a1);
    }
    let dist = match run(&program, &world) {
        Ok(dist) => dist,
        Err(e) => {
            eprintln!("qlocc: {path}: runtime error: {e}");
            return 1;
        }
    };
    match opts.format {
        Format::Text => print!("{}", render_distribution_text(&dist)),
        Format::Json => println!("{}", render_distribution_json(&dist)),
    }
    0
}

/// Branches sorted by their rendered outcome (everything but the
/// probability).
fn sorted_branches(dist: &Distribution) -> Vec<(f64, String, &World)> {
    let mut branches: Vec<(f64, String, &World)> = dist
        .branches()
        .iter()
        .map(|(prob, world)| (*prob, render_outcome(world), world))
        .collect();
    branches.sort_by(|a, b| a.1.cmp(&b.1));
    branches
}

fn render_distribution_text(dist: &Distribution) -> String {
    let mut out = String::new();
    for (prob, outcome, _) in sorted_branches(dist) {
        let _ = writeln!(out, "prob {prob:.6}  {outcome}");
    }
    out
}

fn render_outcome(world: &World) -> String {
    let mut out = String::new();
    if !world.classical.is_empty() {
        let vars: Vec<String> = world
            .classical
            .iter()
            .map(|(name, value)| format!("{name}={value}"))
            .collect();
        let _ = write!(out, "{}  ", vars.join(" "));
    }
    let _ = write!(
        out,
        "c={} q={} t={}  state {}",
        world.c,
        world.q,
        world.t,
        render_state(&world.state)
    );
    out
}

fn render_state(state: &StateVector) -> String {
    let width = state.qubits();
    let mut out = String::new();
    for (index, amp) in state.amplitudes().iter().enumerate() {
        if amp.norm() <= RENDER_EPS {
            continue;
        }
        let coef = render_amplitude(*amp);
        if out.is_empty() {
            out.push_str(&coef);
        } else if let Some(rest) = coef.strip_prefix('-') {
            out.push_str(" - ");
            out.push_str(rest);
        } else {
            out.push_str(" + ");
            out.push_str(&coef);
        }
        let _ = write!(out, "|{index:0width$b}>");
    }
    if out.is_empty() {
        out.push('0');
    }
    out
}

fn render_amplitude(amp: Amplitude) -> String {
    if amp.im.abs() <= RENDER_EPS {
        format!("{:.6}", amp.re)
    } else if amp.re.abs() <= RENDER_EPS {
        format!("{:.6}i", amp.im)
    } else {
        format!("({:.6}{:+.6}i)", amp.re, amp.im)
    }
}

fn render_distribution_json(dist: &Distribution) -> String {
    let branches: Vec<serde_json::Value> = sorted_branches(dist)
        .into_iter()
        .map(|(prob, _, world)| {
            serde_json::json!({
                "prob": prob,
                "vars": world.classical,
                "c": world.c,
                "q": world.q,
                "t": world.t,
                "state": world
                    .state
                    .amplitudes()
                    .iter()
                    .map(|a| serde_json::json!([a.re, a.im]))
                    .collect::<Vec<_>>(),
            })
        })
        .collect();
    serde_json::to_string_pretty(&serde_json::json!({ "branches": branches }))
        .expect("distribution serialization cannot fail")
}

type Row = (String, VerifyReport);

fn cmd_verify(target: &str, opts: &CommonOpts) -> u8 {
    if let Err(msg) = validate(opts) {
        return usage_error(&msg);
    }
    match target {
        "teleport" => finish_verify("teleport", teleport_rows(build_teleportation, opts), opts, None),
        "densecode" => finish_verify("densecode", densecode_rows(build_dense_coding, opts), opts, None),
        path => {
            let text = match std::fs::read_to_string(path) {
                Ok(text) => text,
                Err(e) => {
                    eprintln!("qlocc: {path}: {e}");
                    return 2;
                }
            };
            let name = match protocol_name(&text) {
                Ok(name) => name,
                Err(e) => {
                    eprint!("{}", render_error(path, &text, &e));
                    return 2;
                }
            };
            match name.as_str() {
                "teleport" => {
                    let build = |alpha: Amplitude, beta: Amplitude| {
                        parse_protocol_with_overrides(&text, Some((alpha, beta)))
                            .map_err(ProtocolError::from)
                    };
                    finish_verify("teleport", teleport_rows(build, opts), opts, Some((path, &text)))
                }
                "densecode" => {
                    let build = |a0: i64, a1: i64| -> Result<(Program, World), ProtocolError> {
                        let (program, mut world) = parse_protocol(&text)?;
                        world.classical.insert("a0".into(), a0);
                        world.classical.insert("a1".into(), a1);
                        Ok((program, world))
                    };
                    finish_verify("densecode", densecode_rows(build, opts), opts, Some((path, &text)))
                }
                other => {
                    eprintln!(
                        "qlocc: {path}: unknown protocol `{other}`; `verify` supports `teleport` and `densecode`"
                    );
                    2
                }
            }
        }
    }
}

fn teleport_rows(
    build: impl Fn(Amplitude, Amplitude) -> Result<(Program, World), ProtocolError>,
    opts: &CommonOpts,
) -> Result<Vec<Row>, ProtocolError> {
    let mut rows = Vec::new();
    if let Some((alpha, beta)) = opts.alpha.zip(opts.beta) {
        let label = format!(
            "input state alpha = ({:.6}, {:.6}), beta = ({:.6}, {:.6})",
            alpha.re, alpha.im, beta.re, beta.im
        );
        rows.push((label, verify_teleportation_with(&build, &[(alpha, beta)], opts.tol)?));
    } else {
        let states = sample_initial_states(4 + opts.trials as usize, opts.seed);
        rows.push((
            "fixed probes".to_string(),
            verify_teleportation_with(&build, &states[..4], opts.tol)?,
        ));
        rows.push((
            format!("random states (seed {})", opts.seed),
            verify_teleportation_with(&build, &states[4..], opts.tol)?,
        ));
    }
    Ok(rows)
}

fn densecode_rows(
    build: impl Fn(i64, i64) -> Result<(Program, World), ProtocolError>,
    opts: &CommonOpts,
) -> Result<Vec<Row>, ProtocolError> {
    let inputs: Vec<(i64, i64)> = match (opts.a0, opts.a1) {
        (Some(a0), Some(a1)) => vec![(a0, a1)],
        _ => vec![(0, 0), (0, 1), (1, 0), (1, 1)],
    };
    inputs
        .into_iter()
        .map(|(a0, a1)| {
            let report = verify_dense_coding_with(&build, &[(a0, a1)], opts.tol)?;
            Ok((format!("input (a0, a1) = ({a0}, {a1})"), report))
        })
        .collect()
}

fn finish_verify(
    name: &str,
    rows: Result<Vec<Row>, ProtocolError>,
    opts: &CommonOpts,
    source: Option<(&str, &str)>,
) -> u8 {
    match rows {
        Ok(rows) => report_rows(name, rows, opts),
        Err(ProtocolError::Parse(e)) => {
            match source {
                Some((path, text)) => eprint!("{}", render_error(path, text, &e)),
                None => eprintln!("qlocc: parse error: {e}"),
            }
            2
        }
        Err(e) => {
            eprintln!("qlocc: {e}");
            1
        }
    }
}

fn report_rows(name: &str, rows: Vec<Row>, opts: &CommonOpts) -> u8 {
    let merged = VerifyReport::merged(rows.iter().map(|(_, report)| report.clone()), opts.tol);
    match opts.format {
        Format::Json => println!("{}", merged.to_json()),
        Format::Text => {
            for (label, report) in &rows {
                println!(
                    "{label}: {} ({} trial{})",
                    verdict(report.passed),
                    report.trials,
                    plural(report.trials)
                );
            }
            for failure in &merged.failures {
                println!("  {}", failure.reason);
            }
            println!(
                "{name}: {} ({} trial{}, max probability error {:.1e})",
                verdict(merged.passed),
                merged.trials,
                plural(merged.trials),
                merged.max_prob_error
            );
        }
    }
    u8::from(!merged.passed)
}

fn verdict(passed: bool) -> &'static str {
    if passed {
        "PASS"
    } else {
        "FAIL"
    }
}

fn plural(n: u64) -> &'static str {
    if n == 1 {
        ""
    } else {
        "s"
    }
}
