//! Built-in protocols: quantum teleportation and superdense coding.
//!
//! Both protocols run between two parties, Alice and Bob, who share an
//! entangled pair. Teleportation moves one unknown qubit state from Alice to
//! Bob at the cost of two classical bits; dense coding moves two classical
//! bits at the cost of one sent qubit. The builders here produce the program
//! and initial world; the `verify_*` functions run the full specification
//! suites, including intermediate-state checks exposed through the step
//! hook, and [`TeleportMutation`] produces deliberately broken variants used
//! to demonstrate that the checker rejects wrong protocols.

use thiserror::Error;

use crate::channel::ChannelKind;
use crate::exec::{run_with_hook, Distribution};
use crate::expr::Expr;
use crate::operator::GateId;
use crate::program::{GateExpr, PartyId, Program};
use crate::state::{bell_pair, Amplitude, LinalgError, StateVector};
use crate::verify::{check_spec, sample_initial_states, Failure, Spec, VerifyReport};
use crate::world::{RuntimeError, World};

/// The sending party of both built-in protocols.
pub fn alice() -> PartyId {
    PartyId::new("Alice")
}

/// The receiving party of both built-in protocols.
pub fn bob() -> PartyId {
    PartyId::new("Bob")
}

/// Errors from protocol construction and verification.
#[derive(Debug, Error)]
pub enum ProtocolError {
    /// The run itself failed.
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    /// A protocol file failed to parse (when a suite runs against a file
    /// instead of a builder).
    #[error(transparent)]
    Parse(#[from] crate::parser::ParseError),
    /// A dense-coding input was not 0 or 1.
    #[error("dense-coding input {name} = {value} is not a bit")]
    NotABit {
        /// Which input.
        name: &'static str,
        /// The offending value.
        value: i64,
    },
}

impl From<LinalgError> for ProtocolError {
    fn from(e: LinalgError) -> Self {
        ProtocolError::Runtime(e.into())
    }
}

/// A single-gate defect injected into the teleportation program, used to
/// check that verification is sound: every mutant must fail for at least one
/// fixed probe state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TeleportMutation {
    /// Drop Alice's entangling CNOT.
    OmitCnot,
    /// Drop Alice's Hadamard before measuring.
    OmitHadamard,
    /// Drop Bob's conditional X correction.
    OmitX,
    /// Drop Bob's conditional Z correction.
    OmitZ,
    /// Apply Bob's corrections in the wrong order (Z before X), which flips
    /// the sign of one branch.
    SwapCorrections,
}

fn apply1(party: PartyId, gate: GateId, target: usize) -> Program {
    Program::Apply {
        party,
        gate: GateExpr::gate(gate),
        targets: vec![target],
    }
}

/// The teleportation program over qubits 0 (Alice's message), 1 (Alice's
/// half of the pair), and 2 (Bob's half), with an optional injected defect.
fn teleportation_program(mutation: Option<TeleportMutation>) -> Program {
    use TeleportMutation::*;
    let skip = |m: TeleportMutation| mutation == Some(m);

    let mut alice_steps = Vec::new();
    if !skip(OmitCnot) {
        alice_steps.push(Program::Apply {
            party: alice(),
            gate: GateExpr::gate(GateId::Cnot),
            targets: vec![0, 1],
        });
    }
    if !skip(OmitHadamard) {
        alice_steps.push(apply1(alice(), GateId::H, 0));
    }
    alice_steps.push(Program::Measure {
        party: alice(),
        targets: vec![0, 1],
        vars: vec!["a0".into(), "a1".into()],
    });
    alice_steps.push(Program::SendC {
        party: alice(),
        channel: "ch".into(),
        expr: Expr::var("a0"),
    });
    alice_steps.push(Program::SendC {
        party: alice(),
        channel: "ch".into(),
        expr: Expr::var("a1"),
    });

    let x_fix = Program::if_else(
        bob(),
        Expr::eq(Expr::var("b1"), Expr::con(1)),
        apply1(bob(), GateId::X, 2),
        Program::Ok,
    );
    let z_fix = Program::if_else(
        bob(),
        Expr::eq(Expr::var("b0"), Expr::con(1)),
        apply1(bob(), GateId::Z, 2),
        Program::Ok,
    );
    let mut bob_steps = vec![
        Program::RecvC {
            party: bob(),
            channel: "ch".into(),
            var: "b0".into(),
        },
        Program::RecvC {
            party: bob(),
            channel: "ch".into(),
            var: "b1".into(),
        },
    ];
    // Z^{b0} X^{b1} φ₂ applies the X factor first; swapping the two flips
    // the (1,1) branch by a global sign, which the entrywise spec rejects.
    match mutation {
        Some(OmitX) => bob_steps.push(z_fix),
        Some(OmitZ) => bob_steps.push(x_fix),
        Some(SwapCorrections) => {
            bob_steps.push(z_fix);
            bob_steps.push(x_fix);
        }
        _ => {
            bob_steps.push(x_fix);
            bob_steps.push(z_fix);
        }
    }

    Program::DeclChan {
        name: "ch".into(),
        kind: ChannelKind::Bit,
        writer: alice(),
        reader: bob(),
        body: Box::new(Program::par(
            Program::seq_all(alice_steps),
            Program::seq_all(bob_steps),
        )),
    }
}

fn teleportation_world(alpha: Amplitude, beta: Amplitude) -> Result<World, ProtocolError> {
    let message = StateVector::new(1, vec![alpha, beta])?;
    let state = message.tensor(&bell_pair());
    Ok(World::new(state, vec![alice(), alice(), bob()])?)
}

/// The teleportation protocol: Alice teleports the state α|0⟩+β|1⟩ to Bob
/// using their shared entangled pair and two classical bits.
///
/// Qubit 0 carries the message, Alice also owns qubit 1; Bob owns qubit 2.
/// Errors if (α, β) is not normalized.
pub fn build_teleportation(
    alpha: Amplitude,
    beta: Amplitude,
) -> Result<(Program, World), ProtocolError> {
    Ok((teleportation_program(None), teleportation_world(alpha, beta)?))
}

/// [`build_teleportation`] with a single-gate defect injected.
pub fn build_teleportation_mutant(
    alpha: Amplitude,
    beta: Amplitude,
    mutation: TeleportMutation,
) -> Result<(Program, World), ProtocolError> {
    Ok((
        teleportation_program(Some(mutation)),
        teleportation_world(alpha, beta)?,
    ))
}

/// The exact distribution teleportation must produce from α|0⟩+β|1⟩: four
/// branches of probability 1/4, outcomes (a0, a1) echoed into (b0, b1), and
/// final state |a0 a1⟩ ⊗ (α|0⟩+β|1⟩).
fn teleportation_target(alpha: Amplitude, beta: Amplitude) -> Distribution {
    let zero = Amplitude::new(0.0, 0.0);
    let mut worlds = Vec::new();
    for a0 in 0..2usize {
        for a1 in 0..2usize {
            let base = (a0 << 2) | (a1 << 1);
            let mut amps = vec![zero; 8];
            amps[base] = alpha;
            amps[base + 1] = beta;
            let world = World::new(
                StateVector::new(3, amps).expect("normalized by construction"),
                vec![alice(), alice(), bob()],
            )
            .expect("owner map matches")
            .with_var("a0", a0 as i64)
            .with_var("a1", a1 as i64)
            .with_var("b0", a0 as i64)
            .with_var("b1", a1 as i64);
            worlds.push((0.25, world));
        }
    }
    Distribution::from_branches(worlds).expect("probabilities sum to 1")
}

/// The full teleportation specification for one input state: the exact
/// four-world output distribution, the per-branch claim that qubit 2 factors
/// out as α|0⟩+β|1⟩, and the communication cost c′−c = 2, q′−q = 0.
pub fn teleportation_spec(alpha: Amplitude, beta: Amplitude, tol: f64) -> Spec {
    Spec::all(vec![
        Spec::ExpectedDistribution(teleportation_target(alpha, beta)),
        Spec::branch("qubit-2 factor is α|0⟩+β|1⟩", move |_, after| {
            let (chi0, chi1) = qubit2_factor(after, tol)?;
            check_amp("factor entry |0⟩", chi0, alpha, tol)?;
            check_amp("factor entry |1⟩", chi1, beta, tol)
        }),
        Spec::CounterDelta { c: 2, q: 0 },
    ])
}

/// Extracts the qubit-2 factor of a 3-qubit state of the form |a0 a1⟩ ⊗ χ,
/// reading (a0, a1) from the world's classical store; errors if any mass
/// sits outside the |a0 a1⟩ block.
fn qubit2_factor(world: &World, tol: f64) -> Result<(Amplitude, Amplitude), String> {
    if world.qubits() != 3 {
        return Err(format!("expected a 3-qubit register, got {}", world.qubits()));
    }
    let a0 = bit_var(world, "a0")?;
    let a1 = bit_var(world, "a1")?;
    let base = (a0 << 2) | (a1 << 1);
    for x in 0..8 {
        if x != base && x != base + 1 && world.state.amplitude(x).norm() > tol {
            return Err(format!(
                "state is not of the form |{a0}{a1}⟩⊗χ: amplitude {} at index {x}",
                world.state.amplitude(x)
            ));
        }
    }
    Ok((world.state.amplitude(base), world.state.amplitude(base + 1)))
}

fn bit_var(world: &World, name: &str) -> Result<usize, String> {
    match world.var(name) {
        Some(0) => Ok(0),
        Some(1) => Ok(1),
        Some(v) => Err(format!("{name} = {v} is not a bit")),
        None => Err(format!("{name} is unbound")),
    }
}

fn check_amp(label: &str, got: Amplitude, want: Amplitude, tol: f64) -> Result<(), String> {
    if (got - want).norm() > tol {
        Err(format!("{label}: got {got}, expected {want}"))
    } else {
        Ok(())
    }
}

/// Runs teleportation once and checks the intermediate state right after
/// Alice's measurement, before Bob's corrections: each branch must be
/// |a0 a1⟩ ⊗ (α|a1⟩ + (−1)^{a0} β|1−a1⟩) within `tol`. Returns one reason
/// per violation.
pub fn teleportation_intermediate_failures(
    program: &Program,
    initial: &World,
    alpha: Amplitude,
    beta: Amplitude,
    tol: f64,
) -> Result<Vec<String>, RuntimeError> {
    let zero = Amplitude::new(0.0, 0.0);
    let mut reasons = Vec::new();
    run_with_hook(program, initial, &mut |ev| {
        if ev.statement != "Alice: measure q0 q1 -> a0 a1" {
            return;
        }
        let (a0, a1) = match (bit_var(ev.world, "a0"), bit_var(ev.world, "a1")) {
            (Ok(a0), Ok(a1)) => (a0, a1),
            (Err(e), _) | (_, Err(e)) => {
                reasons.push(format!("after measurement: {e}"));
                return;
            }
        };
        let base = (a0 << 2) | (a1 << 1);
        let sign = if a0 == 1 { -1.0 } else { 1.0 };
        let mut amps = vec![zero; 8];
        amps[base + a1] = alpha;
        amps[base + (1 - a1)] = beta * sign;
        let expected = StateVector::new(3, amps).expect("normalized by construction");
        if !ev.world.state.approx_eq(&expected, tol) {
            reasons.push(format!(
                "branch (a0, a1) = ({a0}, {a1}): state after measurement deviates from \
                 |{a0}{a1}⟩⊗(α|{a1}⟩{}β|{}⟩) by {:.3e}",
                if a0 == 1 { "−" } else { "+" },
                1 - a1,
                ev.world.state.max_diff(&expected).expect("same dimensions"),
            ));
        }
    })?;
    Ok(reasons)
}

/// Checks teleportation at the given input states: the full per-state
/// specification plus the intermediate-state claim. One trial per state.
pub fn verify_teleportation_states(
    states: &[(Amplitude, Amplitude)],
    tol: f64,
) -> Result<VerifyReport, ProtocolError> {
    verify_teleportation_with(build_teleportation, states, tol)
}

/// [`verify_teleportation_states`] against any source of the protocol — a
/// builder or a parsed file reinstantiated per input state.
pub fn verify_teleportation_with(
    build: impl Fn(Amplitude, Amplitude) -> Result<(Program, World), ProtocolError>,
    states: &[(Amplitude, Amplitude)],
    tol: f64,
) -> Result<VerifyReport, ProtocolError> {
    let mut reports = Vec::new();
    for (i, &(alpha, beta)) in states.iter().enumerate() {
        let tag = format!(
            "trial {i} (α = ({:.6}, {:.6}), β = ({:.6}, {:.6}))",
            alpha.re, alpha.im, beta.re, beta.im
        );
        let (program, world) = build(alpha, beta)?;
        let mut report = check_spec(&program, &world, &teleportation_spec(alpha, beta, tol), tol)?;
        for reason in teleportation_intermediate_failures(&program, &world, alpha, beta, tol)? {
            report.failures.push(Failure {
                branch: 0,
                reason: format!("intermediate state: {reason}"),
                measured: world.classical.clone(),
            });
            report.passed = false;
        }
        for f in &mut report.failures {
            f.reason = format!("{tag}: {}", f.reason);
        }
        reports.push(report);
    }
    Ok(VerifyReport::merged(reports, tol))
}

/// The standard teleportation suite: the four fixed probes plus `trials`
/// seeded pseudo-random input states.
pub fn verify_teleportation(
    tol: f64,
    trials: usize,
    seed: u64,
) -> Result<VerifyReport, ProtocolError> {
    verify_teleportation_states(&sample_initial_states(4 + trials, seed), tol)
}

/// The dense-coding program: Alice encodes (a0, a1) on her half of the pair
/// with I/X/Z/Y, sends the qubit, and Bob decodes with CNOT, H, and a
/// measurement into (b0, b1).
fn dense_coding_program() -> Program {
    let encode = Program::if_else(
        alice(),
        Expr::eq(Expr::var("a0"), Expr::con(0)),
        Program::if_else(
            alice(),
            Expr::eq(Expr::var("a1"), Expr::con(0)),
            Program::Ok,
            apply1(alice(), GateId::X, 0),
        ),
        Program::if_else(
            alice(),
            Expr::eq(Expr::var("a1"), Expr::con(0)),
            apply1(alice(), GateId::Z, 0),
            apply1(alice(), GateId::Y, 0),
        ),
    );
    let alice_side = Program::seq(
        encode,
        Program::SendQ {
            party: alice(),
            channel: "qc".into(),
            qubit: 0,
        },
    );
    let bob_side = Program::seq_all(vec![
        Program::RecvQ {
            party: bob(),
            channel: "qc".into(),
            qubit: 0,
        },
        Program::Apply {
            party: bob(),
            gate: GateExpr::gate(GateId::Cnot),
            targets: vec![0, 1],
        },
        apply1(bob(), GateId::H, 0),
        Program::Measure {
            party: bob(),
            targets: vec![0, 1],
            vars: vec!["b0".into(), "b1".into()],
        },
    ]);
    Program::DeclQChan {
        name: "qc".into(),
        writer: alice(),
        reader: bob(),
        body: Box::new(Program::par(alice_side, bob_side)),
    }
}

/// The dense-coding protocol: Alice transmits the bits (a0, a1) to Bob by
/// sending her half of a shared entangled pair. Alice owns qubit 0, Bob
/// qubit 1. Errors unless both inputs are bits.
pub fn build_dense_coding(a0: i64, a1: i64) -> Result<(Program, World), ProtocolError> {
    if !(0..=1).contains(&a0) {
        return Err(ProtocolError::NotABit { name: "a0", value: a0 });
    }
    if !(0..=1).contains(&a1) {
        return Err(ProtocolError::NotABit { name: "a1", value: a1 });
    }
    let world = World::new(bell_pair(), vec![alice(), bob()])?
        .with_var("a0", a0)
        .with_var("a1", a1);
    Ok((dense_coding_program(), world))
}

/// The dense-coding final state: (−i)^{a0·a1} |a0 a1⟩.
fn dense_coding_final_state(a0: i64, a1: i64) -> StateVector {
    let zero = Amplitude::new(0.0, 0.0);
    let mut amps = vec![zero; 4];
    amps[((a0 as usize) << 1) | a1 as usize] = if a0 == 1 && a1 == 1 {
        Amplitude::new(0.0, -1.0)
    } else {
        Amplitude::new(1.0, 0.0)
    };
    StateVector::new(2, amps).expect("a unit ket")
}

/// The dense-coding specification for one input: a single certain branch
/// with b0′ = a0, b1′ = a1, both qubits with Bob, final state
/// (−i)^{a0·a1}|a0 a1⟩, and cost c′−c = 0, q′−q = 1.
pub fn dense_coding_spec(a0: i64, a1: i64) -> Spec {
    let world = World::new(dense_coding_final_state(a0, a1), vec![bob(), bob()])
        .expect("owner map matches")
        .with_var("a0", a0)
        .with_var("a1", a1)
        .with_var("b0", a0)
        .with_var("b1", a1);
    let target = Distribution::from_branches(vec![(1.0, world)]).expect("a point distribution");
    Spec::all(vec![
        Spec::ExpectedDistribution(target),
        Spec::branch("b0′ = a0 and b1′ = a1", move |_, after| {
            if after.var("b0") != Some(a0) || after.var("b1") != Some(a1) {
                Err(format!(
                    "decoded ({:?}, {:?}), sent ({a0}, {a1})",
                    after.var("b0"),
                    after.var("b1")
                ))
            } else {
                Ok(())
            }
        }),
        Spec::CounterDelta { c: 0, q: 1 },
    ])
}

/// Runs dense coding once and checks the state right before Bob's
/// measurement (after his Hadamard): it must be (−i)^{a0·a1}|a0 a1⟩ within
/// `tol`. Returns one reason per violation.
pub fn dense_coding_intermediate_failures(
    program: &Program,
    initial: &World,
    a0: i64,
    a1: i64,
    tol: f64,
) -> Result<Vec<String>, RuntimeError> {
    let expected = dense_coding_final_state(a0, a1);
    let mut reasons = Vec::new();
    run_with_hook(program, initial, &mut |ev| {
        if ev.statement != "Bob: apply H q0" {
            return;
        }
        if !ev.world.state.approx_eq(&expected, tol) {
            reasons.push(format!(
                "pre-measurement state for (a0, a1) = ({a0}, {a1}) deviates from \
                 (−i)^{{a0·a1}}|a0 a1⟩ by {:.3e}",
                ev.world.state.max_diff(&expected).expect("same dimensions")
            ));
        }
    })?;
    Ok(reasons)
}

/// Checks dense coding at the given inputs. One trial per input.
pub fn verify_dense_coding_inputs(
    inputs: &[(i64, i64)],
    tol: f64,
) -> Result<VerifyReport, ProtocolError> {
    verify_dense_coding_with(build_dense_coding, inputs, tol)
}

/// [`verify_dense_coding_inputs`] against any source of the protocol — a
/// builder or a parsed file reinstantiated per input.
pub fn verify_dense_coding_with(
    build: impl Fn(i64, i64) -> Result<(Program, World), ProtocolError>,
    inputs: &[(i64, i64)],
    tol: f64,
) -> Result<VerifyReport, ProtocolError> {
    let mut reports = Vec::new();
    for &(a0, a1) in inputs {
        let (program, world) = build(a0, a1)?;
        let mut report = check_spec(&program, &world, &dense_coding_spec(a0, a1), tol)?;
        for reason in dense_coding_intermediate_failures(&program, &world, a0, a1, tol)? {
            report.failures.push(Failure {
                branch: 0,
                reason: format!("intermediate state: {reason}"),
                measured: world.classical.clone(),
            });
            report.passed = false;
        }
        for f in &mut report.failures {
            f.reason = format!("input (a0, a1) = ({a0}, {a1}): {}", f.reason);
        }
        reports.push(report);
    }
    Ok(VerifyReport::merged(reports, tol))
}

/// The standard dense-coding suite: all four inputs.
pub fn verify_dense_coding(tol: f64) -> Result<VerifyReport, ProtocolError> {
    verify_dense_coding_inputs(&[(0, 0), (0, 1), (1, 0), (1, 1)], tol)
}
