//! Checking probabilistic specifications against run distributions.
//!
//! A specification here is a boolean claim about program behaviour, in the
//! predicative sense: a program meets it when every behaviour — every branch
//! of the exact output distribution — satisfies it. [`Spec`] gives the
//! executable forms we support: per-branch predicates over (initial, final)
//! world pairs, expected output distributions matched world-by-world,
//! communication-counter deltas, and conjunctions of these.
//!
//! [`check_spec`] runs a program and evaluates a [`Spec`] over the result,
//! producing a [`VerifyReport`] that the CLI renders as text or JSON.
//! Universally quantified inputs (the α, β of a protocol) are discharged by
//! probing: [`sample_initial_states`] yields a fixed set of basis and
//! superposition probes followed by seeded pseudo-random states. Linearity of
//! the underlying operations makes this probe set highly discriminating even
//! though it is not a proof.
//!
//! State equality inside specs is entrywise at tolerance, not up-to-global-
//! phase; the opt-in phase-insensitive comparator on state vectors exists for
//! callers that explicitly want ray equality.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::exec::{run, Distribution};
use crate::program::Program;
use crate::state::Amplitude;
use crate::world::{RuntimeError, World};

/// Amplitude grain for world keys when aligning two distributions: worlds
/// whose classical stores and owner maps are equal and whose states agree
/// entrywise within this tolerance are considered the same outcome.
pub const WORLD_KEY_TOL: f64 = 1e-9;

/// A per-branch predicate over the (initial, final) world pair. Returning
/// `Err` gives the reason the branch violates the specification.
pub type BranchCheck = Box<dyn Fn(&World, &World) -> Result<(), String> + Send + Sync>;

/// An executable specification, evaluated against the distribution a program
/// produces from a given initial world.
pub enum Spec {
    /// Every branch must satisfy the predicate; the name labels failures.
    BranchPredicate {
        /// Short label used in failure reasons.
        name: String,
        /// Total predicate over well-formed (initial, final) world pairs.
        predicate: BranchCheck,
    },
    /// The run's distribution must match this one: worlds aligned by
    /// (classical store, owner map, state at [`WORLD_KEY_TOL`]), every world
    /// matched, and each matched pair's probabilities within tolerance.
    ExpectedDistribution(Distribution),
    /// Required communication-counter growth on every branch.
    CounterDelta {
        /// Required c′ − c (classical bits sent).
        c: u64,
        /// Required q′ − q (qubits sent).
        q: u64,
    },
    /// All sub-specifications must hold.
    Conjunction(Vec<Spec>),
}

impl Spec {
    /// A named per-branch predicate.
    pub fn branch<F>(name: impl Into<String>, predicate: F) -> Spec
    where
        F: Fn(&World, &World) -> Result<(), String> + Send + Sync + 'static,
    {
        Spec::BranchPredicate {
            name: name.into(),
            predicate: Box::new(predicate),
        }
    }

    /// Conjunction of `specs`.
    pub fn all(specs: Vec<Spec>) -> Spec {
        Spec::Conjunction(specs)
    }
}

impl fmt::Debug for Spec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Spec::BranchPredicate { name, .. } => {
                f.debug_struct("BranchPredicate").field("name", name).finish()
            }
            Spec::ExpectedDistribution(d) => {
                f.debug_tuple("ExpectedDistribution").field(d).finish()
            }
            Spec::CounterDelta { c, q } => f
                .debug_struct("CounterDelta")
                .field("c", c)
                .field("q", q)
                .finish(),
            Spec::Conjunction(specs) => f.debug_tuple("Conjunction").field(specs).finish(),
        }
    }
}

/// One specification violation: which branch, why, and the branch's classical
/// store as the measured values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    /// Index of the offending branch in the run's distribution (for a missing
    /// expected world, the index in the expected distribution).
    pub branch: usize,
    /// Human-readable reason.
    pub reason: String,
    /// Classical store of the offending branch.
    pub measured: BTreeMap<String, i64>,
}

/// Outcome of checking one or more specifications.
///
/// `passed` holds exactly when `failures` is empty and `max_prob_error` is
/// within the tolerance the report was built with.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    /// Overall verdict.
    pub passed: bool,
    /// Number of (program, initial world) trials aggregated in this report.
    pub trials: u64,
    /// Largest per-world probability discrepancy seen in distribution
    /// matching (0 when no distribution spec was evaluated).
    pub max_prob_error: f64,
    /// All violations, in branch order per trial.
    pub failures: Vec<Failure>,
}

impl VerifyReport {
    /// Assembles a report, deriving `passed` from the parts and `tol`.
    pub fn from_parts(trials: u64, max_prob_error: f64, failures: Vec<Failure>, tol: f64) -> Self {
        VerifyReport {
            passed: failures.is_empty() && max_prob_error <= tol,
            trials,
            max_prob_error,
            failures,
        }
    }

    /// Aggregates per-trial reports: trial counts add, probability errors
    /// take the maximum, failures concatenate, and the verdict is rederived
    /// at `tol`. Callers give failure reasons a per-trial prefix beforehand
    /// if branch indices alone would be ambiguous.
    pub fn merged(reports: impl IntoIterator<Item = VerifyReport>, tol: f64) -> Self {
        let mut trials = 0;
        let mut max_prob_error = 0.0f64;
        let mut failures = Vec::new();
        for r in reports {
            trials += r.trials;
            max_prob_error = max_prob_error.max(r.max_prob_error);
            failures.extend(r.failures);
        }
        VerifyReport::from_parts(trials, max_prob_error, failures, tol)
    }

    /// The report as pretty-printed JSON with exactly the struct's fields.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

/// Runs `program` from `initial` and evaluates `spec` over the resulting
/// distribution. Run-time errors propagate. `tol` (> 0) bounds both the
/// per-world probability error in distribution matching and the derived
/// verdict.
pub fn check_spec(
    program: &Program,
    initial: &World,
    spec: &Spec,
    tol: f64,
) -> Result<VerifyReport, RuntimeError> {
    assert!(tol > 0.0, "tolerance must be positive");
    let dist = run(program, initial)?;
    let (failures, max_err) = eval_spec(spec, initial, &dist, tol);
    Ok(VerifyReport::from_parts(1, max_err, failures, tol))
}

fn eval_spec(spec: &Spec, initial: &World, dist: &Distribution, tol: f64) -> (Vec<Failure>, f64) {
    match spec {
        Spec::BranchPredicate { name, predicate } => {
            let mut failures = Vec::new();
            for (i, (_, world)) in dist.branches().iter().enumerate() {
                if let Err(reason) = predicate(initial, world) {
                    failures.push(Failure {
                        branch: i,
                        reason: format!("{name}: {reason}"),
                        measured: world.classical.clone(),
                    });
                }
            }
            (failures, 0.0)
        }
        Spec::ExpectedDistribution(target) => distribution_failures(dist, target, tol),
        Spec::CounterDelta { c, q } => {
            let mut failures = Vec::new();
            for (i, (_, world)) in dist.branches().iter().enumerate() {
                let dc = world.c - initial.c;
                let dq = world.q - initial.q;
                if (dc, dq) != (*c, *q) {
                    failures.push(Failure {
                        branch: i,
                        reason: format!(
                            "counter mismatch: c′−c = {dc}, q′−q = {dq} (required c′−c = {c}, q′−q = {q})"
                        ),
                        measured: world.classical.clone(),
                    });
                }
            }
            (failures, 0.0)
        }
        Spec::Conjunction(specs) => {
            let mut failures = Vec::new();
            let mut max_err = 0.0f64;
            for s in specs {
                let (f, e) = eval_spec(s, initial, dist, tol);
                failures.extend(f);
                max_err = max_err.max(e);
            }
            (failures, max_err)
        }
    }
}

/// Do two worlds denote the same outcome for distribution alignment? Keys on
/// the classical store, the owner map, and the state entrywise at
/// [`WORLD_KEY_TOL`]; channels and counters are deliberately not part of the
/// key so hand-built targets need no channel bookkeeping.
fn same_world_key(a: &World, b: &World) -> bool {
    a.classical == b.classical
        && a.owner == b.owner
        && a.state.qubits() == b.state.qubits()
        && a.state.approx_eq(&b.state, WORLD_KEY_TOL)
}

/// Matches `got` against `want` world-by-world. Returns the violations and
/// the largest probability discrepancy (an unmatched world counts with its
/// full probability).
fn distribution_failures(
    got: &Distribution,
    want: &Distribution,
    tol: f64,
) -> (Vec<Failure>, f64) {
    let mut used = vec![false; want.len()];
    let mut failures = Vec::new();
    let mut max_err = 0.0f64;
    for (i, (prob, world)) in got.branches().iter().enumerate() {
        let matched = want
            .branches()
            .iter()
            .enumerate()
            .find(|(j, (_, w))| !used[*j] && same_world_key(world, w));
        match matched {
            Some((j, (want_prob, _))) => {
                used[j] = true;
                let err = (prob - want_prob).abs();
                max_err = max_err.max(err);
                if err > tol {
                    failures.push(Failure {
                        branch: i,
                        reason: format!(
                            "probability mismatch: got {prob:.12}, expected {want_prob:.12}"
                        ),
                        measured: world.classical.clone(),
                    });
                }
            }
            None => {
                max_err = max_err.max(*prob);
                failures.push(Failure {
                    branch: i,
                    reason: format!(
                        "world not in expected distribution (probability {prob:.12})"
                    ),
                    measured: world.classical.clone(),
                });
            }
        }
    }
    for (j, (prob, world)) in want.branches().iter().enumerate() {
        if !used[j] {
            max_err = max_err.max(*prob);
            failures.push(Failure {
                branch: j,
                reason: format!("expected world not produced (probability {prob:.12})"),
                measured: world.classical.clone(),
            });
        }
    }
    (failures, max_err)
}

/// Matches two distributions world-by-world. Returns whether they agree
/// (every world matched, probabilities within `tol`) and the largest
/// per-world probability discrepancy.
pub fn compare_distributions(d1: &Distribution, d2: &Distribution, tol: f64) -> (bool, f64) {
    assert!(tol > 0.0, "tolerance must be positive");
    let (failures, max_err) = distribution_failures(d1, d2, tol);
    (failures.is_empty(), max_err)
}

/// The four fixed probe states: the basis kets and two superpositions, one
/// with a relative phase.
pub fn fixed_probes() -> [(Amplitude, Amplitude); 4] {
    let s = FRAC_1_SQRT_2;
    [
        (Amplitude::new(1.0, 0.0), Amplitude::new(0.0, 0.0)),
        (Amplitude::new(0.0, 0.0), Amplitude::new(1.0, 0.0)),
        (Amplitude::new(s, 0.0), Amplitude::new(s, 0.0)),
        (Amplitude::new(s, 0.0), Amplitude::new(0.0, s)),
    ]
}

/// `k` reproducible single-qubit states (α, β) with |α|²+|β|² = 1: the fixed
/// probes first, then seeded pseudo-random pairs drawn from the unit disk and
/// jointly normalized. `k ≥ 1`.
pub fn sample_initial_states(k: usize, seed: u64) -> Vec<(Amplitude, Amplitude)> {
    assert!(k >= 1, "at least one sample required");
    let mut out: Vec<_> = fixed_probes().into_iter().take(k).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while out.len() < k {
        let a = unit_disk(&mut rng);
        let b = unit_disk(&mut rng);
        let norm = (a.norm_sqr() + b.norm_sqr()).sqrt();
        // Reject nearly-degenerate draws so normalization stays well
        // conditioned.
        if norm < 1e-3 {
            continue;
        }
        out.push((a / norm, b / norm));
    }
    out
}

fn unit_disk(rng: &mut impl Rng) -> Amplitude {
    loop {
        let re: f64 = rng.random_range(-1.0..=1.0);
        let im: f64 = rng.random_range(-1.0..=1.0);
        if re * re + im * im <= 1.0 {
            return Amplitude::new(re, im);
        }
    }
}
