//! Simulation and verification of quantum communication protocols.
//!
//! Programs act on a quantum register partitioned among parties plus
//! per-party classical stores, and communicate over classical and quantum
//! channels. Running a program yields the exact probability distribution over
//! final worlds; the verifier checks such distributions against declarative
//! specifications.

pub mod channel;
pub mod exec;
pub mod expr;
pub mod measure;
pub mod operator;
pub mod parser;
pub mod program;
pub mod protocols;
pub mod state;
pub mod verify;
pub mod world;

#[cfg(test)]
pub(crate) mod testutil;

pub use channel::{ChannelKind, ChannelState, Progress};
pub use exec::{run, run_branch_outcomes, run_with_hook, step_parallel, Distribution, StepEvent};
pub use expr::{eval_expr, BinOp, Expr, ExprError};
pub use measure::{
    measure_basis, measure_computational, measure_general, measure_subset, Basis, Branch,
    MeasureError, MeasurementCollection, EPS_PRUNE,
};
pub use operator::{embed, lift, GateId, Operator, EPS_UNITARY};
pub use parser::{parse_protocol, parse_protocol_with_overrides, protocol_name, render_error, ParseError};
pub use program::{GateExpr, PartyId, Program};
pub use protocols::{
    build_dense_coding, build_teleportation, build_teleportation_mutant,
    dense_coding_intermediate_failures, dense_coding_spec, teleportation_intermediate_failures,
    teleportation_spec, verify_dense_coding, verify_dense_coding_inputs, verify_dense_coding_with,
    verify_teleportation, verify_teleportation_states, verify_teleportation_with, ProtocolError,
    TeleportMutation,
};
pub use state::{bell_pair, Amplitude, LinalgError, StateVector, EPS_EXACT, EPS_NORM};
pub use verify::{
    check_spec, compare_distributions, fixed_probes, sample_initial_states, BranchCheck, Failure,
    Spec, VerifyReport, WORLD_KEY_TOL,
};
pub use world::{RuntimeError, World};
