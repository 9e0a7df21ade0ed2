//! The execution world: shared register, classical stores, qubit ownership,
//! channels, and communication counters — plus the runtime error domain.

use crate::channel::ChannelState;
use crate::expr::ExprError;
use crate::measure::MeasureError;
use crate::program::PartyId;
use crate::state::{LinalgError, StateVector, EPS_EXACT};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("ownership violation in `{statement}`: qubit {qubit} is owned by {owner}, not {party}")]
    Ownership {
        statement: String,
        qubit: usize,
        owner: String,
        party: String,
    },
    #[error("owner map has {got} entries for a {qubits}-qubit register")]
    OwnerMapSize { got: usize, qubits: usize },
    #[error("channel `{name}` is not declared")]
    UnknownChannel { name: String },
    #[error("channel `{name}` is already declared")]
    ChannelCollision { name: String },
    #[error("in `{statement}`: {party} is not the {role} of channel `{name}`")]
    WrongEndpoint {
        statement: String,
        name: String,
        party: String,
        role: &'static str,
    },
    #[error("in `{statement}`: value {value} does not fit {kind} channel `{name}`")]
    TypeViolation {
        statement: String,
        name: String,
        value: i64,
        kind: String,
    },
    #[error("in `{statement}`: channel `{name}` is {found}, not {expected}")]
    KindMismatch {
        statement: String,
        name: String,
        found: String,
        expected: &'static str,
    },
    #[error("int channel range {range} is too small (minimum 2)")]
    BadIntRange { range: u64 },
    #[error("received qubit q{got} on `{name}` but the receiver binds q{expected}")]
    BinderMismatch {
        name: String,
        got: usize,
        expected: usize,
    },
    #[error("measurement binds {vars} variable(s) for {targets} target(s)")]
    MeasureArity { vars: usize, targets: usize },
    #[error("branch probability {prob} is outside [0, 1]")]
    BadProbability { prob: f64 },
    #[error("deadlock: no process can step; blocked at: {statements}")]
    Deadlock { statements: String },
    #[error("branch probabilities sum to {total}, expected 1")]
    ProbabilityLeak { total: f64 },
}

/// A snapshot of the full execution state. `run` never mutates a caller's
/// world; branching clones snapshots.
#[derive(Debug, Clone)]
pub struct World {
    /// The shared quantum register φ.
    pub state: StateVector,
    /// Classical variable store (flat namespace across parties).
    pub classical: BTreeMap<String, i64>,
    /// Owner of each qubit, indexed by qubit; total by construction.
    pub owner: Vec<PartyId>,
    /// Channels currently in scope, by name.
    pub channels: BTreeMap<String, ChannelState>,
    /// Classical bits sent so far.
    pub c: u64,
    /// Qubits sent so far.
    pub q: u64,
    /// Logical time: advances by one at every send.
    pub t: u64,
}

impl World {
    /// A fresh world over `state` with the given per-qubit owners, empty
    /// classical store, no channels, and zeroed counters.
    pub fn new(state: StateVector, owner: Vec<PartyId>) -> Result<Self, RuntimeError> {
        if owner.len() != state.qubits() {
            return Err(RuntimeError::OwnerMapSize {
                got: owner.len(),
                qubits: state.qubits(),
            });
        }
        Ok(World {
            state,
            classical: BTreeMap::new(),
            owner,
            channels: BTreeMap::new(),
            c: 0,
            q: 0,
            t: 0,
        })
    }

    /// Builder-style initial variable binding.
    pub fn with_var(mut self, name: impl Into<String>, value: i64) -> Self {
        self.classical.insert(name.into(), value);
        self
    }

    pub fn qubits(&self) -> usize {
        self.state.qubits()
    }

    pub fn owner_of(&self, qubit: usize) -> &PartyId {
        &self.owner[qubit]
    }

    pub fn var(&self, name: &str) -> Option<i64> {
        self.classical.get(name).copied()
    }

    /// Qubits currently owned by `party`, in index order.
    pub fn owned_by(&self, party: &PartyId) -> Vec<usize> {
        (0..self.qubits())
            .filter(|&i| &self.owner[i] == party)
            .collect()
    }

    /// Exact-outcome equality used when merging final worlds: classical
    /// stores, owners, channels, and counters must be equal, and states must
    /// agree entrywise within `state_tol`.
    pub fn same_outcome(&self, other: &World, state_tol: f64) -> bool {
        self.classical == other.classical
            && self.owner == other.owner
            && self.channels == other.channels
            && (self.c, self.q, self.t) == (other.c, other.q, other.t)
            && self.state.approx_eq(&other.state, state_tol)
    }

    /// `same_outcome` at the merge tolerance.
    pub fn merges_with(&self, other: &World) -> bool {
        self.same_outcome(other, EPS_EXACT)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::bell_pair;

    fn two_party_world() -> World {
        World::new(
            bell_pair(),
            vec![PartyId::new("Alice"), PartyId::new("Bob")],
        )
        .unwrap()
    }

    #[test]
    fn construction_requires_total_owner_map() {
        let err = World::new(bell_pair(), vec![PartyId::new("Alice")]);
        assert!(matches!(err, Err(RuntimeError::OwnerMapSize { got: 1, qubits: 2 })));
    }

    #[test]
    fn ownership_lookup() {
        let w = two_party_world();
        assert_eq!(w.owner_of(0).name(), "Alice");
        assert_eq!(w.owned_by(&PartyId::new("Bob")), vec![1]);
    }

    #[test]
    fn outcome_equality_is_sensitive_to_every_component() {
        let w = two_party_world();
        assert!(w.merges_with(&w.clone()));

        let with_var = w.clone().with_var("x", 1);
        assert!(!w.merges_with(&with_var));

        let mut bumped = w.clone();
        bumped.c += 1;
        assert!(!w.merges_with(&bumped));

        let mut reowned = w.clone();
        reowned.owner[1] = PartyId::new("Alice");
        assert!(!w.merges_with(&reowned));

        let mut other_state = w.clone();
        other_state.state = StateVector::ket(0, 2).unwrap();
        assert!(!w.merges_with(&other_state));
    }
}
