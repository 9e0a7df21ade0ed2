//! Parties, gate expressions, and the ownership-annotated program AST.

use crate::channel::ChannelKind;
use crate::expr::Expr;
use crate::operator::{GateId, Operator};
use std::fmt;

/// A protocol participant, identified by name. Channels holding in-transit
/// qubits are modeled as parties whose names contain `:` and therefore can
/// never collide with declared participants.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PartyId(String);

impl PartyId {
    pub fn new(name: impl Into<String>) -> Self {
        PartyId(name.into())
    }

    /// The distinguished owner of qubits in transit on channel `name`.
    pub fn for_channel(name: &str) -> Self {
        PartyId(format!("channel:{name}"))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A unitary built from the gate library and tensor products. Placement onto
/// specific qubits happens at application time.
#[derive(Debug, Clone, PartialEq)]
pub enum GateExpr {
    Gate(GateId),
    Tensor(Box<GateExpr>, Box<GateExpr>),
}

impl GateExpr {
    pub fn gate(id: GateId) -> Self {
        GateExpr::Gate(id)
    }

    pub fn tensor(left: GateExpr, right: GateExpr) -> Self {
        GateExpr::Tensor(Box::new(left), Box::new(right))
    }

    /// Number of qubits the expression acts on.
    pub fn arity(&self) -> usize {
        match self {
            GateExpr::Gate(id) => id.arity(),
            GateExpr::Tensor(l, r) => l.arity() + r.arity(),
        }
    }

    pub fn to_operator(&self) -> Operator {
        match self {
            GateExpr::Gate(id) => id.matrix(),
            GateExpr::Tensor(l, r) => l.to_operator().tensor(&r.to_operator()),
        }
    }
}

impl fmt::Display for GateExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GateExpr::Gate(id) => write!(f, "{id}"),
            GateExpr::Tensor(l, r) => write!(f, "{l}⊗{r}"),
        }
    }
}

/// A program AST node. Primitive statements carry the party that executes
/// them; the runtime checks qubit ownership against that annotation.
#[derive(Debug, Clone, PartialEq)]
pub enum Program {
    /// The empty program: poststate equals prestate.
    Ok,
    Assign {
        party: PartyId,
        var: String,
        expr: Expr,
    },
    /// Resets the listed qubits to |0⟩ (collapsing any entanglement first).
    InitQubits {
        party: PartyId,
        qubits: Vec<usize>,
    },
    Apply {
        party: PartyId,
        gate: GateExpr,
        targets: Vec<usize>,
    },
    /// Computational-basis measurement of `targets`, binding one bit variable
    /// per target in order (first target = most significant bit).
    Measure {
        party: PartyId,
        targets: Vec<usize>,
        vars: Vec<String>,
    },
    SendC {
        party: PartyId,
        channel: String,
        expr: Expr,
    },
    RecvC {
        party: PartyId,
        channel: String,
        var: String,
    },
    SendQ {
        party: PartyId,
        channel: String,
        qubit: usize,
    },
    /// Receives a qubit; `qubit` names the register index the receiver
    /// expects, and the runtime errors if a different index arrives.
    RecvQ {
        party: PartyId,
        channel: String,
        qubit: usize,
    },
    Seq(Box<Program>, Box<Program>),
    Par(Box<Program>, Box<Program>),
    If {
        party: PartyId,
        cond: Expr,
        then_branch: Box<Program>,
        else_branch: Box<Program>,
    },
    /// Probabilistic choice: the left branch with probability `prob`, the
    /// right with `1 − prob`.
    ProbIf {
        prob: f64,
        then_branch: Box<Program>,
        else_branch: Box<Program>,
    },
    /// Declares a classical channel visible inside `body` only.
    DeclChan {
        name: String,
        kind: ChannelKind,
        writer: PartyId,
        reader: PartyId,
        body: Box<Program>,
    },
    /// Declares a quantum channel visible inside `body` only.
    DeclQChan {
        name: String,
        writer: PartyId,
        reader: PartyId,
        body: Box<Program>,
    },
}

impl Program {
    pub fn seq(first: Program, second: Program) -> Self {
        Program::Seq(Box::new(first), Box::new(second))
    }

    /// Right-fold of `seq` over a statement list; empty list is `Ok`.
    pub fn seq_all(stmts: Vec<Program>) -> Self {
        stmts
            .into_iter()
            .rev()
            .reduce(|acc, s| Program::seq(s, acc))
            .unwrap_or(Program::Ok)
    }

    pub fn par(left: Program, right: Program) -> Self {
        Program::Par(Box::new(left), Box::new(right))
    }

    pub fn if_else(party: PartyId, cond: Expr, then_branch: Program, else_branch: Program) -> Self {
        Program::If {
            party,
            cond,
            then_branch: Box::new(then_branch),
            else_branch: Box::new(else_branch),
        }
    }

    pub fn prob_if(prob: f64, then_branch: Program, else_branch: Program) -> Self {
        Program::ProbIf {
            prob,
            then_branch: Box::new(then_branch),
            else_branch: Box::new(else_branch),
        }
    }

    /// The party annotation of a primitive statement, if it has one.
    pub fn party(&self) -> Option<&PartyId> {
        match self {
            Program::Assign { party, .. }
            | Program::InitQubits { party, .. }
            | Program::Apply { party, .. }
            | Program::Measure { party, .. }
            | Program::SendC { party, .. }
            | Program::RecvC { party, .. }
            | Program::SendQ { party, .. }
            | Program::RecvQ { party, .. }
            | Program::If { party, .. } => Some(party),
            _ => None,
        }
    }
}

fn join<T: fmt::Display>(items: &[T], sep: &str) -> String {
    items
        .iter()
        .map(T::to_string)
        .collect::<Vec<_>>()
        .join(sep)
}

fn qubit_list(qubits: &[usize]) -> String {
    qubits
        .iter()
        .map(|q| format!("q{q}"))
        .collect::<Vec<_>>()
        .join(" ")
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Program::Ok => write!(f, "ok"),
            Program::Assign { party, var, expr } => write!(f, "{party}: {var} := {expr}"),
            Program::InitQubits { party, qubits } => {
                write!(f, "{party}: init {}", qubit_list(qubits))
            }
            Program::Apply {
                party,
                gate,
                targets,
            } => write!(f, "{party}: apply {gate} {}", qubit_list(targets)),
            Program::Measure {
                party,
                targets,
                vars,
            } => write!(
                f,
                "{party}: measure {} -> {}",
                qubit_list(targets),
                join(vars, " ")
            ),
            Program::SendC {
                party,
                channel,
                expr,
            } => write!(f, "{party}: send {channel} {expr}"),
            Program::RecvC {
                party,
                channel,
                var,
            } => write!(f, "{party}: recv {channel} -> {var}"),
            Program::SendQ {
                party,
                channel,
                qubit,
            } => write!(f, "{party}: qsend {channel} q{qubit}"),
            Program::RecvQ {
                party,
                channel,
                qubit,
            } => write!(f, "{party}: qrecv {channel} -> q{qubit}"),
            Program::Seq(a, b) => write!(f, "{a}; {b}"),
            Program::Par(a, b) => write!(f, "par {{ {a} }} {{ {b} }}"),
            Program::If {
                party,
                cond,
                then_branch,
                else_branch,
            } => write!(
                f,
                "{party}: if {cond} {{ {then_branch} }} else {{ {else_branch} }}"
            ),
            Program::ProbIf {
                prob,
                then_branch,
                else_branch,
            } => write!(f, "prob {prob} {{ {then_branch} }} else {{ {else_branch} }}"),
            Program::DeclChan {
                name,
                kind,
                writer,
                reader,
                body,
            } => write!(f, "chan {name} {kind} {writer} -> {reader} · {body}"),
            Program::DeclQChan {
                name,
                writer,
                reader,
                body,
            } => write!(f, "qchan {name} {writer} -> {reader} · {body}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gate_expr_arity_and_operator() {
        let hx = GateExpr::tensor(GateExpr::gate(GateId::H), GateExpr::gate(GateId::X));
        assert_eq!(hx.arity(), 2);
        let op = hx.to_operator();
        assert_eq!(op.qubits(), 2);
        assert!(op.is_unitary(1e-9));

        let with_cnot = GateExpr::tensor(GateExpr::gate(GateId::Cnot), GateExpr::gate(GateId::I));
        assert_eq!(with_cnot.arity(), 3);
    }

    #[test]
    fn seq_all_folds_in_order() {
        let alice = PartyId::new("Alice");
        let p = Program::seq_all(vec![
            Program::Assign {
                party: alice.clone(),
                var: "x".into(),
                expr: Expr::con(1),
            },
            Program::Assign {
                party: alice.clone(),
                var: "y".into(),
                expr: Expr::var("x"),
            },
        ]);
        match p {
            Program::Seq(a, _) => match *a {
                Program::Assign { ref var, .. } => assert_eq!(var, "x"),
                _ => panic!("first statement should be the x assignment"),
            },
            _ => panic!("expected Seq"),
        }
        assert_eq!(Program::seq_all(vec![]), Program::Ok);
    }

    #[test]
    fn statement_display_uses_surface_syntax() {
        let alice = PartyId::new("Alice");
        let s = Program::Apply {
            party: alice.clone(),
            gate: GateExpr::gate(GateId::H),
            targets: vec![0],
        };
        assert_eq!(s.to_string(), "Alice: apply H q0");

        let m = Program::Measure {
            party: alice.clone(),
            targets: vec![0, 1],
            vars: vec!["a0".into(), "a1".into()],
        };
        assert_eq!(m.to_string(), "Alice: measure q0 q1 -> a0 a1");

        let r = Program::RecvC {
            party: PartyId::new("Bob"),
            channel: "ch".into(),
            var: "b0".into(),
        };
        assert_eq!(r.to_string(), "Bob: recv ch -> b0");
    }

    #[test]
    fn channel_party_names_cannot_collide_with_identifiers() {
        let p = PartyId::for_channel("ch");
        assert!(p.name().contains(':'));
        assert_ne!(p, PartyId::new("ch"));
    }
}
