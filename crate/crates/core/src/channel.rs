//! Classical and quantum channels: message/time scripts with cursors,
//! blocking receives, and ownership transfer for sent qubits.

use crate::program::PartyId;
use crate::world::{RuntimeError, World};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    /// Classical channel carrying single bits; each send costs 1 toward `c`.
    Bit,
    /// Classical channel carrying integers in `0..range` (range ≥ 2); each
    /// send costs ⌈log₂ range⌉ bits toward `c`.
    Int { range: u64 },
    /// Quantum channel carrying qubits; each send costs 1 toward `q`.
    Quantum,
}

impl ChannelKind {
    pub fn is_classical(&self) -> bool {
        !matches!(self, ChannelKind::Quantum)
    }

    /// Classical bits charged to the `c` counter per send.
    pub fn bits_per_send(&self) -> u64 {
        match self {
            ChannelKind::Bit => 1,
            ChannelKind::Int { range } => u64::BITS as u64 - (range - 1).leading_zeros() as u64,
            ChannelKind::Quantum => 0,
        }
    }

    /// True iff `value` is a legal message for this kind.
    pub fn admits(&self, value: i64) -> bool {
        match self {
            ChannelKind::Bit => value == 0 || value == 1,
            ChannelKind::Int { range } => value >= 0 && (value as u64) < *range,
            ChannelKind::Quantum => true,
        }
    }
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelKind::Bit => write!(f, "bit"),
            ChannelKind::Int { range } => write!(f, "int[{range}]"),
            ChannelKind::Quantum => write!(f, "quantum"),
        }
    }
}

/// One channel's runtime state: everything ever sent (the message and time
/// scripts) plus the write and read cursors into them.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    pub kind: ChannelKind,
    /// Sent values: classical messages, or qubit indices for quantum channels.
    pub msg_script: Vec<i64>,
    /// Logical send time of each message.
    pub time_script: Vec<u64>,
    pub write_cursor: usize,
    pub read_cursor: usize,
    pub writer: PartyId,
    pub reader: PartyId,
}

impl ChannelState {
    pub fn new(kind: ChannelKind, writer: PartyId, reader: PartyId) -> Self {
        ChannelState {
            kind,
            msg_script: Vec::new(),
            time_script: Vec::new(),
            write_cursor: 0,
            read_cursor: 0,
            writer,
            reader,
        }
    }

    /// True iff a receive would block.
    pub fn is_empty_for_reader(&self) -> bool {
        self.read_cursor >= self.write_cursor
    }
}

/// Whether a receive made progress or must wait for a send.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Progress {
    Stepped,
    Blocked,
}

/// Brings a fresh channel into scope, rejecting name collisions.
pub fn declare(world: &mut World, name: &str, channel: ChannelState) -> Result<(), RuntimeError> {
    if let ChannelKind::Int { range } = channel.kind {
        if range < 2 {
            return Err(RuntimeError::BadIntRange { range });
        }
    }
    if world.channels.contains_key(name) {
        return Err(RuntimeError::ChannelCollision { name: name.into() });
    }
    world.channels.insert(name.to_string(), channel);
    Ok(())
}

/// Removes a channel at scope exit.
pub fn remove(world: &mut World, name: &str) {
    world.channels.remove(name);
}

fn lookup<'w>(
    world: &'w mut World,
    name: &str,
    statement: &str,
    party: &PartyId,
    want_classical: bool,
    sending: bool,
) -> Result<&'w mut ChannelState, RuntimeError> {
    let ch = world
        .channels
        .get_mut(name)
        .ok_or_else(|| RuntimeError::UnknownChannel { name: name.into() })?;
    if ch.kind.is_classical() != want_classical {
        return Err(RuntimeError::KindMismatch {
            statement: statement.into(),
            name: name.into(),
            found: ch.kind.to_string(),
            expected: if want_classical { "classical" } else { "quantum" },
        });
    }
    let (endpoint, role) = if sending {
        (&ch.writer, "writer")
    } else {
        (&ch.reader, "reader")
    };
    if endpoint != party {
        return Err(RuntimeError::WrongEndpoint {
            statement: statement.into(),
            name: name.into(),
            party: party.to_string(),
            role,
        });
    }
    Ok(ch)
}

/// Appends `value` to the channel's scripts and charges the counters:
/// `c` by the kind's bit cost, `t` by one.
pub fn send_classical(
    world: &mut World,
    party: &PartyId,
    name: &str,
    value: i64,
    statement: &str,
) -> Result<(), RuntimeError> {
    let now = world.t;
    let ch = lookup(world, name, statement, party, true, true)?;
    if !ch.kind.admits(value) {
        return Err(RuntimeError::TypeViolation {
            statement: statement.into(),
            name: name.into(),
            value,
            kind: ch.kind.to_string(),
        });
    }
    let bits = ch.kind.bits_per_send();
    ch.msg_script.push(value);
    ch.time_script.push(now);
    ch.write_cursor += 1;
    world.c += bits;
    world.t += 1;
    Ok(())
}

/// Reads the next unconsumed message into `var`, or blocks if none exists.
pub fn recv_classical(
    world: &mut World,
    party: &PartyId,
    name: &str,
    var: &str,
    statement: &str,
) -> Result<Progress, RuntimeError> {
    let ch = lookup(world, name, statement, party, true, false)?;
    if ch.is_empty_for_reader() {
        return Ok(Progress::Blocked);
    }
    let value = ch.msg_script[ch.read_cursor];
    ch.read_cursor += 1;
    world.classical.insert(var.to_string(), value);
    Ok(Progress::Stepped)
}

/// Sends a qubit: ownership moves from the sender to the channel itself
/// (keeping the owner map total while the qubit is in transit), `q` and `t`
/// advance, and the register amplitudes are untouched.
pub fn send_quantum(
    world: &mut World,
    party: &PartyId,
    name: &str,
    qubit: usize,
    statement: &str,
) -> Result<(), RuntimeError> {
    let now = world.t;
    let qubits = world.qubits();
    if qubit >= qubits {
        return Err(crate::state::LinalgError::QubitOutOfRange { index: qubit, qubits }.into());
    }
    let owner = world.owner[qubit].clone();
    let ch = lookup(world, name, statement, party, false, true)?;
    if &owner != party {
        return Err(RuntimeError::Ownership {
            statement: statement.into(),
            qubit,
            owner: owner.to_string(),
            party: party.to_string(),
        });
    }
    ch.msg_script.push(qubit as i64);
    ch.time_script.push(now);
    ch.write_cursor += 1;
    world.owner[qubit] = PartyId::for_channel(name);
    world.q += 1;
    world.t += 1;
    Ok(())
}

/// Receives a qubit: the in-transit index must match the binder the program
/// names, and ownership passes to the receiver.
pub fn recv_quantum(
    world: &mut World,
    party: &PartyId,
    name: &str,
    binder: usize,
    statement: &str,
) -> Result<Progress, RuntimeError> {
    let ch = lookup(world, name, statement, party, false, false)?;
    if ch.is_empty_for_reader() {
        return Ok(Progress::Blocked);
    }
    let index = ch.msg_script[ch.read_cursor] as usize;
    ch.read_cursor += 1;
    if index != binder {
        return Err(RuntimeError::BinderMismatch {
            name: name.into(),
            got: index,
            expected: binder,
        });
    }
    world.owner[index] = party.clone();
    Ok(Progress::Stepped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::bell_pair;

    fn alice() -> PartyId {
        PartyId::new("Alice")
    }

    fn bob() -> PartyId {
        PartyId::new("Bob")
    }

    fn world_with_bit_channel() -> World {
        let mut w = World::new(bell_pair(), vec![alice(), bob()]).unwrap();
        declare(
            &mut w,
            "ch",
            ChannelState::new(ChannelKind::Bit, alice(), bob()),
        )
        .unwrap();
        w
    }

    fn world_with_qchannel() -> World {
        let mut w = World::new(bell_pair(), vec![alice(), bob()]).unwrap();
        declare(
            &mut w,
            "qc",
            ChannelState::new(ChannelKind::Quantum, alice(), bob()),
        )
        .unwrap();
        w
    }

    #[test]
    fn send_appends_and_counts() {
        let mut w = world_with_bit_channel();
        send_classical(&mut w, &alice(), "ch", 1, "s").unwrap();
        let ch = &w.channels["ch"];
        assert_eq!(ch.msg_script, vec![1]);
        assert_eq!(ch.time_script, vec![0]);
        assert_eq!(ch.write_cursor, 1);
        assert_eq!((w.c, w.q, w.t), (1, 0, 1));

        send_classical(&mut w, &alice(), "ch", 0, "s").unwrap();
        let ch = &w.channels["ch"];
        assert_eq!(ch.msg_script, vec![1, 0]);
        assert_eq!(ch.time_script, vec![0, 1]);
        assert_eq!(ch.write_cursor, 2);
        assert_eq!(w.c, 2);
    }

    #[test]
    fn bit_channel_rejects_non_bits() {
        let mut w = world_with_bit_channel();
        assert!(matches!(
            send_classical(&mut w, &alice(), "ch", 2, "s"),
            Err(RuntimeError::TypeViolation { .. })
        ));
    }

    #[test]
    fn endpoints_are_enforced() {
        let mut w = world_with_bit_channel();
        assert!(matches!(
            send_classical(&mut w, &bob(), "ch", 0, "s"),
            Err(RuntimeError::WrongEndpoint { role: "writer", .. })
        ));
        assert!(matches!(
            recv_classical(&mut w, &alice(), "ch", "x", "r"),
            Err(RuntimeError::WrongEndpoint { role: "reader", .. })
        ));
    }

    #[test]
    fn recv_reads_in_send_order_or_blocks() {
        let mut w = world_with_bit_channel();
        assert_eq!(
            recv_classical(&mut w, &bob(), "ch", "x", "r").unwrap(),
            Progress::Blocked
        );
        send_classical(&mut w, &alice(), "ch", 1, "s").unwrap();
        assert_eq!(
            recv_classical(&mut w, &bob(), "ch", "x", "r").unwrap(),
            Progress::Stepped
        );
        assert_eq!(w.var("x"), Some(1));
        let ch = &w.channels["ch"];
        assert!(ch.read_cursor <= ch.write_cursor);
        assert_eq!(ch.read_cursor, 1);
    }

    #[test]
    fn quantum_send_transfers_ownership_to_channel() {
        let mut w = world_with_qchannel();
        let before = w.state.clone();
        send_quantum(&mut w, &alice(), "qc", 0, "Alice: qsend qc q0").unwrap();
        assert_eq!(w.owner[0], PartyId::for_channel("qc"));
        assert_eq!((w.c, w.q, w.t), (0, 1, 1));
        assert!(w.state.approx_eq(&before, 0.0));
        assert!(w.owned_by(&alice()).is_empty());
    }

    #[test]
    fn quantum_send_requires_ownership() {
        let mut w = world_with_qchannel();
        send_quantum(&mut w, &alice(), "qc", 0, "first").unwrap();
        let err = send_quantum(&mut w, &alice(), "qc", 0, "second").unwrap_err();
        match err {
            RuntimeError::Ownership { statement, .. } => assert_eq!(statement, "second"),
            other => panic!("expected ownership error, got {other}"),
        }

        let mut w = world_with_qchannel();
        assert!(matches!(
            send_quantum(&mut w, &alice(), "qc", 1, "s"),
            Err(RuntimeError::Ownership { .. })
        ));
    }

    #[test]
    fn quantum_recv_transfers_to_receiver() {
        let mut w = world_with_qchannel();
        assert_eq!(
            recv_quantum(&mut w, &bob(), "qc", 0, "r").unwrap(),
            Progress::Blocked
        );
        send_quantum(&mut w, &alice(), "qc", 0, "s").unwrap();
        assert_eq!(
            recv_quantum(&mut w, &bob(), "qc", 0, "r").unwrap(),
            Progress::Stepped
        );
        assert_eq!(w.owner[0], bob());
        assert_eq!(w.owned_by(&bob()), vec![0, 1]);
    }

    #[test]
    fn quantum_recv_checks_binder() {
        let mut w = world_with_qchannel();
        send_quantum(&mut w, &alice(), "qc", 0, "s").unwrap();
        assert!(matches!(
            recv_quantum(&mut w, &bob(), "qc", 1, "r"),
            Err(RuntimeError::BinderMismatch {
                got: 0,
                expected: 1,
                ..
            })
        ));
    }

    #[test]
    fn declaration_rejects_collisions_and_tiny_ranges() {
        let mut w = world_with_bit_channel();
        assert!(matches!(
            declare(
                &mut w,
                "ch",
                ChannelState::new(ChannelKind::Bit, alice(), bob())
            ),
            Err(RuntimeError::ChannelCollision { .. })
        ));
        assert!(matches!(
            declare(
                &mut w,
                "i",
                ChannelState::new(ChannelKind::Int { range: 1 }, alice(), bob())
            ),
            Err(RuntimeError::BadIntRange { range: 1 })
        ));
    }

    #[test]
    fn int_channel_bit_cost() {
        assert_eq!(ChannelKind::Bit.bits_per_send(), 1);
        assert_eq!(ChannelKind::Int { range: 2 }.bits_per_send(), 1);
        assert_eq!(ChannelKind::Int { range: 3 }.bits_per_send(), 2);
        assert_eq!(ChannelKind::Int { range: 4 }.bits_per_send(), 2);
        assert_eq!(ChannelKind::Int { range: 5 }.bits_per_send(), 3);
        assert_eq!(ChannelKind::Quantum.bits_per_send(), 0);
    }

    #[test]
    fn scripts_stay_aligned() {
        let mut w = world_with_bit_channel();
        for v in [0, 1, 1] {
            send_classical(&mut w, &alice(), "ch", v, "s").unwrap();
        }
        let ch = &w.channels["ch"];
        assert_eq!(ch.msg_script.len(), ch.time_script.len());
        assert_eq!(ch.write_cursor, ch.msg_script.len());
        assert_eq!(ch.time_script, vec![0, 1, 2]);
    }
}
