//! Dense operators on small qubit registers and the fixed gate library.

use crate::state::{Amplitude, LinalgError, StateVector, EPS_NORM};
use std::fmt;

/// Unitarity tolerance: `U†U` must match the identity entrywise within this.
pub const EPS_UNITARY: f64 = 1e-9;

/// The built-in single- and two-qubit gates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateId {
    I,
    X,
    Y,
    Z,
    H,
    Cnot,
}

impl GateId {
    pub const ALL: [GateId; 6] = [
        GateId::I,
        GateId::X,
        GateId::Y,
        GateId::Z,
        GateId::H,
        GateId::Cnot,
    ];

    /// Number of qubits the gate acts on.
    pub fn arity(&self) -> usize {
        match self {
            GateId::Cnot => 2,
            _ => 1,
        }
    }

    /// The gate's matrix.
    pub fn matrix(&self) -> Operator {
        let z = Amplitude::ZERO;
        let o = Amplitude::ONE;
        let i = Amplitude::I;
        let h = Amplitude::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        match self {
            GateId::I => Operator::from_rows(1, vec![vec![o, z], vec![z, o]]),
            GateId::X => Operator::from_rows(1, vec![vec![z, o], vec![o, z]]),
            GateId::Y => Operator::from_rows(1, vec![vec![z, -i], vec![i, z]]),
            GateId::Z => Operator::from_rows(1, vec![vec![o, z], vec![z, -o]]),
            GateId::H => Operator::from_rows(1, vec![vec![h, h], vec![h, -h]]),
            // Control is qubit 0 (the high bit), target is qubit 1.
            GateId::Cnot => Operator::from_rows(
                2,
                vec![
                    vec![o, z, z, z],
                    vec![z, o, z, z],
                    vec![z, z, z, o],
                    vec![z, z, o, z],
                ],
            ),
        }
    }

    pub fn parse(name: &str) -> Option<GateId> {
        match name {
            "I" => Some(GateId::I),
            "X" => Some(GateId::X),
            "Y" => Some(GateId::Y),
            "Z" => Some(GateId::Z),
            "H" => Some(GateId::H),
            "CNOT" => Some(GateId::Cnot),
            _ => None,
        }
    }
}

impl fmt::Display for GateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            GateId::I => "I",
            GateId::X => "X",
            GateId::Y => "Y",
            GateId::Z => "Z",
            GateId::H => "H",
            GateId::Cnot => "CNOT",
        };
        f.write_str(name)
    }
}

/// A dense `2^n × 2^n` complex matrix; row = output basis index, column =
/// input basis index.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    qubits: usize,
    entries: Vec<Amplitude>, // row-major
}

impl Operator {
    fn from_rows(qubits: usize, rows: Vec<Vec<Amplitude>>) -> Self {
        let entries = rows.into_iter().flatten().collect();
        Self { qubits, entries }
    }

    /// Builds an operator from row-major entries, validating shape and finiteness.
    pub fn new(qubits: usize, entries: Vec<Amplitude>) -> Result<Self, LinalgError> {
        if qubits == 0 {
            return Err(LinalgError::EmptyRegister);
        }
        let dim = 1usize << qubits;
        if entries.len() != dim * dim {
            return Err(LinalgError::BadLength {
                len: entries.len(),
                expected: dim * dim,
            });
        }
        for (index, a) in entries.iter().enumerate() {
            if !a.re.is_finite() || !a.im.is_finite() {
                return Err(LinalgError::NonFinite { index });
            }
        }
        Ok(Self { qubits, entries })
    }

    /// The identity on `qubits` qubits.
    pub fn identity(qubits: usize) -> Self {
        let dim = 1usize << qubits;
        let mut entries = vec![Amplitude::ZERO; dim * dim];
        for k in 0..dim {
            entries[k * dim + k] = Amplitude::ONE;
        }
        Self { qubits, entries }
    }

    /// Rank-one projector `|ψ⟩⟨φ|`.
    pub fn outer_product(ket: &StateVector, bra: &StateVector) -> Self {
        let dim = ket.dim();
        debug_assert_eq!(dim, bra.dim());
        let mut entries = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                entries.push(ket.amplitude(r) * bra.amplitude(c).conj());
            }
        }
        Self {
            qubits: ket.qubits(),
            entries,
        }
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn dim(&self) -> usize {
        1usize << self.qubits
    }

    pub fn entry(&self, row: usize, col: usize) -> Amplitude {
        self.entries[row * self.dim() + col]
    }

    /// Kronecker product; `self` acts on the high-order qubits.
    pub fn tensor(&self, other: &Self) -> Self {
        let (da, db) = (self.dim(), other.dim());
        let dim = da * db;
        let mut entries = vec![Amplitude::ZERO; dim * dim];
        for ra in 0..da {
            for ca in 0..da {
                let factor = self.entry(ra, ca);
                if factor == Amplitude::ZERO {
                    continue;
                }
                for rb in 0..db {
                    for cb in 0..db {
                        entries[(ra * db + rb) * dim + (ca * db + cb)] =
                            factor * other.entry(rb, cb);
                    }
                }
            }
        }
        Self {
            qubits: self.qubits + other.qubits,
            entries,
        }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let dim = self.dim();
        let mut entries = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                entries.push(self.entry(c, r).conj());
            }
        }
        Self {
            qubits: self.qubits,
            entries,
        }
    }

    /// Matrix product `self · other`.
    pub fn matmul(&self, other: &Self) -> Result<Self, LinalgError> {
        if self.dim() != other.dim() {
            return Err(LinalgError::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        let dim = self.dim();
        let mut entries = vec![Amplitude::ZERO; dim * dim];
        for r in 0..dim {
            for k in 0..dim {
                let a = self.entry(r, k);
                if a == Amplitude::ZERO {
                    continue;
                }
                for c in 0..dim {
                    entries[r * dim + c] += a * other.entry(k, c);
                }
            }
        }
        Ok(Self {
            qubits: self.qubits,
            entries,
        })
    }

    /// True iff `‖A†A − I‖_max ≤ tol`.
    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_deviation() <= tol
    }

    fn unitarity_deviation(&self) -> f64 {
        let product = self.adjoint().matmul(self).expect("same dimension");
        let dim = self.dim();
        let mut worst = 0.0f64;
        for r in 0..dim {
            for c in 0..dim {
                let expected = if r == c {
                    Amplitude::ONE
                } else {
                    Amplitude::ZERO
                };
                worst = worst.max((product.entry(r, c) - expected).norm());
            }
        }
        worst
    }

    /// Applies a unitary to a state: rejects non-unitary operators (within
    /// [`EPS_UNITARY`]) and renormalization failures.
    pub fn apply(&self, state: &StateVector) -> Result<StateVector, LinalgError> {
        let deviation = self.unitarity_deviation();
        if deviation > EPS_UNITARY {
            return Err(LinalgError::NotUnitary { deviation });
        }
        let out = self.apply_unchecked(state)?;
        let norm_sq = out.iter().map(|a| a.norm_sqr()).sum::<f64>();
        if (norm_sq - 1.0).abs() > EPS_NORM {
            return Err(LinalgError::NotNormalized { norm_sq });
        }
        StateVector::new(state.qubits(), out)
    }

    /// Raw matrix-vector product without the unitarity or normalization
    /// checks. Measurement operators are generally non-unitary and go
    /// through here.
    pub fn apply_unchecked(&self, state: &StateVector) -> Result<Vec<Amplitude>, LinalgError> {
        if self.dim() != state.dim() {
            return Err(LinalgError::DimensionMismatch {
                left: self.dim(),
                right: state.dim(),
            });
        }
        let dim = self.dim();
        let mut out = vec![Amplitude::ZERO; dim];
        for (r, slot) in out.iter_mut().enumerate() {
            let mut acc = Amplitude::ZERO;
            for c in 0..dim {
                acc += self.entry(r, c) * state.amplitude(c);
            }
            *slot = acc;
        }
        Ok(out)
    }

    /// Largest entrywise distance to `other`.
    pub fn max_diff(&self, other: &Self) -> Result<f64, LinalgError> {
        if self.dim() != other.dim() {
            return Err(LinalgError::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.max_diff(other).map(|d| d <= tol).unwrap_or(false)
    }
}

/// Lifts a single-qubit operator to qubit `target` of an `n`-qubit register:
/// `I^⊗target ⊗ U ⊗ I^⊗(n−target−1)`.
pub fn lift(gate: &Operator, target: usize, qubits: usize) -> Result<Operator, LinalgError> {
    if gate.qubits() != 1 {
        return Err(LinalgError::TargetArity {
            targets: 1,
            arity: gate.qubits(),
        });
    }
    if target >= qubits {
        return Err(LinalgError::QubitOutOfRange {
            index: target,
            qubits,
        });
    }
    let mut result = if target == 0 {
        gate.clone()
    } else {
        Operator::identity(target).tensor(gate)
    };
    let trailing = qubits - target - 1;
    if trailing > 0 {
        result = result.tensor(&Operator::identity(trailing));
    }
    Ok(result)
}

/// Embeds a `k`-qubit operator onto the listed target qubits of an `n`-qubit
/// register, identity elsewhere. Qubit `j` of the operator acts on
/// `targets[j]`; the targets need not be adjacent or ordered. Works by
/// permuting basis-index bits rather than synthesizing swap networks.
pub fn embed(gate: &Operator, targets: &[usize], qubits: usize) -> Result<Operator, LinalgError> {
    let k = gate.qubits();
    if targets.len() != k {
        return Err(LinalgError::TargetArity {
            targets: targets.len(),
            arity: k,
        });
    }
    for (pos, &t) in targets.iter().enumerate() {
        if t >= qubits {
            return Err(LinalgError::QubitOutOfRange { index: t, qubits });
        }
        if targets[..pos].contains(&t) {
            return Err(LinalgError::DuplicateTarget { index: t });
        }
    }
    let dim = 1usize << qubits;
    let sub_dim = 1usize << k;
    let mut entries = vec![Amplitude::ZERO; dim * dim];
    for col in 0..dim {
        let sub_in = extract_bits(col, targets, qubits);
        for sub_out in 0..sub_dim {
            let value = gate.entry(sub_out, sub_in);
            if value == Amplitude::ZERO {
                continue;
            }
            let row = replace_bits(col, sub_out, targets, qubits);
            entries[row * dim + col] = value;
        }
    }
    Operator::new(qubits, entries)
}

/// Reads the bits of `index` at the target positions, first target as the
/// most significant bit of the result.
pub(crate) fn extract_bits(index: usize, targets: &[usize], qubits: usize) -> usize {
    let k = targets.len();
    let mut out = 0usize;
    for (j, &t) in targets.iter().enumerate() {
        let bit = (index >> (qubits - 1 - t)) & 1;
        out |= bit << (k - 1 - j);
    }
    out
}

/// Writes the bits of `value` into `index` at the target positions.
pub(crate) fn replace_bits(index: usize, value: usize, targets: &[usize], qubits: usize) -> usize {
    let k = targets.len();
    let mut out = index;
    for (j, &t) in targets.iter().enumerate() {
        let shift = qubits - 1 - t;
        let bit = (value >> (k - 1 - j)) & 1;
        out = (out & !(1 << shift)) | (bit << shift);
    }
    out
}
