//! Measurement semantics: general operator collections, orthonormal bases,
//! the computational basis, and subset measurement. Each returns the explicit
//! list of outcome branches.

use crate::operator::{extract_bits, Operator};
use crate::state::{Amplitude, LinalgError, StateVector, EPS_NORM};
use thiserror::Error;

/// Branches with probability below this are pruned as numerical zeros. Losing
/// more than this much total mass is an error rather than a silent rescale.
pub const EPS_PRUNE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("measurement collection incomplete: ΣM†M deviates from identity by {deviation:.3e}")]
    Incomplete { deviation: f64 },
    #[error("basis is not orthonormal: worst Gram deviation {deviation:.3e}")]
    NotOrthonormal { deviation: f64 },
    #[error("duplicate outcome label {label}")]
    DuplicateLabel { label: usize },
    #[error("pruned branches carried total probability {lost:.3e} (threshold {threshold:.0e})")]
    ProbabilityLoss { lost: f64, threshold: f64 },
    #[error("basis has {got} vectors, expected {expected}")]
    BadBasisSize { got: usize, expected: usize },
}

/// A labeled collection of measurement operators `{M_r}`. A full collection
/// has one operator per basis label, but any labeled subset is accepted as
/// long as it satisfies the completeness equation.
#[derive(Debug, Clone)]
pub struct MeasurementCollection {
    qubits: usize,
    ops: Vec<(usize, Operator)>,
}

impl MeasurementCollection {
    pub fn new(qubits: usize, ops: Vec<(usize, Operator)>) -> Result<Self, MeasureError> {
        if qubits == 0 || ops.is_empty() {
            return Err(LinalgError::EmptyRegister.into());
        }
        for (pos, (label, op)) in ops.iter().enumerate() {
            if op.qubits() != qubits {
                return Err(LinalgError::DimensionMismatch {
                    left: op.dim(),
                    right: 1 << qubits,
                }
                .into());
            }
            if ops[..pos].iter().any(|(l, _)| l == label) {
                return Err(MeasureError::DuplicateLabel { label: *label });
            }
        }
        Ok(Self { qubits, ops })
    }

    /// Operators `M_0 … M_{k−1}` labeled by their position.
    pub fn from_ops(ops: Vec<Operator>) -> Result<Self, MeasureError> {
        let qubits = ops.first().map(Operator::qubits).unwrap_or(0);
        Self::new(qubits, ops.into_iter().enumerate().collect())
    }

    /// The projectors `{|r⟩⟨r|}` onto the computational basis.
    pub fn computational_projectors(qubits: usize) -> Self {
        let dim = 1usize << qubits;
        let ops = (0..dim)
            .map(|r| {
                let ket = StateVector::ket(r, qubits).expect("label in range");
                (r, Operator::outer_product(&ket, &ket))
            })
            .collect();
        Self { qubits, ops }
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn ops(&self) -> &[(usize, Operator)] {
        &self.ops
    }

    /// Composite collection `{M_p ⊗ N_q}` labeled by the concatenated bit
    /// string `pq`.
    pub fn tensor(&self, other: &Self) -> Self {
        let mut ops = Vec::with_capacity(self.ops.len() * other.ops.len());
        for (lp, mp) in &self.ops {
            for (lq, mq) in &other.ops {
                ops.push(((lp << other.qubits) | lq, mp.tensor(mq)));
            }
        }
        Self {
            qubits: self.qubits + other.qubits,
            ops,
        }
    }

    /// Max-norm distance of `Σ_m M_m†M_m` from the identity.
    pub fn completeness_deviation(&self) -> f64 {
        let dim = 1usize << self.qubits;
        let mut sum = vec![Amplitude::ZERO; dim * dim];
        for (_, op) in &self.ops {
            let term = op.adjoint().matmul(op).expect("same dimension");
            for r in 0..dim {
                for c in 0..dim {
                    sum[r * dim + c] += term.entry(r, c);
                }
            }
        }
        let mut worst = 0.0f64;
        for r in 0..dim {
            for c in 0..dim {
                let expected = if r == c {
                    Amplitude::ONE
                } else {
                    Amplitude::ZERO
                };
                worst = worst.max((sum[r * dim + c] - expected).norm());
            }
        }
        worst
    }

    /// True iff the completeness equation holds within `eps`.
    pub fn check_completeness(&self, eps: f64) -> bool {
        self.completeness_deviation() <= eps
    }
}

/// An orthonormal basis `b_0 … b_{2^n−1}` of an `n`-qubit system.
#[derive(Debug, Clone)]
pub struct Basis {
    qubits: usize,
    vectors: Vec<StateVector>,
}

impl Basis {
    pub fn new(qubits: usize, vectors: Vec<StateVector>) -> Result<Self, MeasureError> {
        let expected = 1usize << qubits;
        if vectors.len() != expected {
            return Err(MeasureError::BadBasisSize {
                got: vectors.len(),
                expected,
            });
        }
        for v in &vectors {
            if v.qubits() != qubits {
                return Err(LinalgError::DimensionMismatch {
                    left: v.dim(),
                    right: expected,
                }
                .into());
            }
        }
        Ok(Self { qubits, vectors })
    }

    pub fn computational(qubits: usize) -> Self {
        let dim = 1usize << qubits;
        let vectors = (0..dim)
            .map(|r| StateVector::ket(r, qubits).expect("label in range"))
            .collect();
        Self { qubits, vectors }
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn vectors(&self) -> &[StateVector] {
        &self.vectors
    }

    /// Worst deviation of `⟨b_i|b_j⟩` from `δ_ij`.
    pub fn orthonormality_deviation(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, bi) in self.vectors.iter().enumerate() {
            for (j, bj) in self.vectors.iter().enumerate() {
                let inner = bi.inner_product(bj).expect("same dimension");
                let expected = if i == j { Amplitude::ONE } else { Amplitude::ZERO };
                worst = worst.max((inner - expected).norm());
            }
        }
        worst
    }

    pub fn is_orthonormal(&self, eps: f64) -> bool {
        self.orthonormality_deviation() <= eps
    }
}

/// One measurement outcome: the measured value, its probability, and the
/// collapsed state.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub outcome: usize,
    pub prob: f64,
    pub post_state: StateVector,
}

/// Drops numerically-zero branches, erroring if they carried real mass.
fn prune(raw: Vec<(usize, f64, Option<StateVector>)>) -> Result<Vec<Branch>, MeasureError> {
    let mut kept = Vec::new();
    let mut lost = 0.0f64;
    for (outcome, prob, post) in raw {
        if prob < EPS_PRUNE {
            lost += prob;
            continue;
        }
        let post_state = post.expect("non-pruned branch carries a state");
        kept.push(Branch {
            outcome,
            prob,
            post_state,
        });
    }
    if lost > EPS_PRUNE {
        return Err(MeasureError::ProbabilityLoss {
            lost,
            threshold: EPS_PRUNE,
        });
    }
    Ok(kept)
}

/// Measures `ψ` with the operator collection `M`: outcome `r` occurs with
/// probability `⟨ψ|M_r†M_rψ⟩` and leaves `M_rψ` renormalized.
pub fn measure_general(
    collection: &MeasurementCollection,
    psi: &StateVector,
) -> Result<Vec<Branch>, MeasureError> {
    let deviation = collection.completeness_deviation();
    if deviation > EPS_NORM {
        return Err(MeasureError::Incomplete { deviation });
    }
    if collection.qubits() != psi.qubits() {
        return Err(LinalgError::DimensionMismatch {
            left: 1 << collection.qubits(),
            right: psi.dim(),
        }
        .into());
    }
    let mut raw = Vec::with_capacity(collection.ops().len());
    for (label, op) in collection.ops() {
        let image = op.apply_unchecked(psi)?;
        let prob: f64 = image.iter().map(|a| a.norm_sqr()).sum();
        let post = if prob >= EPS_PRUNE {
            let scale = prob.sqrt();
            let amps = image.into_iter().map(|a| a / scale).collect();
            Some(StateVector::new(psi.qubits(), amps)?)
        } else {
            None
        };
        raw.push((*label, prob, post));
    }
    prune(raw)
}

/// Measures `ψ` in the orthonormal basis `B`: outcome `r` occurs with
/// probability `|⟨b_r|ψ⟩|²` and leaves `b_r`.
pub fn measure_basis(basis: &Basis, psi: &StateVector) -> Result<Vec<Branch>, MeasureError> {
    let deviation = basis.orthonormality_deviation();
    if deviation > EPS_NORM {
        return Err(MeasureError::NotOrthonormal { deviation });
    }
    if basis.qubits() != psi.qubits() {
        return Err(LinalgError::DimensionMismatch {
            left: 1 << basis.qubits(),
            right: psi.dim(),
        }
        .into());
    }
    let raw = basis
        .vectors()
        .iter()
        .enumerate()
        .map(|(r, b)| {
            let prob = b.inner_product(psi).expect("same dimension").norm_sqr();
            (r, prob, Some(b.clone()))
        })
        .collect();
    prune(raw)
}

/// Measures `ψ` in the computational basis: outcome `r` occurs with
/// probability `|ψ(r)|²` and leaves `|r⟩`.
pub fn measure_computational(psi: &StateVector) -> Result<Vec<Branch>, MeasureError> {
    let raw = (0..psi.dim())
        .map(|r| {
            let prob = psi.amplitude(r).norm_sqr();
            let post = StateVector::ket(r, psi.qubits()).expect("label in range");
            (r, prob, Some(post))
        })
        .collect();
    prune(raw)
}

/// Measures only the listed qubits in the computational basis. The outcome
/// encodes the measured bits in target order, first target as the most
/// significant bit; unmeasured qubits keep their (renormalized) amplitudes.
pub fn measure_subset(
    psi: &StateVector,
    targets: &[usize],
) -> Result<Vec<Branch>, MeasureError> {
    let qubits = psi.qubits();
    for (pos, &t) in targets.iter().enumerate() {
        if t >= qubits {
            return Err(LinalgError::QubitOutOfRange { index: t, qubits }.into());
        }
        if targets[..pos].contains(&t) {
            return Err(LinalgError::DuplicateTarget { index: t }.into());
        }
    }
    let outcomes = 1usize << targets.len();
    let mut raw = Vec::with_capacity(outcomes);
    for outcome in 0..outcomes {
        let mut prob = 0.0f64;
        let mut amps = vec![Amplitude::ZERO; psi.dim()];
        for (x, slot) in amps.iter_mut().enumerate() {
            if extract_bits(x, targets, qubits) == outcome {
                let a = psi.amplitude(x);
                prob += a.norm_sqr();
                *slot = a;
            }
        }
        let post = if prob >= EPS_PRUNE {
            let scale = prob.sqrt();
            for a in amps.iter_mut() {
                *a /= scale;
            }
            Some(StateVector::new(qubits, amps)?)
        } else {
            None
        };
        raw.push((outcome, prob, post));
    }
    prune(raw)
}
