//! State vectors over the computational basis.
//!
//! An `n`-qubit register is a normalized vector of `2^n` complex amplitudes.
//! Qubit 0 is the most significant bit of a basis index, so for an `m`-qubit
//! state tensored with an `n`-qubit state the combined amplitude at index `i`
//! is `left(i div 2^n) * right(i mod 2^n)`.

use num_complex::Complex64;
use thiserror::Error;

/// Complex amplitude, double precision.
pub type Amplitude = Complex64;

/// Normalization tolerance for state vectors.
pub const EPS_NORM: f64 = 1e-9;

/// Entrywise tolerance for exact algebraic identities.
pub const EPS_EXACT: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("basis label {label} out of range for {qubits} qubit(s)")]
    LabelOutOfRange { label: usize, qubits: usize },

    #[error("qubit count must be at least 1")]
    EmptyRegister,

    #[error("amplitude vector has length {len}, expected {expected}")]
    BadLength { len: usize, expected: usize },

    #[error("state vector norm² is {norm_sq}, not 1")]
    NotNormalized { norm_sq: f64 },

    #[error("non-finite amplitude at index {index}")]
    NonFinite { index: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("qubit index {index} out of range for {qubits} qubit(s)")]
    QubitOutOfRange { index: usize, qubits: usize },

    #[error("duplicate target qubit {index}")]
    DuplicateTarget { index: usize },

    #[error("operator is not unitary (max deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("target count {targets} does not match operator arity {arity}")]
    TargetArity { targets: usize, arity: usize },
}

/// A normalized pure state of an `n`-qubit register.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    qubits: usize,
    amps: Vec<Amplitude>,
}

impl StateVector {
    /// Builds a state from raw amplitudes, validating length, finiteness and
    /// normalization (within [`EPS_NORM`]).
    pub fn new(qubits: usize, amps: Vec<Amplitude>) -> Result<Self, LinalgError> {
        if qubits == 0 {
            return Err(LinalgError::EmptyRegister);
        }
        let expected = 1usize << qubits;
        if amps.len() != expected {
            return Err(LinalgError::BadLength {
                len: amps.len(),
                expected,
            });
        }
        for (index, a) in amps.iter().enumerate() {
            if !a.re.is_finite() || !a.im.is_finite() {
                return Err(LinalgError::NonFinite { index });
            }
        }
        let norm_sq: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm_sq - 1.0).abs() > EPS_NORM {
            return Err(LinalgError::NotNormalized { norm_sq });
        }
        Ok(Self { qubits, amps })
    }

    /// Computational basis ket `|x⟩`: amplitude 1 at index `x`, 0 elsewhere.
    pub fn ket(label: usize, qubits: usize) -> Result<Self, LinalgError> {
        if qubits == 0 {
            return Err(LinalgError::EmptyRegister);
        }
        let dim = 1usize << qubits;
        if label >= dim {
            return Err(LinalgError::LabelOutOfRange { label, qubits });
        }
        let mut amps = vec![Amplitude::ZERO; dim];
        amps[label] = Amplitude::ONE;
        Ok(Self { qubits, amps })
    }

    /// All-zeros basis state `|0…0⟩`.
    pub fn zeros(qubits: usize) -> Result<Self, LinalgError> {
        Self::ket(0, qubits)
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Amplitude] {
        &self.amps
    }

    pub fn amplitude(&self, index: usize) -> Amplitude {
        self.amps[index]
    }

    /// `⟨self|other⟩ = Σ_x self(x)* · other(x)`.
    pub fn inner_product(&self, other: &Self) -> Result<Amplitude, LinalgError> {
        if self.dim() != other.dim() {
            return Err(LinalgError::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Tensor product; `self` supplies the high bits of the combined index.
    pub fn tensor(&self, other: &Self) -> Self {
        let dim_r = other.dim();
        let mut amps = Vec::with_capacity(self.dim() * dim_r);
        for i in 0..self.dim() * dim_r {
            amps.push(self.amps[i / dim_r] * other.amps[i % dim_r]);
        }
        Self {
            qubits: self.qubits + other.qubits,
            amps,
        }
    }

    /// Largest entrywise distance to `other`. Errors on dimension mismatch.
    pub fn max_diff(&self, other: &Self) -> Result<f64, LinalgError> {
        if self.dim() != other.dim() {
            return Err(LinalgError::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Entrywise equality within `tol`.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.max_diff(other).map(|d| d <= tol).unwrap_or(false)
    }

    /// Entrywise equality within `tol` after removing a global phase: the
    /// phase is read off at this state's largest-magnitude amplitude.
    pub fn approx_eq_up_to_phase(&self, other: &Self, tol: f64) -> bool {
        if self.dim() != other.dim() {
            return false;
        }
        let pivot = (0..self.dim())
            .max_by(|&a, &b| {
                self.amps[a]
                    .norm_sqr()
                    .partial_cmp(&self.amps[b].norm_sqr())
                    .expect("finite amplitudes")
            })
            .expect("nonempty state");
        let denom = self.amps[pivot];
        let numer = other.amplitude(pivot);
        if numer.norm() <= tol {
            return false;
        }
        let phase = numer / denom;
        let phase = phase / phase.norm();
        self.amps
            .iter()
            .zip(&other.amps)
            .all(|(a, b)| (a * phase - b).norm() <= tol)
    }

    pub fn norm_sq(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Value of qubit `i` in basis index `x`; qubit 0 is the most significant bit.
    pub fn bit_of(x: usize, qubit: usize, qubits: usize) -> usize {
        (x >> (qubits - 1 - qubit)) & 1
    }
}

/// The uniform two-qubit entangled state `(|00⟩ + |11⟩)/√2`.
pub fn bell_pair() -> StateVector {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    StateVector::new(
        2,
        vec![
            Amplitude::new(h, 0.0),
            Amplitude::ZERO,
            Amplitude::ZERO,
            Amplitude::new(h, 0.0),
        ],
    )
    .expect("bell pair is normalized")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Amplitude, re: f64, im: f64) -> bool {
        (a.re - re).abs() <= 1e-12 && (a.im - im).abs() <= 1e-12
    }

    #[test]
    fn ket_places_unit_amplitude() {
        let k = StateVector::ket(0, 1).unwrap();
        assert!(close(k.amplitude(0), 1.0, 0.0));
        assert!(close(k.amplitude(1), 0.0, 0.0));

        let k = StateVector::ket(2, 2).unwrap();
        assert_eq!(
            k.amplitudes()
                .iter()
                .map(|a| a.re as i64)
                .collect::<Vec<_>>(),
            vec![0, 0, 1, 0]
        );

        let k = StateVector::ket(3, 2).unwrap();
        assert_eq!(
            k.amplitudes()
                .iter()
                .map(|a| a.re as i64)
                .collect::<Vec<_>>(),
            vec![0, 0, 0, 1]
        );
    }

    #[test]
    fn ket_rejects_out_of_range_label() {
        assert!(matches!(
            StateVector::ket(4, 2),
            Err(LinalgError::LabelOutOfRange { .. })
        ));
        assert!(matches!(
            StateVector::ket(0, 0),
            Err(LinalgError::EmptyRegister)
        ));
    }

    #[test]
    fn tensor_of_basis_kets() {
        let zero = StateVector::ket(0, 1).unwrap();
        let one = StateVector::ket(1, 1).unwrap();
        let zo = zero.tensor(&one);
        assert_eq!(zo.qubits(), 2);
        assert!(close(zo.amplitude(1), 1.0, 0.0));
        assert_eq!(zo, StateVector::ket(1, 2).unwrap());
    }

    #[test]
    fn tensor_distributes_superposition_on_left() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = StateVector::new(1, vec![Amplitude::new(h, 0.0); 2]).unwrap();
        let zero = StateVector::ket(0, 1).unwrap();

        // (|0⟩+|1⟩)/√2 ⊗ |0⟩ = (|00⟩+|10⟩)/√2
        let t = plus.tensor(&zero);
        assert!(close(t.amplitude(0), h, 0.0));
        assert!(close(t.amplitude(1), 0.0, 0.0));
        assert!(close(t.amplitude(2), h, 0.0));
        assert!(close(t.amplitude(3), 0.0, 0.0));

        // |0⟩ ⊗ (|0⟩+|1⟩)/√2 = (1/√2, 1/√2, 0, 0)
        let t = zero.tensor(&plus);
        assert!(close(t.amplitude(0), h, 0.0));
        assert!(close(t.amplitude(1), h, 0.0));
        assert!(close(t.amplitude(2), 0.0, 0.0));
        assert!(close(t.amplitude(3), 0.0, 0.0));
    }

    #[test]
    fn inner_product_orthonormality() {
        let zero = StateVector::ket(0, 1).unwrap();
        let one = StateVector::ket(1, 1).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = StateVector::new(1, vec![Amplitude::new(h, 0.0); 2]).unwrap();

        assert!(close(zero.inner_product(&zero).unwrap(), 1.0, 0.0));
        assert!(close(zero.inner_product(&one).unwrap(), 0.0, 0.0));
        assert!(close(plus.inner_product(&zero).unwrap(), h, 0.0));
    }

    #[test]
    fn inner_product_rejects_dimension_mismatch() {
        let a = StateVector::ket(0, 1).unwrap();
        let b = StateVector::ket(0, 2).unwrap();
        assert!(matches!(
            a.inner_product(&b),
            Err(LinalgError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn constructor_validates_norm_and_finiteness() {
        let bad = StateVector::new(1, vec![Amplitude::new(0.5, 0.0), Amplitude::ZERO]);
        assert!(matches!(bad, Err(LinalgError::NotNormalized { .. })));

        let nan = StateVector::new(1, vec![Amplitude::new(f64::NAN, 0.0), Amplitude::ONE]);
        assert!(matches!(nan, Err(LinalgError::NonFinite { .. })));

        let short = StateVector::new(2, vec![Amplitude::ONE]);
        assert!(matches!(short, Err(LinalgError::BadLength { .. })));
    }

    #[test]
    fn bell_pair_is_normalized() {
        let b = bell_pair();
        assert!((b.norm_sq() - 1.0).abs() < 1e-15);
        assert!(close(b.amplitude(0), std::f64::consts::FRAC_1_SQRT_2, 0.0));
        assert!(close(b.amplitude(3), std::f64::consts::FRAC_1_SQRT_2, 0.0));
    }
}
