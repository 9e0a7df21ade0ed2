//! Random generators shared by unit tests: Haar-ish unitaries via
//! Gram–Schmidt and uniformly drawn normalized states.

use crate::operator::Operator;
use crate::state::{Amplitude, StateVector};
use rand::Rng;

fn random_amplitude<R: Rng>(rng: &mut R) -> Amplitude {
    Amplitude::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

/// A random normalized state on `qubits` qubits.
pub fn random_state<R: Rng>(rng: &mut R, qubits: usize) -> StateVector {
    let dim = 1usize << qubits;
    loop {
        let amps: Vec<Amplitude> = (0..dim).map(|_| random_amplitude(rng)).collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-6 {
            continue;
        }
        let amps = amps.into_iter().map(|a| a / norm).collect();
        return StateVector::new(qubits, amps).expect("normalized by construction");
    }
}

/// A random unitary on `qubits` qubits: Gram–Schmidt applied to a random
/// complex matrix, retried on near-singular draws.
pub fn random_unitary<R: Rng>(rng: &mut R, qubits: usize) -> Operator {
    let dim = 1usize << qubits;
    'draw: loop {
        let mut columns: Vec<Vec<Amplitude>> = Vec::with_capacity(dim);
        for _ in 0..dim {
            let mut col: Vec<Amplitude> = (0..dim).map(|_| random_amplitude(rng)).collect();
            for prev in &columns {
                // col -= ⟨prev|col⟩ prev
                let overlap: Amplitude = prev
                    .iter()
                    .zip(&col)
                    .map(|(p, c)| p.conj() * c)
                    .sum();
                for (c, p) in col.iter_mut().zip(prev) {
                    *c -= overlap * p;
                }
            }
            let norm = col.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            if norm < 1e-6 {
                continue 'draw;
            }
            for c in col.iter_mut() {
                *c /= norm;
            }
            columns.push(col);
        }
        let mut entries = vec![Amplitude::ZERO; dim * dim];
        for (c, col) in columns.iter().enumerate() {
            for (r, value) in col.iter().enumerate() {
                entries[r * dim + c] = *value;
            }
        }
        return Operator::new(qubits, entries).expect("finite entries");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_unitaries_are_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for qubits in 1..=3 {
            for _ in 0..10 {
                assert!(random_unitary(&mut rng, qubits).is_unitary(1e-9));
            }
        }
    }

    #[test]
    fn random_states_are_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for qubits in 1..=3 {
            for _ in 0..10 {
                let s = random_state(&mut rng, qubits);
                assert!((s.norm_sq() - 1.0).abs() < 1e-9);
            }
        }
    }
}
