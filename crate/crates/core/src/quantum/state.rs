use nalgebra::Matrix2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{QuantumError, C64, NORM_TOLERANCE};

/// Measurement / preparation basis.
///
/// Bit 0 is the +1 eigenstate of the corresponding Pauli operator, bit 1 the
/// −1 eigenstate: Z → |0⟩, |1⟩; X → |+⟩, |−⟩; Y → |+i⟩, |−i⟩.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    Z,
    X,
    Y,
}

impl Basis {
    pub const ALL: [Basis; 3] = [Basis::Z, Basis::X, Basis::Y];

    /// Amplitudes of the eigenstate encoding `bit` in this basis.
    pub fn eigenstate(self, bit: u8) -> [C64; 2] {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let sign = if bit == 0 { 1.0 } else { -1.0 };
        match self {
            Basis::Z if bit == 0 => [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
            Basis::Z => [C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
            Basis::X => [C64::new(s, 0.0), C64::new(sign * s, 0.0)],
            Basis::Y => [C64::new(s, 0.0), C64::new(0.0, sign * s)],
        }
    }

    /// Uniformly random choice between Z and X, the two bases used by the
    /// DL04 family.
    pub fn random_zx<R: Rng + ?Sized>(rng: &mut R) -> Basis {
        if rng.random_bool(0.5) {
            Basis::X
        } else {
            Basis::Z
        }
    }
}

/// Single-qubit Pauli operations. `IY` is the encoding operation iσ_y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PauliOp {
    I,
    X,
    Y,
    Z,
    IY,
}

impl PauliOp {
    pub fn matrix(self) -> Matrix2<C64> {
        let o = C64::new(0.0, 0.0);
        let l = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        match self {
            PauliOp::I => Matrix2::new(l, o, o, l),
            PauliOp::X => Matrix2::new(o, l, l, o),
            PauliOp::Y => Matrix2::new(o, -i, i, o),
            PauliOp::Z => Matrix2::new(l, o, o, -l),
            PauliOp::IY => Matrix2::new(o, l, -l, o),
        }
    }

    /// Whether the operator flips the bit of an eigenstate of `basis`.
    ///
    /// Every Pauli either fixes or swaps the two eigenstates of each basis
    /// (up to a global phase), which is what lets prepared photons stay
    /// symbolic under Pauli noise and encoding.
    pub fn flips(self, basis: Basis) -> bool {
        match (self, basis) {
            (PauliOp::I, _) => false,
            (PauliOp::X, b) => b != Basis::X,
            (PauliOp::Z, b) => b != Basis::Z,
            (PauliOp::Y | PauliOp::IY, b) => b != Basis::Y,
        }
    }
}

/// Normalized pure state of one to three qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: Vec<C64>,
}

impl StateVector {
    pub fn new(amps: Vec<C64>) -> Result<Self, QuantumError> {
        if !matches!(amps.len(), 2 | 4 | 8) {
            return Err(QuantumError::BadDimension(amps.len()));
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(QuantumError::NotNormalized(norm));
        }
        Ok(Self { amps })
    }

    /// Rescales arbitrary nonzero amplitudes to unit norm.
    pub fn normalized(mut amps: Vec<C64>) -> Result<Self, QuantumError> {
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(QuantumError::NotNormalized(norm * norm));
        }
        for a in &mut amps {
            *a /= norm;
        }
        Self::new(amps)
    }

    pub fn from_basis_state(basis: Basis, bit: u8) -> Self {
        Self {
            amps: basis.eigenstate(bit).to_vec(),
        }
    }

    /// Haar-ish random state (normalized complex Gaussian amplitudes).
    pub fn random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<Self, QuantumError> {
        let amps = (0..dim)
            .map(|_| C64::new(gaussian(rng), gaussian(rng)))
            .collect();
        Self::normalized(amps)
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn num_qubits(&self) -> usize {
        self.amps.len().trailing_zeros() as usize
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Tensor product `self ⊗ other`.
    pub fn tensor(&self, other: &StateVector) -> Result<StateVector, QuantumError> {
        let dim = self.dim() * other.dim();
        if dim > 8 {
            return Err(QuantumError::BadDimension(dim));
        }
        let amps = self
            .amps
            .iter()
            .flat_map(|a| other.amps.iter().map(move |b| a * b))
            .collect();
        Ok(StateVector { amps })
    }

    /// Applies a single-qubit operator to `qubit`.
    pub fn apply(&self, op: &Matrix2<C64>, qubit: usize) -> Result<StateVector, QuantumError> {
        let n = self.num_qubits();
        if qubit >= n {
            return Err(QuantumError::QubitOutOfRange { qubit, qubits: n });
        }
        let mask = 1 << (n - 1 - qubit);
        let mut amps = self.amps.clone();
        for idx in (0..self.dim()).filter(|i| i & mask == 0) {
            let (a0, a1) = (self.amps[idx], self.amps[idx | mask]);
            amps[idx] = op[(0, 0)] * a0 + op[(0, 1)] * a1;
            amps[idx | mask] = op[(1, 0)] * a0 + op[(1, 1)] * a1;
        }
        Ok(StateVector { amps })
    }

    pub fn apply_pauli(&self, op: PauliOp, qubit: usize) -> Result<StateVector, QuantumError> {
        self.apply(&op.matrix(), qubit)
    }

    /// Probability that measuring `qubit` in `basis` yields 0.
    pub fn prob_zero(&self, qubit: usize, basis: Basis) -> Result<f64, QuantumError> {
        let (p0, _) = self.project(qubit, basis, 0)?;
        Ok(p0)
    }

    /// Measures one qubit, returning the outcome and the collapsed register.
    pub fn measure_qubit<R: Rng + ?Sized>(
        &self,
        qubit: usize,
        basis: Basis,
        rng: &mut R,
    ) -> Result<(u8, StateVector), QuantumError> {
        let (p0, post0) = self.project(qubit, basis, 0)?;
        if rng.random::<f64>() < p0 {
            Ok((0, post0))
        } else {
            let (_, post1) = self.project(qubit, basis, 1)?;
            Ok((1, post1))
        }
    }

    /// Projects `qubit` onto the eigenstate `bit` of `basis`; returns the
    /// outcome probability and the renormalized post-measurement state (the
    /// unnormalized projection when the probability vanishes).
    fn project(&self, qubit: usize, basis: Basis, bit: u8) -> Result<(f64, StateVector), QuantumError> {
        let n = self.num_qubits();
        if qubit >= n {
            return Err(QuantumError::QubitOutOfRange { qubit, qubits: n });
        }
        let e = basis.eigenstate(bit);
        let mask = 1 << (n - 1 - qubit);
        let mut amps = vec![C64::new(0.0, 0.0); self.dim()];
        for idx in (0..self.dim()).filter(|i| i & mask == 0) {
            let overlap = e[0].conj() * self.amps[idx] + e[1].conj() * self.amps[idx | mask];
            amps[idx] = e[0] * overlap;
            amps[idx | mask] = e[1] * overlap;
        }
        let p: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if p > 0.0 {
            let s = p.sqrt();
            for a in &mut amps {
                *a /= s;
            }
        }
        Ok((p.clamp(0.0, 1.0), StateVector { amps }))
    }
}

// Box-Muller; only used to draw random test and sampling states.
fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_unnormalized_and_bad_dims() {
        let z = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        assert!(matches!(StateVector::new(vec![one, one]), Err(QuantumError::NotNormalized(_))));
        assert!(matches!(StateVector::new(vec![one, z, z]), Err(QuantumError::BadDimension(3))));
    }

    #[test]
    fn eigenstates_are_orthonormal_and_mutually_unbiased() {
        for a in Basis::ALL {
            let a0 = StateVector::from_basis_state(a, 0);
            let a1 = StateVector::from_basis_state(a, 1);
            assert!(a0.inner(&a1).norm() < 1e-15);
            for b in Basis::ALL.into_iter().filter(|b| *b != a) {
                for bit in 0..2 {
                    let o = a0.inner(&StateVector::from_basis_state(b, bit)).norm_sqr();
                    assert!((o - 0.5).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn pauli_flip_table_matches_matrices() {
        for op in [PauliOp::I, PauliOp::X, PauliOp::Y, PauliOp::Z, PauliOp::IY] {
            for basis in Basis::ALL {
                let s = StateVector::from_basis_state(basis, 0).apply_pauli(op, 0).unwrap();
                let p0 = s.prob_zero(0, basis).unwrap();
                let expect = if op.flips(basis) { 0.0 } else { 1.0 };
                assert!((p0 - expect).abs() < 1e-12, "{op:?} on {basis:?}");
            }
        }
    }

    #[test]
    fn collapse_of_entangled_pair_fixes_partner() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let z = C64::new(0.0, 0.0);
        let phi = StateVector::new(vec![C64::new(s, 0.0), z, z, C64::new(s, 0.0)]).unwrap();
        for _ in 0..50 {
            let (bit, post) = phi.measure_qubit(0, Basis::X, &mut rng).unwrap();
            let p0 = post.prob_zero(1, Basis::X).unwrap();
            assert!((p0 - if bit == 0 { 1.0 } else { 0.0 }).abs() < 1e-12);
        }
    }
}
