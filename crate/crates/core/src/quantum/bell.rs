use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{PauliOp, PhotonState, QuantumError, StateVector, C64};

/// The four Bell states, indexed so that a Bell-diagonal two-qubit state
/// Σ λᵢ |Φᵢ⟩⟨Φᵢ| shows an X-basis error rate of λ₂ + λ₄ and a Z-basis error
/// rate of λ₃ + λ₄ relative to the reference pair |Φ₁⟩:
///
/// | index | state | Z parity | X parity |
/// |-------|-------|----------|----------|
/// | 1     | Φ⁺ = (|00⟩ + |11⟩)/√2 | even | even |
/// | 2     | Φ⁻ = (|00⟩ − |11⟩)/√2 | even | odd  |
/// | 3     | Ψ⁺ = (|01⟩ + |10⟩)/√2 | odd  | even |
/// | 4     | Ψ⁻ = (|01⟩ − |10⟩)/√2 | odd  | odd  |
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BellState {
    PhiPlus = 1,
    PhiMinus = 2,
    PsiPlus = 3,
    PsiMinus = 4,
}

impl BellState {
    pub const ALL: [BellState; 4] = [
        BellState::PhiPlus,
        BellState::PhiMinus,
        BellState::PsiPlus,
        BellState::PsiMinus,
    ];

    pub fn index(self) -> u8 {
        self as u8
    }

    pub fn from_index(index: u8) -> Result<Self, QuantumError> {
        match index {
            1 => Ok(BellState::PhiPlus),
            2 => Ok(BellState::PhiMinus),
            3 => Ok(BellState::PsiPlus),
            4 => Ok(BellState::PsiMinus),
            other => Err(QuantumError::BellIndex(other)),
        }
    }

    pub fn vector(self) -> StateVector {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let (a, b, c, d) = match self {
            BellState::PhiPlus => (s, 0.0, 0.0, s),
            BellState::PhiMinus => (s, 0.0, 0.0, -s),
            BellState::PsiPlus => (0.0, s, s, 0.0),
            BellState::PsiMinus => (0.0, s, -s, 0.0),
        };
        StateVector::new([a, b, c, d].map(|x| C64::new(x, 0.0)).to_vec()).expect("normalized")
    }

    /// Parity (bit_a ⊕ bit_b) of two same-basis eigenstates that this Bell
    /// outcome is compatible with. Only defined for Z and X; for mismatched or
    /// Y bases the outcome carries no parity information.
    pub fn parity(self, basis: super::Basis) -> Option<u8> {
        use super::Basis;
        match (basis, self) {
            (Basis::Z, BellState::PhiPlus | BellState::PhiMinus) => Some(0),
            (Basis::Z, BellState::PsiPlus | BellState::PsiMinus) => Some(1),
            (Basis::X, BellState::PhiPlus | BellState::PsiPlus) => Some(0),
            (Basis::X, BellState::PhiMinus | BellState::PsiMinus) => Some(1),
            (Basis::Y, _) => None,
        }
    }

    /// Pauli correction that restores a teleported qubit, assuming a |Φ⁺⟩
    /// resource pair.
    pub fn teleport_correction(self) -> PauliOp {
        match self {
            BellState::PhiPlus => PauliOp::I,
            BellState::PhiMinus => PauliOp::Z,
            BellState::PsiPlus => PauliOp::X,
            BellState::PsiMinus => PauliOp::IY,
        }
    }
}

pub fn make_bell(index: u8) -> Result<StateVector, QuantumError> {
    Ok(BellState::from_index(index)?.vector())
}

/// Born probabilities |⟨Φᵢ|ψ⟩|² in index order.
pub fn bell_probabilities(joint: &StateVector) -> Result<[f64; 4], QuantumError> {
    if joint.dim() != 4 {
        return Err(QuantumError::BadDimension(joint.dim()));
    }
    Ok(BellState::ALL.map(|b| b.vector().inner(joint).norm_sqr()))
}

/// Ideal Bell-state measurement.
pub fn bell_measure<R: Rng + ?Sized>(joint: &StateVector, rng: &mut R) -> Result<BellState, QuantumError> {
    let probs = bell_probabilities(joint)?;
    Ok(sample(&probs, rng))
}

fn sample<R: Rng + ?Sized>(probs: &[f64; 4], rng: &mut R) -> BellState {
    let total: f64 = probs.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (b, p) in BellState::ALL.iter().zip(probs) {
        if u < *p {
            return *b;
        }
        u -= p;
    }
    // Rounding left u marginally above the last cumulative bound.
    *BellState::ALL
        .iter()
        .zip(probs)
        .rev()
        .find(|(_, p)| **p > 0.0)
        .map(|(b, _)| b)
        .unwrap_or(&BellState::PsiMinus)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TeleportBranch {
    pub outcome: BellState,
    pub probability: f64,
    /// The retained qubit after the Pauli correction; `None` when the branch
    /// has zero probability.
    pub retained: Option<PhotonState>,
}

/// All four branches of teleporting `payload` through `resource`.
///
/// The register is ordered (payload, resource half measured with it,
/// retained resource half). The Bell measurement acts on the first two.
pub fn teleport_branches(resource: &StateVector, payload: &PhotonState) -> Result<[TeleportBranch; 4], QuantumError> {
    if payload.lost {
        return Err(QuantumError::LostPhoton);
    }
    if resource.dim() != 4 {
        return Err(QuantumError::BadDimension(resource.dim()));
    }
    let joint = payload.to_vector().tensor(resource)?;
    let psi = joint.amplitudes();
    let mut out = Vec::with_capacity(4);
    for outcome in BellState::ALL {
        let bell = outcome.vector();
        let bell = bell.amplitudes();
        let mut retained = [C64::new(0.0, 0.0); 2];
        for (c, slot) in retained.iter_mut().enumerate() {
            *slot = (0..4).map(|ab| bell[ab].conj() * psi[ab * 2 + c]).sum();
        }
        let probability: f64 = retained.iter().map(|a| a.norm_sqr()).sum();
        let retained = if probability > 1e-15 {
            let v = StateVector::normalized(retained.to_vec())?.apply_pauli(outcome.teleport_correction(), 0)?;
            Some(PhotonState::from_vector(v)?)
        } else {
            None
        };
        out.push(TeleportBranch {
            outcome,
            probability,
            retained,
        });
    }
    Ok(out.try_into().expect("four branches"))
}

/// Teleports `payload` using a two-qubit `resource`; returns the announced
/// Bell outcome and the corrected retained photon.
pub fn teleport<R: Rng + ?Sized>(
    resource: &StateVector,
    payload: &PhotonState,
    rng: &mut R,
) -> Result<(BellState, PhotonState), QuantumError> {
    let branches = teleport_branches(resource, payload)?;
    let probs = [0, 1, 2, 3].map(|i| branches[i].probability);
    let outcome = sample(&probs, rng);
    let branch = &branches[outcome.index() as usize - 1];
    Ok((outcome, branch.retained.clone().expect("sampled branch has support")))
}
