use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Basis, PauliOp, QuantumError, StateVector};

#[derive(Debug, Clone, PartialEq)]
pub enum PhotonKind {
    /// Eigenstate `bit` of `basis`, held symbolically.
    Prepared { basis: Basis, bit: u8 },
    /// Arbitrary single-qubit state.
    Vector(StateVector),
}

/// A single transmitted carrier. A lost photon never produces a click.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonState {
    pub kind: PhotonKind,
    pub lost: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Measurement {
    Click(u8),
    NoClick,
}

impl Measurement {
    pub fn bit(self) -> Option<u8> {
        match self {
            Measurement::Click(b) => Some(b),
            Measurement::NoClick => None,
        }
    }
}

pub fn prepare(basis: Basis, bit: u8) -> PhotonState {
    debug_assert!(bit <= 1);
    PhotonState {
        kind: PhotonKind::Prepared { basis, bit: bit & 1 },
        lost: false,
    }
}

impl PhotonState {
    pub fn from_vector(state: StateVector) -> Result<Self, QuantumError> {
        if state.dim() != 2 {
            return Err(QuantumError::BadDimension(state.dim()));
        }
        Ok(Self {
            kind: PhotonKind::Vector(state),
            lost: false,
        })
    }

    /// Marks the photon as absorbed by the channel. Loss is permanent.
    pub fn into_lost(mut self) -> Self {
        self.lost = true;
        self
    }

    pub fn to_vector(&self) -> StateVector {
        match &self.kind {
            PhotonKind::Prepared { basis, bit } => StateVector::from_basis_state(*basis, *bit),
            PhotonKind::Vector(v) => v.clone(),
        }
    }

    /// Probability that a measurement in `basis` returns 0, ignoring loss.
    pub fn prob_zero(&self, basis: Basis) -> f64 {
        match &self.kind {
            PhotonKind::Prepared { basis: b, bit } if *b == basis => {
                if *bit == 0 {
                    1.0
                } else {
                    0.0
                }
            }
            // Z, X and Y are mutually unbiased.
            PhotonKind::Prepared { .. } => 0.5,
            PhotonKind::Vector(v) => v.prob_zero(0, basis).expect("single qubit"),
        }
    }
}

/// Applies a Pauli operator. Prepared photons stay symbolic because every
/// Pauli maps each basis eigenstate to an eigenstate of the same basis up to
/// a global phase.
pub fn apply_pauli(p: PauliOp, s: &PhotonState) -> Result<PhotonState, QuantumError> {
    if s.lost {
        return Err(QuantumError::LostPhoton);
    }
    let kind = match &s.kind {
        PhotonKind::Prepared { basis, bit } => PhotonKind::Prepared {
            basis: *basis,
            bit: bit ^ u8::from(p.flips(*basis)),
        },
        PhotonKind::Vector(v) => PhotonKind::Vector(v.apply_pauli(p, 0)?),
    };
    Ok(PhotonState { kind, lost: false })
}

pub fn measure<R: Rng + ?Sized>(s: &PhotonState, basis: Basis, rng: &mut R) -> Measurement {
    if s.lost {
        return Measurement::NoClick;
    }
    match &s.kind {
        PhotonKind::Prepared { basis: b, bit } if *b == basis => Measurement::Click(*bit),
        PhotonKind::Prepared { .. } => Measurement::Click(u8::from(rng.random_bool(0.5))),
        PhotonKind::Vector(_) => {
            let p0 = s.prob_zero(basis);
            Measurement::Click(u8::from(rng.random::<f64>() >= p0))
        }
    }
}
