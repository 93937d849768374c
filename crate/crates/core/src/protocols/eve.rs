use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::quantum::{measure, prepare, Basis, Measurement, PhotonState, QuantumError, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisPolicy {
    #[serde(rename = "random_zx")]
    RandomZX,
    FixedZ,
    FixedX,
}

impl BasisPolicy {
    fn pick<R: Rng + ?Sized>(self, rng: &mut R) -> Basis {
        match self {
            BasisPolicy::RandomZX => Basis::random_zx(rng),
            BasisPolicy::FixedZ => Basis::Z,
            BasisPolicy::FixedX => Basis::X,
        }
    }
}

/// Simulated adversary on every quantum leg.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum EveStrategy {
    #[default]
    None,
    /// Measures a `fraction` of passing photons and resends her result.
    InterceptResend { basis_policy: BasisPolicy, fraction: f64 },
}

impl EveStrategy {
    pub fn validate(&self) -> Result<(), String> {
        match self {
            EveStrategy::InterceptResend { fraction, .. } if !(0.0..=1.0).contains(fraction) => {
                Err(format!("intercept fraction {fraction} outside [0, 1]"))
            }
            _ => Ok(()),
        }
    }

    fn attacks<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<BasisPolicy> {
        match *self {
            EveStrategy::InterceptResend { basis_policy, fraction } if fraction > 0.0 && rng.random_bool(fraction) => {
                Some(basis_policy)
            }
            _ => None,
        }
    }

    /// Possibly intercepts a photon in flight. Returns the photon that
    /// continues down the channel and whether Eve touched it.
    pub fn intercept<R: Rng + ?Sized>(&self, photon: PhotonState, rng: &mut R) -> (PhotonState, bool) {
        if photon.lost {
            return (photon, false);
        }
        match self.attacks(rng) {
            Some(policy) => {
                let basis = policy.pick(rng);
                let bit = match measure(&photon, basis, rng) {
                    Measurement::Click(b) => b,
                    Measurement::NoClick => unreachable!("photon not lost"),
                };
                (prepare(basis, bit), true)
            }
            None => (photon, false),
        }
    }

    /// Intercept-resend on one qubit of an entangled register: the resent
    /// photon is the measured eigenstate, i.e. the collapsed register.
    pub fn intercept_qubit<R: Rng + ?Sized>(
        &self,
        state: StateVector,
        qubit: usize,
        rng: &mut R,
    ) -> Result<(StateVector, bool), QuantumError> {
        match self.attacks(rng) {
            Some(policy) => {
                let basis = policy.pick(rng);
                let (_, post) = state.measure_qubit(qubit, basis, rng)?;
                Ok((post, true))
            }
            None => Ok((state, false)),
        }
    }
}
