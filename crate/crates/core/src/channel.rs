//! Lossy, noisy fiber channel: a binary erasure stage (attenuation and
//! detector efficiency) followed by independent Pauli bit and phase flips.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::quantum::{apply_pauli, PauliOp, PhotonState, QuantumError, StateVector};

/// Standard telecom fiber loss.
pub const DEFAULT_ATTENUATION_DB_PER_KM: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ChannelError {
    #[error("invalid channel parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("Eve gain {g} with Q_Bob = {q_bob} gives Q_Eve > 1")]
    EveRateAboveOne { g: f64, q_bob: f64 },
}

/// How much of the transmitted signal Eve is assumed to collect.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EveGainModel {
    /// Eve collects photons lost to Bob. `g = None` is the worst case: she
    /// receives every photon, Q_Eve = 1. `Some(g)` fixes Q_Eve = g·Q_Bob.
    Collecting { g: Option<f64> },
    /// Q_Eve = Q_Bob, the situation enforced by INCUM masking.
    EqualReception,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelParams {
    pub length_km: f64,
    pub attenuation_db_per_km: f64,
    /// Probability of a Z-basis bit flip (Pauli X) per traversal.
    pub flip_prob_z: f64,
    /// Probability of an X-basis bit flip (Pauli Z) per traversal.
    pub flip_prob_x: f64,
    pub detector_efficiency: f64,
    pub eve_gain_model: EveGainModel,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            length_km: 0.0,
            attenuation_db_per_km: DEFAULT_ATTENUATION_DB_PER_KM,
            flip_prob_z: 0.0,
            flip_prob_x: 0.0,
            detector_efficiency: 1.0,
            eve_gain_model: EveGainModel::Collecting { g: None },
        }
    }
}

impl ChannelParams {
    pub fn ideal() -> Self {
        Self::default()
    }

    pub fn with_length(mut self, length_km: f64) -> Self {
        self.length_km = length_km;
        self
    }

    pub fn with_flips(mut self, flip_prob_z: f64, flip_prob_x: f64) -> Self {
        self.flip_prob_z = flip_prob_z;
        self.flip_prob_x = flip_prob_x;
        self
    }

    pub fn with_eve_gain(mut self, model: EveGainModel) -> Self {
        self.eve_gain_model = model;
        self
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        let bad = |name, value| Err(ChannelError::InvalidParameter { name, value });
        if !(self.length_km >= 0.0 && self.length_km.is_finite()) {
            return bad("length_km", self.length_km);
        }
        if !(self.attenuation_db_per_km >= 0.0 && self.attenuation_db_per_km.is_finite()) {
            return bad("attenuation_db_per_km", self.attenuation_db_per_km);
        }
        if !(0.0..=0.5).contains(&self.flip_prob_z) {
            return bad("flip_prob_z", self.flip_prob_z);
        }
        if !(0.0..=0.5).contains(&self.flip_prob_x) {
            return bad("flip_prob_x", self.flip_prob_x);
        }
        if !(self.detector_efficiency > 0.0 && self.detector_efficiency <= 1.0) {
            return bad("detector_efficiency", self.detector_efficiency);
        }
        if let EveGainModel::Collecting { g: Some(g) } = self.eve_gain_model {
            if !(g >= 1.0 && g.is_finite()) {
                return bad("g", g);
            }
        }
        if self.reception_rate() <= 0.0 {
            return bad("survival probability", self.reception_rate());
        }
        Ok(())
    }

    /// Q_Bob = 10^(−αL/10)·η.
    pub fn reception_rate(&self) -> f64 {
        10f64.powf(-self.attenuation_db_per_km * self.length_km / 10.0) * self.detector_efficiency
    }

    pub fn eve_reception_rate(&self) -> Result<f64, ChannelError> {
        self.eve_reception_rate_for(self.reception_rate())
    }

    /// Q_Eve implied by the gain model for a given (possibly measured) Q_Bob.
    pub fn eve_reception_rate_for(&self, q_bob: f64) -> Result<f64, ChannelError> {
        match self.eve_gain_model {
            EveGainModel::EqualReception => Ok(q_bob),
            EveGainModel::Collecting { g: None } => Ok(1.0),
            EveGainModel::Collecting { g: Some(g) } => {
                let q_eve = g * q_bob;
                if q_eve > 1.0 + 1e-12 {
                    Err(ChannelError::EveRateAboveOne { g, q_bob })
                } else {
                    Ok(q_eve.min(1.0))
                }
            }
        }
    }

    /// g = Q_Eve / Q_Bob.
    pub fn eve_gain(&self) -> Result<f64, ChannelError> {
        Ok(self.eve_reception_rate()? / self.reception_rate())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionOutcome {
    pub photon: PhotonState,
    pub flipped_z: bool,
    pub flipped_x: bool,
}

impl TransmissionOutcome {
    pub fn arrived(&self) -> bool {
        !self.photon.lost
    }
}

/// Sends one photon through the channel. Lost photons stay lost and carry no
/// flip flags.
pub fn transmit<R: Rng + ?Sized>(s: &PhotonState, params: &ChannelParams, rng: &mut R) -> TransmissionOutcome {
    let lost = TransmissionOutcome {
        photon: s.clone().into_lost(),
        flipped_z: false,
        flipped_x: false,
    };
    if s.lost || rng.random::<f64>() >= params.reception_rate() {
        return lost;
    }
    let flipped_z = params.flip_prob_z > 0.0 && rng.random_bool(params.flip_prob_z);
    let flipped_x = params.flip_prob_x > 0.0 && rng.random_bool(params.flip_prob_x);
    let mut photon = s.clone();
    if flipped_z {
        photon = apply_pauli(PauliOp::X, &photon).expect("photon arrived");
    }
    if flipped_x {
        photon = apply_pauli(PauliOp::Z, &photon).expect("photon arrived");
    }
    TransmissionOutcome {
        photon,
        flipped_z,
        flipped_x,
    }
}

/// Sends one qubit of an entangled register through the channel. Returns
/// `None` if it was lost; otherwise the register with any Pauli noise applied
/// to that qubit.
pub fn transmit_register_qubit<R: Rng + ?Sized>(
    state: &StateVector,
    qubit: usize,
    params: &ChannelParams,
    rng: &mut R,
) -> Result<Option<StateVector>, QuantumError> {
    if rng.random::<f64>() >= params.reception_rate() {
        return Ok(None);
    }
    let mut out = state.clone();
    if params.flip_prob_z > 0.0 && rng.random_bool(params.flip_prob_z) {
        out = out.apply_pauli(PauliOp::X, qubit)?;
    }
    if params.flip_prob_x > 0.0 && rng.random_bool(params.flip_prob_x) {
        out = out.apply_pauli(PauliOp::Z, qubit)?;
    }
    Ok(Some(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{measure, prepare, Basis, Measurement};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fiber(length_km: f64) -> ChannelParams {
        ChannelParams::default().with_length(length_km)
    }

    #[test]
    fn reception_rate_values() {
        assert_eq!(fiber(0.0).reception_rate(), 1.0);
        assert!((fiber(100.0).reception_rate() - 0.01).abs() < 1e-15);
        let half = ChannelParams {
            detector_efficiency: 0.5,
            ..fiber(0.0)
        };
        assert_eq!(half.reception_rate(), 0.5);
    }

    #[test]
    fn eve_reception_models() {
        let equal = fiber(37.0).with_eve_gain(EveGainModel::EqualReception);
        assert_eq!(equal.eve_reception_rate().unwrap(), equal.reception_rate());
        assert_eq!(equal.eve_gain().unwrap(), 1.0);

        // 50 km at 0.2 dB/km: Q_Bob = 0.1, worst case Eve gets everything.
        let worst = fiber(50.0);
        assert!((worst.reception_rate() - 0.1).abs() < 1e-15);
        assert_eq!(worst.eve_reception_rate().unwrap(), 1.0);

        let explicit = ChannelParams {
            detector_efficiency: 0.3,
            ..fiber(0.0).with_eve_gain(EveGainModel::Collecting { g: Some(2.0) })
        };
        assert!((explicit.eve_reception_rate().unwrap() - 0.6).abs() < 1e-15);

        let too_much = ChannelParams {
            detector_efficiency: 0.6,
            ..explicit
        };
        assert!(matches!(too_much.eve_reception_rate(), Err(ChannelError::EveRateAboveOne { .. })));
    }

    #[test]
    fn validation() {
        assert!(ChannelParams::default().validate().is_ok());
        assert!(fiber(-1.0).validate().is_err());
        assert!(fiber(1.0).with_flips(0.6, 0.0).validate().is_err());
        let zero_eff = ChannelParams {
            detector_efficiency: 0.0,
            ..fiber(1.0)
        };
        assert!(zero_eff.validate().is_err());
        assert!(fiber(1.0)
            .with_eve_gain(EveGainModel::Collecting { g: Some(0.5) })
            .validate()
            .is_err());
    }

    #[test]
    fn identity_channel_is_transparent() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let params = ChannelParams::ideal();
        for basis in [Basis::Z, Basis::X] {
            for bit in 0..2 {
                let s = prepare(basis, bit);
                for _ in 0..100 {
                    let out = transmit(&s, &params, &mut rng);
                    assert_eq!(out.photon, s);
                    assert!(!out.flipped_x && !out.flipped_z);
                }
            }
        }
    }

    #[test]
    fn arrival_rate_matches_attenuation_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let params = fiber(50.0);
        let n = 100_000;
        let s = prepare(Basis::Z, 0);
        let arrived = (0..n).filter(|_| transmit(&s, &params, &mut rng).arrived()).count();
        let rate = arrived as f64 / n as f64;
        assert!((rate - 0.1).abs() < 0.005, "{rate}");
    }

    #[test]
    fn z_flip_rate_tracks_configuration_and_ignores_phase_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let params = fiber(0.0).with_flips(0.05, 0.2);
        let n = 100_000;
        let s = prepare(Basis::Z, 0);
        let ones = (0..n)
            .filter(|_| {
                let out = transmit(&s, &params, &mut rng);
                measure(&out.photon, Basis::Z, &mut rng) == Measurement::Click(1)
            })
            .count();
        let rate = ones as f64 / n as f64;
        assert!((rate - 0.05).abs() < 0.005, "{rate}");
    }

    #[test]
    fn loss_is_absorbing() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let lost = prepare(Basis::X, 1).into_lost();
        for _ in 0..100 {
            let out = transmit(&lost, &ChannelParams::ideal(), &mut rng);
            assert!(!out.arrived() && !out.flipped_x && !out.flipped_z);
        }
    }
}
