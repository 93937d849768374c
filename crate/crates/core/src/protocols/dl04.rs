//! Two-way single-photon DL04 and its INCUM-masked variant.
//!
//! Bob prepares photons in random Z/X eigenstates and sends them to Alice.
//! Alice samples some for eavesdropping detection (she announces positions,
//! bases and outcomes; Bob reveals his preparations for them) and decides
//! whether to continue before any message bit is touched. She then encodes
//! bit 0 as I and bit 1 as iY on the retained photons, which flips the
//! eigenstate in either basis, and returns them. Bob measures in his
//! preparation basis and compares with his prepared bit. Known check bits
//! embedded among the encoded slots give the integrity QBER.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    assign_slots, estimate_dber, measured_capacity, validate_fraction, AbortReason, CheckRecord, DetectionRecord,
    Dl04Role, Dl04Round, Event, EveStrategy, ProtocolError, ProtocolKind, RoundLog, SessionTranscript, SlotKind,
    DEFAULT_ABORT_THRESHOLD, DEFAULT_CHECK_BIT_FRACTION, MIN_RECOMMENDED_DETECTION_ROUNDS,
};
use crate::channel::{transmit, ChannelParams};
use crate::quantum::{apply_pauli, measure, prepare, Basis, PauliOp};
use crate::security::CapacityMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dl04Config {
    pub n_photons: usize,
    /// Fraction of arrived photons Alice measures for eavesdropping detection.
    pub check_fraction: f64,
    pub dber_abort_threshold: f64,
    pub qber_abort_threshold: f64,
    /// Fraction of encoding slots carrying known check bits.
    pub check_bit_fraction: f64,
    pub channel: ChannelParams,
    /// Alice → Bob leg; defaults to `channel`.
    pub return_channel: Option<ChannelParams>,
    pub incum: bool,
    pub capacity_mode: CapacityMode,
    pub record_rounds: bool,
}

impl Dl04Config {
    pub fn new(n_photons: usize, channel: ChannelParams) -> Self {
        Self {
            n_photons,
            check_fraction: 0.5,
            dber_abort_threshold: DEFAULT_ABORT_THRESHOLD,
            qber_abort_threshold: DEFAULT_ABORT_THRESHOLD,
            check_bit_fraction: DEFAULT_CHECK_BIT_FRACTION,
            channel,
            return_channel: None,
            incum: false,
            capacity_mode: CapacityMode::TwoBasis,
            record_rounds: true,
        }
    }

    pub fn with_incum(mut self, incum: bool) -> Self {
        self.incum = incum;
        self
    }

    pub fn return_leg(&self) -> &ChannelParams {
        self.return_channel.as_ref().unwrap_or(&self.channel)
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.n_photons == 0 {
            return Err(ProtocolError::InvalidConfig("n_photons must be at least 1".into()));
        }
        validate_fraction("check_fraction", self.check_fraction, 0.0, 1.0)?;
        validate_fraction("dber_abort_threshold", self.dber_abort_threshold, 0.0, 0.5)?;
        validate_fraction("qber_abort_threshold", self.qber_abort_threshold, 0.0, 0.5)?;
        validate_fraction("check_bit_fraction", self.check_bit_fraction, 0.0, 0.5 + f64::EPSILON)?;
        self.channel.validate()?;
        self.return_leg().validate()?;
        Ok(())
    }
}

struct PhotonSlot {
    basis: Basis,
    bit: u8,
    photon: crate::quantum::PhotonState,
    eve_forward: bool,
    eve_return: bool,
    role: Dl04Role,
}

pub fn run_dl04<R: Rng + ?Sized>(
    cfg: &Dl04Config,
    message: &[u8],
    eve: &EveStrategy,
    rng: &mut R,
) -> Result<SessionTranscript, ProtocolError> {
    cfg.validate()?;
    eve.validate().map_err(ProtocolError::InvalidConfig)?;
    let mut events = Vec::new();
    let mut warnings = Vec::new();
    let expected_checks = cfg.n_photons as f64 * cfg.channel.reception_rate() * cfg.check_fraction;
    if expected_checks < MIN_RECOMMENDED_DETECTION_ROUNDS {
        warnings.push(format!(
            "only ~{expected_checks:.0} detection rounds expected; DBER estimate will be unstable"
        ));
    }

    // (1) Initialization and forward leg.
    events.push(Event::Initialization { photons: cfg.n_photons });
    let mut slots: Vec<PhotonSlot> = (0..cfg.n_photons)
        .map(|_| {
            let basis = Basis::random_zx(rng);
            let bit = u8::from(rng.random_bool(0.5));
            let (photon, eve_forward) = eve.intercept(prepare(basis, bit), rng);
            let out = transmit(&photon, &cfg.channel, rng);
            let role = if out.arrived() { Dl04Role::Retained } else { Dl04Role::Lost };
            PhotonSlot {
                basis,
                bit,
                photon: out.photon,
                eve_forward,
                eve_return: false,
                role,
            }
        })
        .collect();
    let arrived = slots.iter().filter(|s| s.role == Dl04Role::Retained).count();
    events.push(Event::ForwardTransmission { arrived });

    // (2) Eavesdropping detection on a random subset of arrived photons.
    let mut detection = Vec::new();
    let mut measured = 0;
    for s in slots.iter_mut().filter(|s| s.role == Dl04Role::Retained) {
        if rng.random_bool(cfg.check_fraction) {
            let alice_basis = Basis::random_zx(rng);
            let outcome = measure(&s.photon, alice_basis, rng).bit().expect("arrived photon clicks");
            measured += 1;
            if alice_basis == s.basis {
                detection.push(DetectionRecord {
                    basis: s.basis,
                    expected: s.bit,
                    observed: outcome,
                });
            }
            s.role = Dl04Role::Detection { alice_basis, outcome };
        }
    }
    events.push(Event::EavesdroppingDetection {
        rounds: measured,
        matched_rounds: detection.len(),
    });
    let mut dber = estimate_dber(&detection, &[]);
    let abort = if detection.is_empty() {
        Some(AbortReason::NoDetectionRounds)
    } else if dber.worst_detection_rate().is_some_and(|r| r > cfg.dber_abort_threshold) {
        Some(AbortReason::Detection {
            eps_x: dber.eps_x,
            eps_z: dber.eps_z,
            threshold: cfg.dber_abort_threshold,
        })
    } else {
        None
    };
    events.push(Event::DetectionDecision { passed: abort.is_none() });

    let kind = if cfg.incum { ProtocolKind::Dl04Incum } else { ProtocolKind::Dl04 };
    let finish = |slots: Vec<PhotonSlot>, events, warnings, dber, abort: Option<AbortReason>, received, q_bob| {
        let capacity = measured_capacity(&dber, q_bob, cfg.return_leg(), cfg.incum, cfg.capacity_mode)?;
        let (received_positions, received_bits): (Vec<usize>, Vec<u8>) = received;
        Ok(SessionTranscript {
            protocol: kind,
            sent_bits: message.to_vec(),
            received_bits,
            received_positions,
            dber,
            aborted: abort.is_some(),
            abort_reason: abort,
            capacity,
            events,
            warnings,
            rounds: cfg.record_rounds.then(|| {
                RoundLog::Dl04(
                    slots
                        .into_iter()
                        .enumerate()
                        .map(|(index, s)| Dl04Round {
                            index,
                            bob_basis: s.basis,
                            bob_bit: s.bit,
                            eve_forward: s.eve_forward,
                            eve_return: s.eve_return,
                            role: s.role,
                        })
                        .collect(),
                )
            }),
        })
    };
    if abort.is_some() {
        let q_bob = cfg.return_leg().reception_rate();
        return finish(slots, events, warnings, dber, abort, (vec![], vec![]), q_bob);
    }

    // (3) Encoding on the retained photons.
    let retained: Vec<usize> = (0..slots.len()).filter(|&i| slots[i].role == Dl04Role::Retained).collect();
    let layout = assign_slots(retained.len(), message.len(), cfg.check_bit_fraction)?;
    let mut check_count = 0;
    let mut filler_count = 0;
    let mut values = Vec::with_capacity(layout.len());
    let mut pads = Vec::with_capacity(layout.len());
    for slot in &layout {
        let value = match *slot {
            SlotKind::Message(p) => message[p] & 1,
            SlotKind::Check => {
                check_count += 1;
                u8::from(rng.random_bool(0.5))
            }
            SlotKind::Filler => {
                filler_count += 1;
                u8::from(rng.random_bool(0.5))
            }
        };
        // The pad is drawn even without masking so both variants consume
        // the same random stream.
        let pad = u8::from(rng.random_bool(0.5));
        values.push(value);
        pads.push(if cfg.incum { pad } else { 0 });
    }
    events.push(Event::Encoding {
        message_bits: message.len(),
        check_bits: check_count,
        filler_bits: filler_count,
        masked: cfg.incum,
    });

    // (4) Return leg, Bob's measurement, announcements and integrity check.
    let mut returned = 0;
    let mut decoded = vec![None; layout.len()];
    for (j, &i) in retained.iter().enumerate() {
        let encoded_bit = values[j] ^ pads[j];
        let s = &mut slots[i];
        let op = if encoded_bit == 1 { PauliOp::IY } else { PauliOp::I };
        let encoded = apply_pauli(op, &s.photon)?;
        let (photon, eve_return) = eve.intercept(encoded, rng);
        s.eve_return = eve_return;
        let out = transmit(&photon, cfg.return_leg(), rng);
        let bob_outcome = measure(&out.photon, s.basis, rng).bit();
        if let Some(b) = bob_outcome {
            returned += 1;
            decoded[j] = Some(b ^ s.bit);
        }
        s.role = Dl04Role::Encoded {
            slot: layout[j],
            encoded_bit,
            returned: bob_outcome.is_some(),
            bob_outcome,
        };
    }
    events.push(Event::ReturnTransmission { returned });
    events.push(Event::ArrivalAnnouncement { positions: returned });
    if cfg.incum {
        events.push(Event::PadAnnouncement { revealed: returned });
    }
    let unmasked: Vec<Option<u8>> = decoded.iter().zip(&pads).map(|(d, p)| d.map(|b| b ^ p)).collect();

    let checks: Vec<CheckRecord> = layout
        .iter()
        .zip(&unmasked)
        .zip(&values)
        .filter(|((slot, d), _)| **slot == SlotKind::Check && d.is_some())
        .map(|((_, d), v)| CheckRecord {
            sent: *v,
            received: d.expect("filtered"),
        })
        .collect();
    let integrity = estimate_dber(&[], &checks);
    dber = dber.with_integrity(integrity.errors_e, integrity.n_e);
    let abort = dber
        .e
        .filter(|e| *e > cfg.qber_abort_threshold)
        .map(|e| AbortReason::Integrity {
            e,
            threshold: cfg.qber_abort_threshold,
        });
    events.push(Event::IntegrityCheck {
        e: dber.e,
        passed: abort.is_none(),
    });

    let mut received: Vec<(usize, u8)> = layout
        .iter()
        .zip(&unmasked)
        .filter_map(|(slot, d)| match (slot, d) {
            (SlotKind::Message(p), Some(b)) => Some((*p, *b)),
            _ => None,
        })
        .collect();
    received.sort_unstable();
    let q_bob = if layout.is_empty() {
        cfg.return_leg().reception_rate()
    } else {
        returned as f64 / layout.len() as f64
    };
    finish(slots, events, warnings, dber, abort, received.into_iter().unzip(), q_bob)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::from_bytes;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn noiseless_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let msg = from_bytes(&[0xA5]);
        let cfg = Dl04Config::new(200, ChannelParams::ideal());
        let t = run_dl04(&cfg, &msg, &EveStrategy::None, &mut rng).unwrap();
        assert!(!t.aborted);
        assert_eq!(t.received_bits, msg);
        assert!(t.message_recovered());
        assert_eq!(t.dber.eps_x.unwrap_or(0.0), 0.0);
        assert_eq!(t.dber.eps_z.unwrap_or(0.0), 0.0);
        assert_eq!(t.dber.e, Some(0.0));
    }

    #[test]
    fn message_too_long_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = Dl04Config::new(100, ChannelParams::ideal());
        let err = run_dl04(&cfg, &vec![1; 90], &EveStrategy::None, &mut rng).unwrap_err();
        assert!(matches!(err, ProtocolError::MessageTooLong { .. }));
    }

    #[test]
    fn invalid_config_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut cfg = Dl04Config::new(100, ChannelParams::ideal());
        cfg.check_fraction = 1.0;
        assert!(matches!(
            run_dl04(&cfg, &[], &EveStrategy::None, &mut rng),
            Err(ProtocolError::InvalidConfig(_))
        ));
        let eve = EveStrategy::InterceptResend {
            basis_policy: super::super::BasisPolicy::FixedZ,
            fraction: 1.5,
        };
        assert!(run_dl04(&Dl04Config::new(100, ChannelParams::ideal()), &[], &eve, &mut rng).is_err());
    }

    #[test]
    fn small_sessions_carry_a_warning() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let t = run_dl04(&Dl04Config::new(50, ChannelParams::ideal()), &[], &EveStrategy::None, &mut rng).unwrap();
        assert_eq!(t.warnings.len(), 1);
    }
}
