//! Measurement-device-independent DL04.
//!
//! Alice randomly emits either half of a |Φ⁺⟩ pair or a single photon; Bob
//! always emits a single photon. An untrusted relay, Charlie, Bell-measures
//! each coincident pair and announces the outcome.
//!
//! * Single/single rounds are eavesdropping checks: in matched bases the
//!   announced outcome fixes the parity of the two prepared bits
//!   ([`MDI_PARITY_TABLE`]).
//! * Pair/single rounds teleport Bob's state onto the photon Alice kept; she
//!   applies the Pauli correction for the announced outcome.
//!
//! After a passing check Alice encodes I / iY on the teleported photons and
//! sends them back to Charlie, who Bell-measures each against a fresh
//! reference photon Bob prepares in the same basis. The announced parity
//! reveals the message bit only to Bob, who knows both of his bits.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    assign_slots, estimate_dber, measured_capacity, validate_fraction, AbortReason, AlicePreparation, CheckRecord,
    DetectionRecord, Event, EveStrategy, MdiRole, MdiRound, ProtocolError, ProtocolKind, RoundLog, SessionTranscript,
    SlotKind, DEFAULT_ABORT_THRESHOLD, DEFAULT_CHECK_BIT_FRACTION, MIN_RECOMMENDED_DETECTION_ROUNDS,
};
use crate::channel::{transmit, transmit_register_qubit, ChannelParams};
use crate::quantum::{
    apply_pauli, make_bell, prepare, teleport_branches, Basis, BellState, PauliOp, PhotonState,
};
use crate::security::CapacityMode;

/// Parity bit_A ⊕ bit_B implied by each announced outcome (Φ⁺, Φ⁻, Ψ⁺, Ψ⁻)
/// when both photons were prepared in the given basis.
pub const MDI_PARITY_TABLE: [(Basis, [u8; 4]); 2] = [(Basis::Z, [0, 0, 1, 1]), (Basis::X, [0, 1, 0, 1])];

fn announced_parity(outcome: BellState, basis: Basis) -> u8 {
    MDI_PARITY_TABLE
        .iter()
        .find(|(b, _)| *b == basis)
        .map(|(_, row)| row[outcome.index() as usize - 1])
        .expect("Z or X basis")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdiConfig {
    pub n_rounds: usize,
    /// Probability that Alice emits half of an entangled pair.
    pub entangled_fraction: f64,
    pub dber_abort_threshold: f64,
    pub qber_abort_threshold: f64,
    pub check_bit_fraction: f64,
    /// Channel from either party to Charlie.
    pub channel: ChannelParams,
    pub capacity_mode: CapacityMode,
    pub record_rounds: bool,
}

impl MdiConfig {
    pub fn new(n_rounds: usize, channel: ChannelParams) -> Self {
        Self {
            n_rounds,
            entangled_fraction: 0.5,
            dber_abort_threshold: DEFAULT_ABORT_THRESHOLD,
            qber_abort_threshold: DEFAULT_ABORT_THRESHOLD,
            check_bit_fraction: DEFAULT_CHECK_BIT_FRACTION,
            channel,
            capacity_mode: CapacityMode::TwoBasis,
            record_rounds: true,
        }
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.n_rounds == 0 {
            return Err(ProtocolError::InvalidConfig("n_rounds must be at least 1".into()));
        }
        validate_fraction("entangled_fraction", self.entangled_fraction, 0.0, 1.0)?;
        validate_fraction("dber_abort_threshold", self.dber_abort_threshold, 0.0, 0.5)?;
        validate_fraction("qber_abort_threshold", self.qber_abort_threshold, 0.0, 0.5)?;
        validate_fraction("check_bit_fraction", self.check_bit_fraction, 0.0, 0.5 + f64::EPSILON)?;
        self.channel.validate()?;
        Ok(())
    }
}

fn random_outcome<R: Rng + ?Sized>(rng: &mut R) -> BellState {
    BellState::ALL[rng.random_range(0..4)]
}

fn send<R: Rng + ?Sized>(
    photon: PhotonState,
    eve: &EveStrategy,
    channel: &ChannelParams,
    rng: &mut R,
) -> Option<PhotonState> {
    let (photon, _) = eve.intercept(photon, rng);
    let out = transmit(&photon, channel, rng);
    out.arrived().then_some(out.photon)
}

/// Charlie's Bell measurement on two arrived photons: the physical outcome
/// and the one he announces.
fn charlie_measures<R: Rng + ?Sized>(
    first: &PhotonState,
    second: &PhotonState,
    honest: bool,
    rng: &mut R,
) -> Result<BellState, ProtocolError> {
    let joint = first.to_vector().tensor(&second.to_vector())?;
    let actual = crate::quantum::bell_measure(&joint, rng)?;
    Ok(if honest { actual } else { random_outcome(rng) })
}

struct Teleported {
    round: usize,
    photon: PhotonState,
}

pub fn run_mdi_dl04<R: Rng + ?Sized>(
    cfg: &MdiConfig,
    message: &[u8],
    eve: &EveStrategy,
    charlie_honest: bool,
    rng: &mut R,
) -> Result<SessionTranscript, ProtocolError> {
    cfg.validate()?;
    eve.validate().map_err(ProtocolError::InvalidConfig)?;
    let mut events = vec![Event::Initialization { photons: cfg.n_rounds }];
    let mut warnings = Vec::new();
    let q = cfg.channel.reception_rate();
    let expected_checks = cfg.n_rounds as f64 * q * q * (1.0 - cfg.entangled_fraction) / 2.0;
    if expected_checks < MIN_RECOMMENDED_DETECTION_ROUNDS {
        warnings.push(format!(
            "only ~{expected_checks:.0} matched detection rounds expected; DBER estimate will be unstable"
        ));
    }

    let mut rounds = Vec::with_capacity(cfg.n_rounds);
    let mut detection = Vec::new();
    let mut detection_total = 0;
    let mut teleported = Vec::new();
    for index in 0..cfg.n_rounds {
        let bob_basis = Basis::random_zx(rng);
        let bob_bit = u8::from(rng.random_bool(0.5));
        let entangled = rng.random_bool(cfg.entangled_fraction);
        let alice = if entangled {
            AlicePreparation::Entangled
        } else {
            AlicePreparation::Single {
                basis: Basis::random_zx(rng),
                bit: u8::from(rng.random_bool(0.5)),
            }
        };
        let bob_photon = send(prepare(bob_basis, bob_bit), eve, &cfg.channel, rng);
        let mut round = MdiRound {
            index,
            alice,
            bob_basis,
            bob_bit,
            announcement: None,
            role: MdiRole::NoCoincidence,
        };
        match alice {
            AlicePreparation::Single { basis, bit } => {
                let alice_photon = send(prepare(basis, bit), eve, &cfg.channel, rng);
                if let (Some(a), Some(b)) = (alice_photon, bob_photon) {
                    let announced = charlie_measures(&a, &b, charlie_honest, rng)?;
                    detection_total += 1;
                    let matched = basis == bob_basis;
                    if matched {
                        detection.push(DetectionRecord {
                            basis,
                            expected: bit ^ bob_bit,
                            observed: announced_parity(announced, basis),
                        });
                    }
                    round.announcement = Some(announced);
                    round.role = MdiRole::Detection { matched };
                }
            }
            AlicePreparation::Entangled => {
                // Qubit 0 of the pair travels to Charlie, qubit 1 stays home.
                let (pair, _) = eve.intercept_qubit(make_bell(1)?, 0, rng)?;
                let pair = transmit_register_qubit(&pair, 0, &cfg.channel, rng)?;
                if let (Some(pair), Some(b)) = (pair, bob_photon) {
                    let branches = teleport_branches(&pair, &b)?;
                    let probs = branches.each_ref().map(|br| br.probability);
                    let actual = sample_index(&probs, rng);
                    let announced = if charlie_honest { branches[actual].outcome } else { random_outcome(rng) };
                    let mut photon = branches[actual].retained.clone().expect("sampled branch has support");
                    if announced != branches[actual].outcome {
                        // Alice undoes nothing she knows of: her correction
                        // follows the announcement, not the physical outcome.
                        photon = apply_pauli(branches[actual].outcome.teleport_correction(), &photon)?;
                        photon = apply_pauli(announced.teleport_correction(), &photon)?;
                    }
                    round.announcement = Some(announced);
                    round.role = MdiRole::Teleported;
                    teleported.push(Teleported { round: index, photon });
                }
            }
        }
        rounds.push(round);
    }
    let coincidences = rounds.iter().filter(|r| r.announcement.is_some()).count();
    events.push(Event::ForwardTransmission { arrived: coincidences });
    events.push(Event::EavesdroppingDetection {
        rounds: detection_total,
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

    let mut received = Vec::new();
    let mut q_bob = q * q;
    if abort.is_none() {
        let layout = assign_slots(teleported.len(), message.len(), cfg.check_bit_fraction)?;
        let values: Vec<u8> = layout
            .iter()
            .map(|slot| match slot {
                SlotKind::Message(p) => message[*p] & 1,
                _ => u8::from(rng.random_bool(0.5)),
            })
            .collect();
        events.push(Event::Encoding {
            message_bits: message.len(),
            check_bits: layout.iter().filter(|s| **s == SlotKind::Check).count(),
            filler_bits: layout.iter().filter(|s| **s == SlotKind::Filler).count(),
            masked: false,
        });

        let mut completed = 0;
        let mut checks = Vec::new();
        for ((t, slot), value) in teleported.iter().zip(&layout).zip(&values) {
            let round = &mut rounds[t.round];
            let op = if *value == 1 { PauliOp::IY } else { PauliOp::I };
            let encoded = send(apply_pauli(op, &t.photon)?, eve, &cfg.channel, rng);
            let reference_bit = u8::from(rng.random_bool(0.5));
            let reference = send(prepare(round.bob_basis, reference_bit), eve, &cfg.channel, rng);
            let (final_announcement, decoded) = match (encoded, reference) {
                (Some(a), Some(r)) => {
                    let announced = charlie_measures(&a, &r, charlie_honest, rng)?;
                    let parity = announced_parity(announced, round.bob_basis);
                    (Some(announced), Some(parity ^ round.bob_bit ^ reference_bit))
                }
                _ => (None, None),
            };
            if let Some(d) = decoded {
                completed += 1;
                match slot {
                    SlotKind::Message(p) => received.push((*p, d)),
                    SlotKind::Check => checks.push(CheckRecord {
                        sent: *value,
                        received: d,
                    }),
                    SlotKind::Filler => {}
                }
            }
            round.role = MdiRole::Encoded {
                slot: *slot,
                encoded_bit: *value,
                reference_bit,
                final_announcement,
                decoded,
            };
        }
        events.push(Event::ReturnTransmission { returned: completed });
        events.push(Event::ArrivalAnnouncement { positions: completed });
        let integrity = estimate_dber(&[], &checks);
        dber = dber.with_integrity(integrity.errors_e, integrity.n_e);
        if !layout.is_empty() {
            q_bob = completed as f64 / layout.len() as f64;
        }
    }
    let abort = abort.or_else(|| {
        let failed = dber.e.filter(|e| *e > cfg.qber_abort_threshold);
        events.push(Event::IntegrityCheck {
            e: dber.e,
            passed: failed.is_none(),
        });
        failed.map(|e| AbortReason::Integrity {
            e,
            threshold: cfg.qber_abort_threshold,
        })
    });
    received.sort_unstable();
    let (received_positions, received_bits) = received.into_iter().unzip();
    let capacity = measured_capacity(&dber, q_bob, &cfg.channel, false, cfg.capacity_mode)?;
    Ok(SessionTranscript {
        protocol: ProtocolKind::MdiDl04,
        sent_bits: message.to_vec(),
        received_bits,
        received_positions,
        dber,
        aborted: abort.is_some(),
        abort_reason: abort,
        capacity,
        events,
        warnings,
        rounds: cfg.record_rounds.then_some(RoundLog::Mdi(rounds)),
    })
}

fn sample_index<R: Rng + ?Sized>(probs: &[f64; 4], rng: &mut R) -> usize {
    let total: f64 = probs.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, p) in probs.iter().enumerate() {
        if u < *p {
            return i;
        }
        u -= p;
    }
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::bell_probabilities;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

/// Expected announcement distribution for a matched-basis detection round,
/// from the Bell-basis expansion of the prepared product state.
fn expected_detection_distribution(basis: Basis, alice_bit: u8, bob_bit: u8) -> [f64; 4] {
    let joint = prepare(basis, alice_bit)
        .to_vector()
        .tensor(&prepare(basis, bob_bit).to_vector())
        .expect("two qubits");
    bell_probabilities(&joint).expect("two qubits")
}

    #[test]
    fn parity_table_matches_bell_expansion() {
        for (basis, row) in MDI_PARITY_TABLE {
            for a in 0..2u8 {
                for b in 0..2u8 {
                    let dist = expected_detection_distribution(basis, a, b);
                    for (k, p) in dist.iter().enumerate() {
                        if *p > 1e-12 {
                            assert_eq!(row[k], a ^ b);
                            assert!((p - 0.5).abs() < 1e-12);
                        }
                    }
                    assert_eq!(
                        BellState::ALL.map(|o| o.parity(basis).unwrap()),
                        row
                    );
                }
            }
        }
    }

    #[test]
    fn ideal_honest_session_recovers_message() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let msg = crate::bits::from_bytes(b"MDI");
        let t = run_mdi_dl04(&MdiConfig::new(2000, ChannelParams::ideal()), &msg, &EveStrategy::None, true, &mut rng)
            .unwrap();
        assert!(!t.aborted, "{:?}", t.abort_reason);
        assert!(t.message_recovered());
        assert_eq!(t.dber.raw_detection_rate(), Some(0.0));
    }

    #[test]
    fn dishonest_relay_is_caught() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let t = run_mdi_dl04(&MdiConfig::new(2000, ChannelParams::ideal()), &[1, 0, 1], &EveStrategy::None, false, &mut rng)
            .unwrap();
        assert!(t.aborted);
        assert!(matches!(t.abort_reason, Some(AbortReason::Detection { .. })));
        assert!(t.event_position("encoding").is_none());
    }

    #[test]
    fn lossy_channel_still_decodes_arrived_bits_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cfg = MdiConfig::new(20_000, ChannelParams::default().with_length(10.0));
        let msg = vec![1u8; 200];
        let t = run_mdi_dl04(&cfg, &msg, &EveStrategy::None, true, &mut rng).unwrap();
        assert!(!t.aborted);
        assert_eq!(t.fidelity(), Some(1.0));
        assert!(t.received_bits.len() < msg.len());
    }
}
