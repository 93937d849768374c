//! Executable QSDC protocols: DL04 (optionally with INCUM masking) and
//! MDI-DL04, with intercept-resend adversaries and full session transcripts.

mod dl04;
mod eve;
mod mdi;
mod transcript;

pub use dl04::{run_dl04, Dl04Config};
pub use eve::{BasisPolicy, EveStrategy};
pub use mdi::{run_mdi_dl04, MdiConfig, MDI_PARITY_TABLE};
pub use transcript::{
    AbortReason, AlicePreparation, Dl04Role, Dl04Round, Event, MdiRole, MdiRound, ProtocolKind, RoundLog,
    SessionTranscript, SlotKind,
};

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelError, ChannelParams};
use crate::quantum::{Basis, QuantumError};
use crate::security::{secrecy_capacity, CapacityInputs, CapacityMode, CapacityReport, DberEstimate, SecurityError};

pub const DEFAULT_ABORT_THRESHOLD: f64 = 0.12;
pub const DEFAULT_CHECK_BIT_FRACTION: f64 = 0.1;
/// Below this many expected detection rounds the DBER estimate is flagged.
pub const MIN_RECOMMENDED_DETECTION_ROUNDS: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProtocolError {
    #[error("message of {needed} bits exceeds the {available} usable encoding slots")]
    MessageTooLong { needed: usize, available: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error(transparent)]
    Security(#[from] SecurityError),
}

/// One sifted eavesdropping-detection sample: what was prepared versus what
/// was inferred, in a common basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub basis: Basis,
    pub expected: u8,
    pub observed: u8,
}

/// A known bit carried on an encoded photon for integrity checking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub sent: u8,
    pub received: u8,
}

/// Counts flipped outcomes per basis; bases with no samples are marked
/// unavailable. Y-basis samples are ignored.
pub fn estimate_dber(detection: &[DetectionRecord], checks: &[CheckRecord]) -> DberEstimate {
    let (mut ex, mut nx, mut ez, mut nz) = (0, 0, 0, 0);
    for r in detection {
        let err = usize::from(r.expected != r.observed);
        match r.basis {
            Basis::X => {
                nx += 1;
                ex += err;
            }
            Basis::Z => {
                nz += 1;
                ez += err;
            }
            Basis::Y => {}
        }
    }
    let ee = checks.iter().filter(|c| c.sent != c.received).count();
    DberEstimate::from_counts(ex, nx, ez, nz, ee, checks.len())
}

fn validate_fraction(name: &str, v: f64, lo_open: f64, hi_open: f64) -> Result<(), ProtocolError> {
    if v > lo_open && v < hi_open {
        Ok(())
    } else {
        Err(ProtocolError::InvalidConfig(format!("{name} = {v} outside ({lo_open}, {hi_open})")))
    }
}

/// Slot layout over `available` encoding positions: every `period`-th slot
/// is a check bit, the message fills the rest in order, then filler.
fn assign_slots(available: usize, message_len: usize, check_bit_fraction: f64) -> Result<Vec<SlotKind>, ProtocolError> {
    let period = (1.0 / check_bit_fraction).round().max(2.0) as usize;
    let checks = available / period;
    let usable = available - checks;
    if message_len > usable {
        return Err(ProtocolError::MessageTooLong {
            needed: message_len,
            available: usable,
        });
    }
    let mut next = 0;
    Ok((0..available)
        .map(|j| {
            if j % period == period - 1 {
                SlotKind::Check
            } else if next < message_len {
                next += 1;
                SlotKind::Message(next - 1)
            } else {
                SlotKind::Filler
            }
        })
        .collect())
}

/// Capacity report from measured rates. Missing estimates are replaced by
/// the worst case ½; the detection rates feed the wiretap term.
fn measured_capacity(
    dber: &DberEstimate,
    q_bob: f64,
    channel: &ChannelParams,
    equal_reception: bool,
    mode: CapacityMode,
) -> Result<CapacityReport, ProtocolError> {
    let q_bob = q_bob.clamp(0.0, 1.0);
    let q_eve = if equal_reception {
        q_bob
    } else {
        channel.eve_reception_rate_for(q_bob).unwrap_or(1.0)
    };
    let inputs = CapacityInputs {
        q_bob,
        q_eve,
        e: dber.e.unwrap_or(0.5),
        eps_x: dber.eps_x.unwrap_or(0.5),
        eps_z: dber.eps_z.unwrap_or(0.5),
    };
    Ok(secrecy_capacity(inputs, mode)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn records(basis: Basis, total: usize, errors: usize) -> Vec<DetectionRecord> {
        (0..total)
            .map(|i| DetectionRecord {
                basis,
                expected: 0,
                observed: u8::from(i < errors),
            })
            .collect()
    }

    #[test]
    fn estimate_dber_counts() {
        let clean = estimate_dber(&records(Basis::Z, 10, 0), &[]);
        assert_eq!(clean.eps_z, Some(0.0));
        assert_eq!(clean.eps_x, None);
        assert_eq!(clean.e, None);

        let mut rounds = records(Basis::Z, 100, 5);
        rounds.extend(records(Basis::X, 60, 3));
        let checks = [CheckRecord { sent: 1, received: 0 }, CheckRecord { sent: 1, received: 1 }];
        let d = estimate_dber(&rounds, &checks);
        assert_eq!(d.eps_z, Some(0.05));
        assert_eq!(d.eps_x, Some(0.05));
        assert_eq!(d.e, Some(0.5));
        assert_eq!((d.n_z, d.n_x, d.n_e), (100, 60, 2));
    }

    #[test]
    fn slot_layout() {
        let slots = assign_slots(20, 10, 0.1).unwrap();
        assert_eq!(slots.iter().filter(|s| **s == SlotKind::Check).count(), 2);
        assert_eq!(slots[9], SlotKind::Check);
        assert_eq!(slots[10], SlotKind::Message(9));
        assert_eq!(slots.iter().filter(|s| **s == SlotKind::Filler).count(), 8);
        assert!(matches!(
            assign_slots(20, 19, 0.1),
            Err(ProtocolError::MessageTooLong { needed: 19, available: 18 })
        ));
    }
}
