use serde::{Deserialize, Serialize};

use crate::bits::serde_bits;
use crate::quantum::{Basis, BellState};
use crate::security::{CapacityReport, DberEstimate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProtocolKind {
    Dl04,
    Dl04Incum,
    MdiDl04,
}

/// Why a session stopped before delivering the message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stage", rename_all = "snake_case")]
pub enum AbortReason {
    /// The eavesdropping check before encoding failed.
    Detection { eps_x: Option<f64>, eps_z: Option<f64>, threshold: f64 },
    /// No basis-matched detection round survived, so the link is uncertified.
    NoDetectionRounds,
    /// The error rate on the returned check bits was intolerable.
    Integrity { e: f64, threshold: f64 },
}

/// Ordered session milestones. Their order in a transcript is the order the
/// protocol executed them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Initialization { photons: usize },
    ForwardTransmission { arrived: usize },
    EavesdroppingDetection { rounds: usize, matched_rounds: usize },
    DetectionDecision { passed: bool },
    Encoding { message_bits: usize, check_bits: usize, filler_bits: usize, masked: bool },
    ReturnTransmission { returned: usize },
    ArrivalAnnouncement { positions: usize },
    PadAnnouncement { revealed: usize },
    IntegrityCheck { e: Option<f64>, passed: bool },
}

impl Event {
    pub fn name(&self) -> &'static str {
        match self {
            Event::Initialization { .. } => "initialization",
            Event::ForwardTransmission { .. } => "forward_transmission",
            Event::EavesdroppingDetection { .. } => "eavesdropping_detection",
            Event::DetectionDecision { .. } => "detection_decision",
            Event::Encoding { .. } => "encoding",
            Event::ReturnTransmission { .. } => "return_transmission",
            Event::ArrivalAnnouncement { .. } => "arrival_announcement",
            Event::PadAnnouncement { .. } => "pad_announcement",
            Event::IntegrityCheck { .. } => "integrity_check",
        }
    }
}

/// What an encoding slot carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "position", rename_all = "snake_case")]
pub enum SlotKind {
    Message(usize),
    Check,
    Filler,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "snake_case")]
pub enum Dl04Role {
    /// Lost on the way to Alice.
    Lost,
    /// Measured by Alice for eavesdropping detection.
    Detection { alice_basis: Basis, outcome: u8 },
    /// Arrived but never encoded (the session aborted first).
    Retained,
    Encoded {
        slot: SlotKind,
        /// The bit Alice imprinted with iY (after masking, if any).
        encoded_bit: u8,
        returned: bool,
        bob_outcome: Option<u8>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dl04Round {
    pub index: usize,
    pub bob_basis: Basis,
    pub bob_bit: u8,
    pub eve_forward: bool,
    pub eve_return: bool,
    #[serde(flatten)]
    pub role: Dl04Role,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlicePreparation {
    Entangled,
    Single { basis: Basis, bit: u8 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "snake_case")]
pub enum MdiRole {
    /// A photon did not reach Charlie; no Bell measurement.
    NoCoincidence,
    /// Single-photon pair used for eavesdropping detection.
    Detection { matched: bool },
    /// Bob's state teleported onto Alice's retained photon; not encoded.
    Teleported,
    Encoded {
        slot: SlotKind,
        encoded_bit: u8,
        reference_bit: u8,
        final_announcement: Option<BellState>,
        decoded: Option<u8>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdiRound {
    pub index: usize,
    pub alice: AlicePreparation,
    pub bob_basis: Basis,
    pub bob_bit: u8,
    pub announcement: Option<BellState>,
    #[serde(flatten)]
    pub role: MdiRole,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "protocol", content = "rounds", rename_all = "snake_case")]
pub enum RoundLog {
    Dl04(Vec<Dl04Round>),
    Mdi(Vec<MdiRound>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionTranscript {
    pub protocol: ProtocolKind,
    #[serde(with = "serde_bits")]
    pub sent_bits: Vec<u8>,
    /// Bob's recovered bits for the message positions that reached him,
    /// aligned with `received_positions`.
    #[serde(with = "serde_bits")]
    pub received_bits: Vec<u8>,
    pub received_positions: Vec<usize>,
    pub dber: DberEstimate,
    pub aborted: bool,
    pub abort_reason: Option<AbortReason>,
    pub capacity: CapacityReport,
    pub events: Vec<Event>,
    pub warnings: Vec<String>,
    pub rounds: Option<RoundLog>,
}

impl SessionTranscript {
    /// Fraction of received message bits equal to the sent ones.
    pub fn fidelity(&self) -> Option<f64> {
        if self.received_bits.is_empty() {
            return None;
        }
        let good = self
            .received_positions
            .iter()
            .zip(&self.received_bits)
            .filter(|(p, b)| self.sent_bits[**p] == **b)
            .count();
        Some(good as f64 / self.received_bits.len() as f64)
    }

    /// Bob's view of the message, `None` where the carrier was lost.
    pub fn recovered_message(&self) -> Vec<Option<u8>> {
        let mut out = vec![None; self.sent_bits.len()];
        for (p, b) in self.received_positions.iter().zip(&self.received_bits) {
            out[*p] = Some(*b);
        }
        out
    }

    /// True when every message bit arrived intact and the session completed.
    pub fn message_recovered(&self) -> bool {
        !self.aborted
            && self.received_bits.len() == self.sent_bits.len()
            && self.fidelity().is_none_or(|f| f == 1.0)
    }

    pub fn event_position(&self, name: &str) -> Option<usize> {
        self.events.iter().position(|e| e.name() == name)
    }
}
