//! Minimal quantum state algebra for single photons and small registers.
//!
//! Photons travel through the protocol hot paths symbolically as
//! [`PhotonKind::Prepared`] basis/bit pairs and are upgraded to explicit
//! amplitude vectors only where entanglement or arbitrary rotations force it.
//! Registers never exceed three qubits.
//!
//! Qubit ordering in every multi-qubit vector is big-endian: qubit 0 is the
//! most significant bit of the amplitude index.

mod bell;
mod density;
mod entropy;
mod photon;
mod state;

pub use bell::{bell_measure, bell_probabilities, make_bell, teleport, teleport_branches, BellState, TeleportBranch};
pub use density::{DensityMatrix, Subsystem};
pub use entropy::{binary_entropy, entropy_of_spectrum, von_neumann_entropy};
pub use photon::{apply_pauli, measure, prepare, Measurement, PhotonKind, PhotonState};
pub use state::{Basis, PauliOp, StateVector};

/// Complex amplitude type used throughout.
pub type C64 = nalgebra::Complex<f64>;

/// Tolerance on the squared norm of a state vector.
pub const NORM_TOLERANCE: f64 = 1e-12;

/// Tolerance for density matrix validation (hermiticity, trace, positivity).
pub const DENSITY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QuantumError {
    #[error("operation on a lost photon")]
    LostPhoton,
    #[error("state vector not normalized: squared norm {0}")]
    NotNormalized(f64),
    #[error("unsupported dimension {0}")]
    BadDimension(usize),
    #[error("qubit index {qubit} out of range for a {qubits}-qubit register")]
    QubitOutOfRange { qubit: usize, qubits: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not hermitian (max deviation {0})")]
    NotHermitian(f64),
    #[error("density matrix trace {0} is not 1")]
    BadTrace(f64),
    #[error("density matrix has negative eigenvalue {0}")]
    NotPositive(f64),
    #[error("probability {0} outside [0, 1]")]
    ProbabilityOutOfRange(f64),
    #[error("Bell state index {0} outside 1..=4")]
    BellIndex(u8),
}
