//! Secrecy capacity of the QSDC wiretap channel.
//!
//! Closed-form main, wiretap and secrecy capacities live in [`capacity`]; the
//! numerical Holevo bound on Eve's information, which the closed-form
//! two-basis wiretap bound is checked against, lives in [`holevo`].

mod capacity;
mod dber;
mod holevo;

pub use capacity::{
    apply_incum, main_capacity, secrecy_capacity, wiretap_capacity_bound, wiretap_capacity_zbasis,
    CapacityInputs, CapacityMode, CapacityReport,
};
pub use dber::DberEstimate;
pub use holevo::{holevo_quantity, holevo_quantity_gram, max_holevo, HolevoProblem};

use crate::quantum::QuantumError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SecurityError {
    #[error("{name} = {value} is out of range")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("no attack parameters satisfy eps_x = {eps_x}, eps_z = {eps_z}")]
    Infeasible { eps_x: f64, eps_z: f64 },
    #[error("attack parameters violate their constraints: {0}")]
    Constraint(String),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
}

pub(crate) fn check_unit(name: &'static str, value: f64, max: f64) -> Result<f64, SecurityError> {
    if (0.0..=max).contains(&value) {
        Ok(value)
    } else {
        Err(SecurityError::OutOfRange { name, value })
    }
}
