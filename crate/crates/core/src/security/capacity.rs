use serde::{Deserialize, Serialize};

use super::{check_unit, SecurityError};
use crate::quantum::binary_entropy;

/// Which wiretap estimate the report uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CapacityMode {
    /// Detection in both X and Z: C_W = Q_Eve·h(ε_x + ε_z).
    TwoBasis,
    /// Encoding and detection in Z only: C_W = Q_Eve·h(ε_z).
    ZBasisOnly,
}

impl std::fmt::Display for CapacityMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CapacityMode::TwoBasis => "TwoBasis",
            CapacityMode::ZBasisOnly => "ZBasisOnly",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityInputs {
    pub q_bob: f64,
    pub q_eve: f64,
    /// QBER of the returned, encoded photons.
    pub e: f64,
    pub eps_x: f64,
    pub eps_z: f64,
}

/// Capacities in bits per channel use. `c_s` keeps the raw (possibly
/// negative) value; `c_s_clamped` is what can actually be transmitted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityReport {
    pub q_bob: f64,
    pub q_eve: f64,
    pub g: f64,
    pub e: f64,
    pub eps_x: f64,
    pub eps_z: f64,
    pub c_m: f64,
    pub c_w: f64,
    pub c_s: f64,
    pub c_s_clamped: f64,
    pub mode: CapacityMode,
}

impl CapacityReport {
    pub fn inputs(&self) -> CapacityInputs {
        CapacityInputs {
            q_bob: self.q_bob,
            q_eve: self.q_eve,
            e: self.e,
            eps_x: self.eps_x,
            eps_z: self.eps_z,
        }
    }

    pub fn is_secure(&self) -> bool {
        self.c_s > 0.0
    }
}

/// C_M = Q_Bob·(1 − h(e)).
pub fn main_capacity(q_bob: f64, e: f64) -> Result<f64, SecurityError> {
    check_unit("q_bob", q_bob, 1.0)?;
    check_unit("e", e, 1.0)?;
    Ok(q_bob * (1.0 - binary_entropy(e)?))
}

/// Two-basis wiretap bound C_W ≤ Q_Eve·h(ε_x + ε_z).
///
/// The entropy argument saturates at ½: beyond ε_x + ε_z = ½ Eve can hold a
/// full bit, so the bound is Q_Eve·h(min(ε_x + ε_z, ½)) and stays monotone.
pub fn wiretap_capacity_bound(q_eve: f64, eps_x: f64, eps_z: f64) -> Result<f64, SecurityError> {
    check_unit("q_eve", q_eve, 1.0)?;
    check_unit("eps_x", eps_x, 0.5)?;
    check_unit("eps_z", eps_z, 0.5)?;
    Ok(q_eve * binary_entropy((eps_x + eps_z).min(0.5))?)
}

/// Z-basis-only wiretap estimate Q_Eve·h(ε_z).
///
/// In the single-basis protocol this is a lower bound on the wiretap
/// capacity; it is used as the operating estimate, as in the 100 km fiber
/// demonstrations of that variant.
pub fn wiretap_capacity_zbasis(q_eve: f64, eps_z: f64) -> Result<f64, SecurityError> {
    check_unit("q_eve", q_eve, 1.0)?;
    check_unit("eps_z", eps_z, 0.5)?;
    Ok(q_eve * binary_entropy(eps_z)?)
}

pub fn secrecy_capacity(inputs: CapacityInputs, mode: CapacityMode) -> Result<CapacityReport, SecurityError> {
    let CapacityInputs {
        q_bob,
        q_eve,
        e,
        eps_x,
        eps_z,
    } = inputs;
    let c_m = main_capacity(q_bob, e)?;
    let c_w = match mode {
        CapacityMode::TwoBasis => wiretap_capacity_bound(q_eve, eps_x, eps_z)?,
        CapacityMode::ZBasisOnly => {
            check_unit("eps_x", eps_x, 0.5)?;
            wiretap_capacity_zbasis(q_eve, eps_z)?
        }
    };
    let g = if q_bob > 0.0 {
        q_eve / q_bob
    } else if q_eve == 0.0 {
        1.0
    } else {
        f64::INFINITY
    };
    let c_s = c_m - c_w;
    Ok(CapacityReport {
        q_bob,
        q_eve,
        g,
        e,
        eps_x,
        eps_z,
        c_m,
        c_w,
        c_s,
        c_s_clamped: c_s.max(0.0),
        mode,
    })
}

/// Recomputes a report with Q_Eve = Q_Bob, the effect of masking the
/// encoded bits with a local pad revealed only for arrived positions.
pub fn apply_incum(report: &CapacityReport) -> CapacityReport {
    let inputs = CapacityInputs {
        q_eve: report.q_bob,
        ..report.inputs()
    };
    secrecy_capacity(inputs, report.mode).expect("inputs were already validated")
}
