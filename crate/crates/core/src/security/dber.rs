use serde::{Deserialize, Serialize};

/// Detected and quantum bit error rates with their sample sizes.
///
/// Rates are `None` when no sample was available and are clipped to ½ for
/// use in the capacity formulas; the raw error counts are kept alongside.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DberEstimate {
    pub eps_x: Option<f64>,
    pub eps_z: Option<f64>,
    pub e: Option<f64>,
    pub n_x: usize,
    pub n_z: usize,
    pub n_e: usize,
    pub errors_x: usize,
    pub errors_z: usize,
    pub errors_e: usize,
}

impl DberEstimate {
    pub fn from_counts(errors_x: usize, n_x: usize, errors_z: usize, n_z: usize, errors_e: usize, n_e: usize) -> Self {
        let rate = |err: usize, n: usize| (n > 0).then(|| (err as f64 / n as f64).min(0.5));
        Self {
            eps_x: rate(errors_x, n_x),
            eps_z: rate(errors_z, n_z),
            e: rate(errors_e, n_e),
            n_x,
            n_z,
            n_e,
            errors_x,
            errors_z,
            errors_e,
        }
    }

    /// Unclipped detection error rate pooled over both bases.
    pub fn raw_detection_rate(&self) -> Option<f64> {
        let n = self.n_x + self.n_z;
        (n > 0).then(|| (self.errors_x + self.errors_z) as f64 / n as f64)
    }

    pub fn with_integrity(mut self, errors_e: usize, n_e: usize) -> Self {
        let other = Self::from_counts(0, 0, 0, 0, errors_e, n_e);
        self.e = other.e;
        self.n_e = n_e;
        self.errors_e = errors_e;
        self
    }

    /// Larger of the available detection rates.
    pub fn worst_detection_rate(&self) -> Option<f64> {
        match (self.eps_x, self.eps_z) {
            (Some(x), Some(z)) => Some(x.max(z)),
            (x, z) => x.or(z),
        }
    }
}
