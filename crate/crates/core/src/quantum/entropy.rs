use super::{DensityMatrix, QuantumError, DENSITY_TOLERANCE};

/// Shannon binary entropy in bits, h(0) = h(1) = 0.
pub fn binary_entropy(p: f64) -> Result<f64, QuantumError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(QuantumError::ProbabilityOutOfRange(p));
    }
    if p == 0.0 || p == 1.0 {
        return Ok(0.0);
    }
    Ok(-p * p.log2() - (1.0 - p) * (1.0 - p).log2())
}

/// −Σ λ log₂ λ, with eigenvalues below the clamping threshold treated as 0.
pub fn entropy_of_spectrum(eigenvalues: impl IntoIterator<Item = f64>) -> f64 {
    eigenvalues
        .into_iter()
        .filter(|&l| l > DENSITY_TOLERANCE)
        .map(|l| -l * l.log2())
        .sum::<f64>()
        .max(0.0)
}

/// Von Neumann entropy in bits.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    entropy_of_spectrum(rho.eigenvalues())
}
