use nalgebra::DMatrix;
use rand::Rng;

use super::{QuantumError, StateVector, C64, DENSITY_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    First,
    Second,
}

/// Hermitian, positive semidefinite, unit-trace matrix of dimension 2, 4 or 8.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    m: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn new(m: DMatrix<C64>) -> Result<Self, QuantumError> {
        let (rows, cols) = m.shape();
        if rows != cols {
            return Err(QuantumError::NotSquare { rows, cols });
        }
        if !matches!(rows, 2 | 4 | 8) {
            return Err(QuantumError::BadDimension(rows));
        }
        let herm_dev = (&m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm_dev > DENSITY_TOLERANCE {
            return Err(QuantumError::NotHermitian(herm_dev));
        }
        let trace = m.trace();
        if (trace.re - 1.0).abs() > DENSITY_TOLERANCE || trace.im.abs() > DENSITY_TOLERANCE {
            return Err(QuantumError::BadTrace(trace.re));
        }
        let rho = Self { m };
        let min_eig = rho.eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
        if min_eig < -DENSITY_TOLERANCE {
            return Err(QuantumError::NotPositive(min_eig));
        }
        Ok(rho)
    }

    pub fn from_pure(psi: &StateVector) -> Self {
        let v = nalgebra::DVector::from_column_slice(psi.amplitudes());
        Self { m: &v * v.adjoint() }
    }

    /// I/d.
    pub fn maximally_mixed(dim: usize) -> Result<Self, QuantumError> {
        let m = DMatrix::<C64>::identity(dim, dim) / C64::new(dim as f64, 0.0);
        Self::new(m)
    }

    /// Random full-rank state A·A†/tr(A·A†) with Gaussian A.
    pub fn random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<Self, QuantumError> {
        let cols: Vec<StateVector> = (0..dim)
            .map(|_| StateVector::random(dim, rng))
            .collect::<Result<_, _>>()?;
        let weights: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
        let total: f64 = weights.iter().sum();
        let mut m = DMatrix::<C64>::zeros(dim, dim);
        for (v, w) in cols.iter().zip(&weights) {
            let v = nalgebra::DVector::from_column_slice(v.amplitudes());
            m += (&v * v.adjoint()) * C64::new(w / total, 0.0);
        }
        // Exact hermiticity; the sum above may carry rounding in the imaginary diagonal.
        let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn trace(&self) -> f64 {
        self.m.trace().re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.m.clone().symmetric_eigenvalues().iter().copied().collect()
    }

    pub fn tensor(&self, other: &DensityMatrix) -> Result<DensityMatrix, QuantumError> {
        let dim = self.dim() * other.dim();
        if dim > 8 {
            return Err(QuantumError::BadDimension(dim));
        }
        Ok(Self {
            m: self.m.kronecker(&other.m),
        })
    }

    /// U ρ U† for a unitary of matching dimension.
    pub fn conjugate(&self, u: &DMatrix<C64>) -> Result<DensityMatrix, QuantumError> {
        if u.shape() != self.m.shape() {
            return Err(QuantumError::BadDimension(u.nrows()));
        }
        Ok(Self {
            m: u * &self.m * u.adjoint(),
        })
    }

    /// Equal-weight (or weighted) mixture of states of the same dimension.
    pub fn mix(parts: &[(f64, &DensityMatrix)]) -> Result<DensityMatrix, QuantumError> {
        let dim = parts.first().map(|(_, r)| r.dim()).unwrap_or(0);
        let mut m = DMatrix::<C64>::zeros(dim, dim);
        for (w, r) in parts {
            if r.dim() != dim {
                return Err(QuantumError::BadDimension(r.dim()));
            }
            m += &r.m * C64::new(*w, 0.0);
        }
        Self::new(m)
    }

    /// Traces out one qubit of a two-qubit state.
    pub fn partial_trace(&self, traced: Subsystem) -> Result<DensityMatrix, QuantumError> {
        if self.dim() != 4 {
            return Err(QuantumError::BadDimension(self.dim()));
        }
        self.partial_trace_dims(2, 2, traced)
    }

    /// Partial trace of a bipartite state with factor dimensions
    /// `dim_first × dim_second`.
    pub fn partial_trace_dims(
        &self,
        dim_first: usize,
        dim_second: usize,
        traced: Subsystem,
    ) -> Result<DensityMatrix, QuantumError> {
        if dim_first * dim_second != self.dim() {
            return Err(QuantumError::BadDimension(self.dim()));
        }
        let kept = match traced {
            Subsystem::First => dim_second,
            Subsystem::Second => dim_first,
        };
        let mut out = DMatrix::<C64>::zeros(kept, kept);
        for i in 0..kept {
            for j in 0..kept {
                out[(i, j)] = match traced {
                    Subsystem::Second => (0..dim_second)
                        .map(|k| self.m[(i * dim_second + k, j * dim_second + k)])
                        .sum(),
                    Subsystem::First => (0..dim_first)
                        .map(|k| self.m[(k * dim_second + i, k * dim_second + j)])
                        .sum(),
                };
            }
        }
        Self::new(out)
    }
}
