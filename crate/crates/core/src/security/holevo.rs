use nalgebra::{DMatrix, Matrix2, Matrix4, SVector};
use serde::{Deserialize, Serialize};

use super::{check_unit, SecurityError};
use crate::quantum::{entropy_of_spectrum, von_neumann_entropy, BellState, DensityMatrix, PauliOp, C64};

const CONSTRAINT_TOLERANCE: f64 = 1e-9;
const GRID_POINTS: usize = 1000;
const GOLDEN_TOLERANCE: f64 = 1e-10;

/// Eve's attack on the Bell-diagonal pair: weights λᵢ of
/// |Ψ_ABE⟩ = Σ √λᵢ |Φᵢ⟩_AB |Eᵢ⟩_E, with the detected error rates they imply.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolevoProblem {
    pub lambdas: [f64; 4],
    /// Probability that Alice encodes 0 with the identity.
    pub p_encode: f64,
    pub eps_x: f64,
    pub eps_z: f64,
}

impl HolevoProblem {
    pub fn new(lambdas: [f64; 4], eps_x: f64, eps_z: f64) -> Result<Self, SecurityError> {
        let p = Self {
            lambdas,
            p_encode: 0.5,
            eps_x,
            eps_z,
        };
        p.validate()?;
        Ok(p)
    }

    /// Derives (ε_x, ε_z) = (λ₂ + λ₄, λ₃ + λ₄).
    pub fn from_lambdas(lambdas: [f64; 4]) -> Result<Self, SecurityError> {
        Self::new(lambdas, lambdas[1] + lambdas[3], lambdas[2] + lambdas[3])
    }

    /// The member of the one-parameter feasible family with the given λ₄.
    pub fn from_lambda4(eps_x: f64, eps_z: f64, lambda4: f64) -> Result<Self, SecurityError> {
        let l = [1.0 - eps_x - eps_z + lambda4, eps_x - lambda4, eps_z - lambda4, lambda4];
        // Snap rounding residue at the interval ends.
        let l = l.map(|x| if x < 0.0 && x > -CONSTRAINT_TOLERANCE { 0.0 } else { x });
        Self::new(l, eps_x, eps_z)
    }

    pub fn with_p_encode(mut self, p: f64) -> Result<Self, SecurityError> {
        self.p_encode = check_unit("p_encode", p, 1.0)?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), SecurityError> {
        let l = self.lambdas;
        if l.iter().any(|x| !(*x >= 0.0)) {
            return Err(SecurityError::Constraint(format!("negative weight in {l:?}")));
        }
        if (l.iter().sum::<f64>() - 1.0).abs() > CONSTRAINT_TOLERANCE {
            return Err(SecurityError::Constraint(format!("weights {l:?} do not sum to 1")));
        }
        if (l[1] + l[3] - self.eps_x).abs() > CONSTRAINT_TOLERANCE {
            return Err(SecurityError::Constraint(format!("λ2+λ4 != eps_x = {}", self.eps_x)));
        }
        if (l[2] + l[3] - self.eps_z).abs() > CONSTRAINT_TOLERANCE {
            return Err(SecurityError::Constraint(format!("λ3+λ4 != eps_z = {}", self.eps_z)));
        }
        check_unit("p_encode", self.p_encode, 1.0)?;
        Ok(())
    }

    /// Swaps the roles of the X and Z error rates (λ₂ ↔ λ₃).
    pub fn swapped(&self) -> Self {
        let [a, b, c, d] = self.lambdas;
        Self {
            lambdas: [a, c, b, d],
            eps_x: self.eps_z,
            eps_z: self.eps_x,
            ..*self
        }
    }
}

/// |Ψ_ABE⟩ with Eve's register four-dimensional and |Eᵢ⟩ its computational
/// basis. Amplitude index is a·8 + b·4 + e.
fn joint_state(lambdas: &[f64; 4]) -> [f64; 16] {
    let mut psi = [0.0; 16];
    for (i, bell) in BellState::ALL.iter().enumerate() {
        let w = lambdas[i].sqrt();
        for (ab, amp) in bell.vector().amplitudes().iter().enumerate() {
            psi[ab * 4 + i] += w * amp.re;
        }
    }
    psi
}

/// ρ_AE = Tr_B |Ψ_ABE⟩⟨Ψ_ABE| as an 8×8 matrix indexed a·4 + e.
fn rho_ae(lambdas: &[f64; 4]) -> Result<DensityMatrix, SecurityError> {
    let psi = joint_state(lambdas);
    let mut m = DMatrix::<C64>::zeros(8, 8);
    for (row, col) in (0..8).flat_map(|r| (0..8).map(move |c| (r, c))) {
        let (a, e) = (row / 4, row % 4);
        let (a2, e2) = (col / 4, col % 4);
        let v: f64 = (0..2).map(|b| psi[a * 8 + b * 4 + e] * psi[a2 * 8 + b * 4 + e2]).sum();
        m[(row, col)] = C64::new(v, 0.0);
    }
    Ok(DensityMatrix::new(m)?)
}

fn encoding_on_a() -> DMatrix<C64> {
    let y: Matrix2<C64> = PauliOp::IY.matrix();
    let y = DMatrix::from_fn(2, 2, |r, c| y[(r, c)]);
    y.kronecker(&DMatrix::<C64>::identity(4, 4))
}

/// Holevo quantity χ = S(Σ p_k ρᵏ) − Σ p_k S(ρᵏ) in bits, with ρ⁰ = ρ_AE and
/// ρ¹ = (iY ⊗ I) ρ_AE (iY ⊗ I)†, built from explicit 8×8 density matrices.
pub fn holevo_quantity(prob: &HolevoProblem) -> Result<f64, SecurityError> {
    prob.validate()?;
    let rho0 = rho_ae(&prob.lambdas)?;
    let rho1 = rho0.conjugate(&encoding_on_a())?;
    let p = prob.p_encode;
    let avg = DensityMatrix::mix(&[(p, &rho0), (1.0 - p, &rho1)])?;
    let chi = von_neumann_entropy(&avg) - p * von_neumann_entropy(&rho0) - (1.0 - p) * von_neumann_entropy(&rho1);
    Ok(chi.clamp(0.0, 1.0))
}

/// Same quantity through Gram matrices of the Tr_B decomposition.
///
/// ρ⁰ = Σ_b |v_b⟩⟨v_b| with v_b = (⟨b|_B ⊗ I)|Ψ_ABE⟩, so the nonzero spectra
/// of ρ⁰ and of the encoded mixture equal those of the 2×2 and 4×4 Gram
/// matrices of {v_b} and {√p v_b, √(1−p) Y v_b}. All amplitudes are real.
pub fn holevo_quantity_gram(prob: &HolevoProblem) -> f64 {
    let psi = joint_state(&prob.lambdas);
    let v = |b: usize| SVector::<f64, 8>::from_fn(|ae, _| psi[(ae / 4) * 8 + b * 4 + ae % 4]);
    // iY on A: |0⟩ → −|1⟩, |1⟩ → |0⟩.
    let y = |w: &SVector<f64, 8>| SVector::<f64, 8>::from_fn(|ae, _| if ae < 4 { w[ae + 4] } else { -w[ae - 4] });
    let (v0, v1) = (v(0), v(1));
    let p = prob.p_encode;
    let (sp, sq) = (p.sqrt(), (1.0 - p).sqrt());
    let ws = [v0 * sp, v1 * sp, y(&v0) * sq, y(&v1) * sq];
    let gram4 = Matrix4::from_fn(|i, j| ws[i].dot(&ws[j]));
    let gram2 = Matrix2::new(v0.dot(&v0), v0.dot(&v1), v1.dot(&v0), v1.dot(&v1));
    let s_avg = entropy_of_spectrum(gram4.symmetric_eigenvalues().iter().copied());
    // ρ¹ is unitarily equivalent to ρ⁰.
    let s_rho = entropy_of_spectrum(gram2.symmetric_eigenvalues().iter().copied());
    (s_avg - s_rho).clamp(0.0, 1.0)
}

/// Maximizes χ over the attacks consistent with (ε_x, ε_z).
///
/// Fixing both error rates leaves λ₄ ∈ [max(0, ε_x + ε_z − 1), min(ε_x, ε_z)]
/// free. A uniform grid locates the best cell, golden-section search refines
/// it, and the winner is re-evaluated with the explicit density matrices.
pub fn max_holevo(eps_x: f64, eps_z: f64) -> Result<(f64, HolevoProblem), SecurityError> {
    check_unit("eps_x", eps_x, 1.0)?;
    check_unit("eps_z", eps_z, 1.0)?;
    if eps_x + eps_z > 1.0 + CONSTRAINT_TOLERANCE {
        return Err(SecurityError::Infeasible { eps_x, eps_z });
    }
    let lo = (eps_x + eps_z - 1.0).max(0.0);
    let hi = eps_x.min(eps_z);
    let f = |l4: f64| {
        HolevoProblem::from_lambda4(eps_x, eps_z, l4.clamp(lo, hi))
            .map(|p| holevo_quantity_gram(&p))
            .unwrap_or(f64::NEG_INFINITY)
    };

    let mut best = (f(lo), lo);
    if hi > lo {
        let step = (hi - lo) / GRID_POINTS as f64;
        let grid: Vec<f64> = (0..=GRID_POINTS).map(|i| lo + step * i as f64).collect();
        let (idx, val) = grid
            .iter()
            .map(|&x| f(x))
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
        best = (val, grid[idx]);
        let a = grid[idx.saturating_sub(1)];
        let b = grid[(idx + 1).min(GRID_POINTS)];
        let x = golden_max(&f, a, b);
        let fx = f(x);
        if fx > best.0 {
            best = (fx, x);
        }
    }
    let argmax = HolevoProblem::from_lambda4(eps_x, eps_z, best.1)?;
    Ok((holevo_quantity(&argmax)?, argmax))
}

fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > GOLDEN_TOLERANCE {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::binary_entropy;
    use proptest::prelude::*;

    // Frozen from an independent numpy construction of |Ψ_ABE⟩, Tr_B and
    // eigen-decomposition (λ → χ).
    const REFERENCE: [([f64; 4], f64); 7] = [
        ([1.0, 0.0, 0.0, 0.0], 0.0),
        ([0.5, 0.0, 0.0, 0.5], 0.0),
        ([0.9, 0.05, 0.05, 0.0], 0.468_995_593_589_281_33),
        ([0.7, 0.1, 0.15, 0.05], 0.811_278_124_459_132_7),
        ([0.5, 0.5, 0.0, 0.0], 1.0),
        ([0.6, 0.1, 0.1, 0.2], 0.721_928_094_887_362_3),
        ([0.85, 0.05, 0.05, 0.05], 0.468_995_593_589_280_9),
    ];

    #[test]
    fn reference_values() {
        for (l, want) in REFERENCE {
            let p = HolevoProblem::from_lambdas(l).unwrap();
            let explicit = holevo_quantity(&p).unwrap();
            assert!((explicit - want).abs() < 1e-9, "{l:?}: {explicit} vs {want}");
            assert!((holevo_quantity_gram(&p) - want).abs() < 1e-9);
        }
    }

    #[test]
    fn rho_ae_is_a_valid_state_with_maximally_mixed_alice() {
        let rho = rho_ae(&[0.7, 0.1, 0.15, 0.05]).unwrap();
        let alice = rho.partial_trace_dims(2, 4, crate::quantum::Subsystem::Second).unwrap();
        let m = alice.matrix();
        assert!((m[(0, 0)].re - 0.5).abs() < 1e-12 && m[(0, 1)].norm() < 1e-12);
    }

    #[test]
    fn constraint_violations_are_rejected() {
        assert!(HolevoProblem::new([0.9, 0.05, 0.05, 0.0], 0.1, 0.05).is_err());
        assert!(HolevoProblem::from_lambdas([0.9, 0.2, 0.0, 0.0]).is_err());
        assert!(HolevoProblem::from_lambdas([1.1, -0.1, 0.0, 0.0]).is_err());
        assert!(max_holevo(0.7, 0.6).is_err());
        assert!(max_holevo(-0.1, 0.0).is_err());
    }

    #[test]
    fn max_holevo_values() {
        let (v, p) = max_holevo(0.0, 0.0).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(p.lambdas, [1.0, 0.0, 0.0, 0.0]);

        let (v, _) = max_holevo(0.05, 0.05).unwrap();
        let bound = binary_entropy(0.1).unwrap();
        assert!(v <= bound + 1e-9);
        // The bound is attained within optimizer resolution.
        assert!(bound - v < 1e-9, "gap {}", bound - v);

        let (v, _) = max_holevo(0.25, 0.25).unwrap();
        assert!(v <= 1.0);
        let (v, _) = max_holevo(0.5, 0.5).unwrap();
        assert!((v - 1.0).abs() < 1e-9);
    }

    #[test]
    fn encoding_probability_changes_the_ensemble() {
        let p = HolevoProblem::from_lambdas([0.5, 0.5, 0.0, 0.0]).unwrap();
        let skewed = p.with_p_encode(0.9).unwrap();
        let want = binary_entropy(0.9).unwrap();
        assert!((holevo_quantity(&skewed).unwrap() - want).abs() < 1e-9);
        assert!((holevo_quantity_gram(&skewed) - want).abs() < 1e-9);
    }

    fn lambdas() -> impl Strategy<Value = [f64; 4]> {
        prop::array::uniform4(0.0..1.0f64).prop_filter("nonzero", |w| w.iter().sum::<f64>() > 1e-3).prop_map(|w| {
            let s: f64 = w.iter().sum();
            w.map(|x| x / s)
        })
    }

    proptest! {
        #[test]
        fn gram_route_matches_explicit_route(l in lambdas(), p in 0.0..=1.0f64) {
            let prob = HolevoProblem::from_lambdas(l).unwrap().with_p_encode(p).unwrap();
            prop_assert!((holevo_quantity(&prob).unwrap() - holevo_quantity_gram(&prob)).abs() < 1e-8);
        }

        #[test]
        fn symmetric_under_basis_swap(l in lambdas()) {
            let prob = HolevoProblem::from_lambdas(l).unwrap();
            let a = holevo_quantity(&prob).unwrap();
            let b = holevo_quantity(&prob.swapped()).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }
}
