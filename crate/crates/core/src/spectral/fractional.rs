//! Fractional powers of symmetric positive definite operators, the graded
//! norms built on them, and the sampled nonlinearity-bound diagnostic.

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{HVector, PendulumSystem};
use crate::error::{Error, SpectralError};
use crate::linalg::{spmv, to_dense};

/// Generalized eigen-decomposition `K φ = λ G φ` with `G`-orthonormal `Φ`.
#[derive(Debug, Clone)]
pub struct GenEigen {
    pub values: DVector<f64>,
    /// Columns are `G`-orthonormal eigenvectors.
    pub vectors: DMatrix<f64>,
}

fn check_symmetric(m: &DMatrix<f64>, what: &str) -> Result<(), SpectralError> {
    if !m.is_square() {
        return Err(SpectralError::NotSpd {
            reason: format!("{what} is not square"),
        });
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    if (m - m.transpose()).amax() > 1e-10 * scale {
        return Err(SpectralError::NotSpd {
            reason: format!("{what} is not symmetric"),
        });
    }
    Ok(())
}

pub fn gen_eigen(stiffness: &DMatrix<f64>, gram: &DMatrix<f64>) -> Result<GenEigen, SpectralError> {
    check_symmetric(stiffness, "operator")?;
    check_symmetric(gram, "Gram matrix")?;
    let chol = gram
        .clone()
        .cholesky()
        .ok_or_else(|| SpectralError::NotSpd {
            reason: "Gram matrix is not positive definite".into(),
        })?;
    let l = chol.l();
    // B = L⁻¹ K L⁻ᵀ
    let y = l
        .solve_lower_triangular(stiffness)
        .ok_or_else(|| SpectralError::NotSpd {
            reason: "singular factor".into(),
        })?;
    let b = l
        .solve_lower_triangular(&y.transpose())
        .ok_or_else(|| SpectralError::NotSpd {
            reason: "singular factor".into(),
        })?;
    let b = (&b + b.transpose()) * 0.5;
    let eig = b.symmetric_eigen();
    let lt = l.transpose();
    let vectors = lt
        .solve_upper_triangular(&eig.eigenvectors)
        .ok_or_else(|| SpectralError::NotSpd {
            reason: "singular factor".into(),
        })?;
    // Sort ascending.
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(idx.len(), idx.iter().map(|&i| eig.eigenvalues[i]));
    let vectors =
        DMatrix::from_columns(&idx.iter().map(|&i| vectors.column(i)).collect::<Vec<_>>());
    Ok(GenEigen { values, vectors })
}

/// `A^α` for `A = G⁻¹K`, where `K` is symmetric positive definite and `G` the
/// Gram matrix of the inner product (`A` is `G`-self-adjoint).
pub fn frac_power(
    stiffness: &DMatrix<f64>,
    gram: &DMatrix<f64>,
    alpha: f64,
) -> Result<DMatrix<f64>, SpectralError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(SpectralError::AlphaOutOfRange { alpha });
    }
    let ge = gen_eigen(stiffness, gram)?;
    let lmin = ge.values.min();
    if !(lmin > 0.0) {
        return Err(SpectralError::NotSpd {
            reason: format!("smallest eigenvalue {lmin:e} is not positive"),
        });
    }
    let powered = DMatrix::from_diagonal(&ge.values.map(|l| l.powf(alpha)));
    Ok(&ge.vectors * powered * ge.vectors.transpose() * gram)
}

/// Cached eigenbasis of the Stokes operator `A0 = −μPΔ` on the
/// divergence-free space, for fast graded norms `‖A0^α v‖`.
pub struct StokesEigen {
    pub eigen: GenEigen,
    gram: nalgebra_sparse::CsrMatrix<f64>,
}

impl StokesEigen {
    pub fn new(sys: &PendulumSystem) -> Result<Self, SpectralError> {
        Self::with_viscosity(sys, sys.params.mu())
    }

    /// Stokes operator of `sys` with viscosity `mu` in place of the physical
    /// one; norms of inviscid runs are graded with `mu = 1`.
    pub fn with_viscosity(sys: &PendulumSystem, mu: f64) -> Result<Self, SpectralError> {
        let g = to_dense(&sys.reduced.gram);
        let k = to_dense(&sys.reduced.stiffness) * mu;
        Ok(Self {
            eigen: gen_eigen(&k, &g)?,
            gram: sys.reduced.gram.clone(),
        })
    }

    pub fn smallest(&self) -> f64 {
        self.eigen.values[0]
    }

    /// Spectral coefficients `Φᵀ G ψ`.
    pub fn coefficients(&self, psi: &DVector<f64>) -> DVector<f64> {
        self.eigen.vectors.tr_mul(&spmv(&self.gram, psi))
    }

    /// `‖A0^α v‖_W` for the velocity with stream-function coordinates `psi`.
    pub fn alpha_norm_psi(&self, psi: &DVector<f64>, alpha: f64) -> f64 {
        let c = self.coefficients(psi);
        c.iter()
            .zip(self.eigen.values.iter())
            .map(|(c, l)| (l.powf(alpha) * c).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// `(‖A0^α v‖, ‖A0 v‖)` from one coefficient evaluation.
    pub fn alpha_and_h2(&self, psi: &DVector<f64>, alpha: f64) -> (f64, f64) {
        let c = self.coefficients(psi);
        let mut sa = 0.0;
        let mut s1 = 0.0;
        for (c, l) in c.iter().zip(self.eigen.values.iter()) {
            sa += (l.powf(alpha) * c).powi(2);
            s1 += (l * c).powi(2);
        }
        (sa.sqrt(), s1.sqrt())
    }
}

/// `‖u‖_α = ‖A0^α v‖_W + |ω| + |γ|`.
pub fn alpha_norm(
    sys: &PendulumSystem,
    stokes: &StokesEigen,
    u: &HVector,
    alpha: f64,
) -> Result<f64, SpectralError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(SpectralError::AlphaOutOfRange { alpha });
    }
    let psi = sys.reduced.coords(&sys.ops, &u.v);
    Ok(stokes.alpha_norm_psi(&psi, alpha) + u.omega.abs() + u.gamma[0].hypot(u.gamma[1]))
}

/// Sampled ratio
/// `‖P(v1·∇v1 − v2·∇v2)‖ / [(‖A0^α v1‖ + ‖A0^α v2‖) ‖A0^α (v1 − v2)‖]`;
/// `None` when the denominator vanishes.
pub fn kato_diagnostic(
    sys: &PendulumSystem,
    stokes: &StokesEigen,
    v1: &DVector<f64>,
    v2: &DVector<f64>,
    alpha: f64,
) -> Result<Option<f64>, Error> {
    if !(0.5..=1.0).contains(&alpha) {
        return Err(SpectralError::AlphaOutOfRange { alpha }.into());
    }
    let ops = &sys.ops;
    let p1 = sys.reduced.coords(ops, v1);
    let p2 = sys.reduced.coords(ops, v2);
    let n1 = stokes.alpha_norm_psi(&p1, alpha);
    let n2 = stokes.alpha_norm_psi(&p2, alpha);
    let nd = stokes.alpha_norm_psi(&(&p1 - &p2), alpha);
    let den = (n1 + n2) * nd;
    if !(den > 0.0) {
        return Ok(None);
    }
    let num = ops.project(&(ops.advection(v1) - ops.advection(v2)))?;
    Ok(Some(ops.norm_sq(&num).sqrt() / den))
}
