use nalgebra::{DMatrix, DVector};

use super::report::DENSE_LIMIT;
use crate::dynamics::{CoupledPencil, PendulumSystem};
use crate::error::SpectralError;
use crate::linalg::to_dense;

/// Representation of `L` in reduced coordinates `(ψ, ω, γ1, γ2)`.
pub enum LOperator<'a> {
    /// Explicit matrix. For massless liquid (`ρ = 0`) only the rigid block on
    /// `(ω, γ1, γ2)` is kept, since the velocity decouples.
    Dense {
        matrix: DMatrix<f64>,
        rigid_only: bool,
    },
    /// Implicit `M⁻¹K`, used with shift-invert Arnoldi on large grids.
    Pencil(CoupledPencil<'a>),
}

impl LOperator<'_> {
    pub fn dim(&self) -> usize {
        match self {
            LOperator::Dense { matrix, .. } => matrix.nrows(),
            LOperator::Pencil(p) => p.dim(),
        }
    }

    /// Index of `γ1` (the kernel direction) in this representation.
    pub fn kernel_index(&self) -> usize {
        match self {
            LOperator::Dense { matrix, rigid_only } => {
                if *rigid_only {
                    1
                } else {
                    matrix.nrows() - 2
                }
            }
            LOperator::Pencil(p) => p.gamma_index(),
        }
    }

    /// `(0, 0, e1)` in this representation.
    pub fn kernel_vector(&self) -> DVector<f64> {
        let mut x = DVector::zeros(self.dim());
        x[self.kernel_index()] = 1.0;
        x
    }
}

/// Builds `L`: dense when the reduced dimension is at most [`DENSE_LIMIT`]
/// (or the liquid is massless), implicit otherwise.
pub fn assemble_l(sys: &PendulumSystem) -> Result<LOperator<'_>, SpectralError> {
    let pen = CoupledPencil::new(sys);
    if sys.params.rho() == 0.0 {
        return Ok(LOperator::Dense {
            matrix: rigid_block(sys),
            rigid_only: true,
        });
    }
    if pen.dim() > DENSE_LIMIT {
        return Ok(LOperator::Pencil(pen));
    }
    Ok(LOperator::Dense {
        matrix: dense_l(&pen)?,
        rigid_only: false,
    })
}

/// `L` on `(ω, γ1, γ2)` for a massless liquid: `C_B ω̇ = β²γ2`, `γ̇2 = −ξω`.
fn rigid_block(sys: &PendulumSystem) -> DMatrix<f64> {
    let p = &sys.params;
    let xi = sys.xi();
    DMatrix::from_row_slice(
        3,
        3,
        &[
            0.0,
            0.0,
            -p.beta_sq() / p.c_total(),
            0.0,
            0.0,
            0.0,
            xi,
            0.0,
            0.0,
        ],
    )
}

/// Dense `M⁻¹K`.
pub(crate) fn dense_l(pen: &CoupledPencil<'_>) -> Result<DMatrix<f64>, SpectralError> {
    let n = pen.n_psi();
    let dim = pen.dim();
    let m = pen.factor(1.0, 0.0)?;
    let p = &pen.sys.params;
    let mut k = DMatrix::zeros(dim, dim);
    let s = to_dense(&pen.sys.reduced.stiffness) * p.mu();
    k.view_mut((0, 0), (n, n)).copy_from(&s);
    k[(n, n + 2)] = -p.beta_sq();
    k[(n + 2, n)] = pen.sys.xi();
    let mut l = DMatrix::zeros(dim, dim);
    for j in 0..dim {
        let col = k.column(j).into_owned();
        if col.amax() == 0.0 {
            continue;
        }
        l.set_column(j, &m.solve(&col));
    }
    Ok(l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        derive_params, derive_rigid_limit_params, CavityGeometry, EquilibriumSign, RawParams,
    };
    use nalgebra::Complex;

    #[test]
    fn rigid_limit_block_eigenvalues() {
        let raw = RawParams {
            rho: 0.0,
            ..RawParams::default()
        };
        let p = derive_rigid_limit_params(&raw, &CavityGeometry::unit_square(8)).unwrap();
        for (sign, expect) in [
            (EquilibriumSign::Lower, Complex::new(0.0, 1.0)),
            (EquilibriumSign::Upper, Complex::new(1.0, 0.0)),
        ] {
            let sys = PendulumSystem::new(p, sign).unwrap();
            let LOperator::Dense { matrix, .. } = assemble_l(&sys).unwrap() else {
                panic!("expected dense")
            };
            let ev = matrix.complex_eigenvalues();
            let w = (p.beta_sq() / p.c_total()).sqrt();
            let hits = ev
                .iter()
                .filter(|z| (**z - expect * w).norm() < 1e-12 || (**z + expect * w).norm() < 1e-12);
            assert_eq!(hits.count(), 2);
        }
    }

    #[test]
    fn kernel_vector_is_annihilated() {
        let p = derive_params(&RawParams::default(), &CavityGeometry::unit_square(8)).unwrap();
        let sys = PendulumSystem::new(p, EquilibriumSign::Lower).unwrap();
        let l = assemble_l(&sys).unwrap();
        let LOperator::Dense { matrix, .. } = &l else {
            panic!()
        };
        assert_eq!((matrix * l.kernel_vector()).amax(), 0.0);
    }
}
