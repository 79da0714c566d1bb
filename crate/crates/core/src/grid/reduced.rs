//! Coordinates on the discrete divergence-free, no-slip velocity space.
//!
//! Every such field is the curl of a stream function vanishing on the wall
//! (simply connected cavity), so the columns of the curl matrix span exactly
//! the range of the Leray projector. In these coordinates the velocity Gram
//! matrix is `G = Cᵀ W C`, the viscous stiffness is `S = (DC)ᵀ Ŵ (DC)`, and the
//! rigid coupling vector is `m = Cᵀ W (e3 × x)`.

use nalgebra::DVector;
use nalgebra_sparse::CsrMatrix;

use super::DiscreteOperators;
use crate::error::SpectralError;
use crate::linalg::{spmv, spmv_t, weighted_gram, SpdFactor};

pub struct ReducedSpace {
    pub gram: CsrMatrix<f64>,
    pub stiffness: CsrMatrix<f64>,
    pub coupling: DVector<f64>,
    gram_factor: SpdFactor,
}

impl ReducedSpace {
    pub fn new(ops: &DiscreteOperators) -> Result<Self, SpectralError> {
        let n = ops.grid.n_nodes();
        let gram = weighted_gram(&ops.curl, ops.weights());
        let dc = &ops.edge_grad * &ops.curl;
        let stiffness = weighted_gram(&dc, &ops.edge_weights);
        let gram_factor = SpdFactor::new(&gram).map_err(|_| SpectralError::RankDeficient {
            rank: 0,
            expected: n,
        })?;
        let coupling = spmv_t(&ops.curl, &ops.rigid_field().component_mul(ops.weights()));
        let space = Self {
            gram,
            stiffness,
            coupling,
            gram_factor,
        };
        space.check_rank(ops)?;
        Ok(space)
    }

    /// Dimension of the divergence-free space: `(nx−1)(ny−1)`.
    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    /// Confirms that the basis spans the full divergence-free space:
    /// `dim = #interior faces − (#cells − 1)` and the Gram matrix is regular.
    fn check_rank(&self, ops: &DiscreteOperators) -> Result<(), SpectralError> {
        let g = &ops.grid;
        let interior = g.boundary.iter().filter(|&&b| !b).count();
        let expected = interior - (g.n_cells() - 1);
        if self.dim() != expected {
            return Err(SpectralError::RankDeficient {
                rank: self.dim(),
                expected,
            });
        }
        Ok(())
    }

    pub fn velocity(&self, ops: &DiscreteOperators, psi: &DVector<f64>) -> DVector<f64> {
        spmv(&ops.curl, psi)
    }

    /// Coordinates of the W-orthogonal projection of `v` onto the space.
    pub fn coords(&self, ops: &DiscreteOperators, v: &DVector<f64>) -> DVector<f64> {
        let rhs = spmv_t(&ops.curl, &v.component_mul(ops.weights()));
        self.gram_factor.solve(&rhs)
    }

    pub fn gram_solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.gram_factor.solve(b)
    }

    pub fn gram_apply(&self, psi: &DVector<f64>) -> DVector<f64> {
        spmv(&self.gram, psi)
    }

    pub fn stiffness_apply(&self, psi: &DVector<f64>) -> DVector<f64> {
        spmv(&self.stiffness, psi)
    }

    /// `‖v‖²_W` of the field with coordinates `psi`.
    pub fn norm_sq(&self, psi: &DVector<f64>) -> f64 {
        psi.dot(&self.gram_apply(psi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CavityGeometry;

    #[test]
    fn reduced_forms_match_face_quadratures() {
        let ops = DiscreteOperators::new(&CavityGeometry::unit_square(10)).unwrap();
        let rs = ReducedSpace::new(&ops).unwrap();
        assert_eq!(rs.dim(), 81);
        let psi = DVector::from_fn(rs.dim(), |i, _| (0.7 * i as f64).sin());
        let v = rs.velocity(&ops, &psi);
        assert!((rs.norm_sq(&psi) - ops.norm_sq(&v)).abs() < 1e-12 * ops.norm_sq(&v));
        let s = psi.dot(&rs.stiffness_apply(&psi));
        assert!((s - ops.grad_norm_sq(&v)).abs() < 1e-10 * s);
        assert!((rs.coupling.dot(&psi) - ops.quad_cross_moment(&v)).abs() < 1e-12);
        let back = rs.coords(&ops, &v);
        assert!((&back - &psi).amax() < 1e-10 * psi.amax());
    }

    #[test]
    fn coords_of_projection_equal_coords_of_field() {
        let ops = DiscreteOperators::new(&CavityGeometry::unit_square(9)).unwrap();
        let rs = ReducedSpace::new(&ops).unwrap();
        let mut v = ops.grid.sample(|x, y| [y.sin() + x * x, (2.0 * x).cos()]);
        ops.grid.mask_boundary(&mut v);
        let pv = ops.project(&v).unwrap();
        let a = rs.coords(&ops, &v);
        let b = rs.coords(&ops, &pv);
        assert!((&a - &b).amax() < 1e-9 * a.amax());
        let w = rs.velocity(&ops, &a);
        assert!((&w - &pv).amax() < 1e-9 * pv.amax());
    }
}
