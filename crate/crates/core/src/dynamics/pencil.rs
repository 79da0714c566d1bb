//! The pencil `(K, M)` of the linearization in reduced coordinates
//! `x = (ψ, ω, γ1, γ2)`: `M ẋ + K x = F(x)`, with `M` the inertia operator and
//! `K = Ã + B̃`.
//!
//! ```text
//! M x = (ρGψ + ρmω,  ρmᵀψ + Cω,  γ1,  γ2)
//! K x = (μSψ,        −β²γ2,      0,   ξω)
//! ```

use nalgebra::{DMatrix, DVector};

use super::{HVector, PendulumSystem};
use crate::error::LinalgError;
use crate::linalg::{sp_add, spmv, BorderedFactor};

pub struct CoupledPencil<'a> {
    pub sys: &'a PendulumSystem,
}

impl<'a> CoupledPencil<'a> {
    pub fn new(sys: &'a PendulumSystem) -> Self {
        Self { sys }
    }

    pub fn n_psi(&self) -> usize {
        self.sys.reduced.dim()
    }

    pub fn dim(&self) -> usize {
        self.n_psi() + 3
    }

    pub fn omega_index(&self) -> usize {
        self.n_psi()
    }

    pub fn gamma_index(&self) -> usize {
        self.n_psi() + 1
    }

    pub fn apply_m(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.n_psi();
        let p = &self.sys.params;
        let m = &self.sys.reduced.coupling;
        let psi = x.rows(0, n).into_owned();
        let omega = x[n];
        let mut out = DVector::zeros(n + 3);
        let top = self.sys.reduced.gram_apply(&psi) * p.rho() + m * (p.rho() * omega);
        out.rows_mut(0, n).copy_from(&top);
        out[n] = p.rho() * m.dot(&psi) + p.c_total() * omega;
        out[n + 1] = x[n + 1];
        out[n + 2] = x[n + 2];
        out
    }

    pub fn apply_k(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.n_psi();
        let p = &self.sys.params;
        let psi = x.rows(0, n).into_owned();
        let mut out = DVector::zeros(n + 3);
        out.rows_mut(0, n)
            .copy_from(&(self.sys.reduced.stiffness_apply(&psi) * p.mu()));
        out[n] = -p.beta_sq() * x[n + 2];
        out[n + 1] = 0.0;
        out[n + 2] = self.sys.xi() * x[n];
        out
    }

    /// `Kᵀ x`.
    pub fn apply_k_t(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.n_psi();
        let p = &self.sys.params;
        let psi = x.rows(0, n).into_owned();
        let mut out = DVector::zeros(n + 3);
        out.rows_mut(0, n)
            .copy_from(&(self.sys.reduced.stiffness_apply(&psi) * p.mu()));
        out[n] = self.sys.xi() * x[n + 2];
        out[n + 1] = 0.0;
        out[n + 2] = -p.beta_sq() * x[n];
        out
    }

    /// Factorization of `a M + b K`.
    pub fn factor(&self, a: f64, b: f64) -> Result<BorderedFactor, LinalgError> {
        let n = self.n_psi();
        let p = &self.sys.params;
        let xi = self.sys.xi();
        let block = sp_add(
            a * p.rho(),
            &self.sys.reduced.gram,
            b * p.mu(),
            &self.sys.reduced.stiffness,
        );
        let mut u = DMatrix::zeros(n, 3);
        u.set_column(0, &(&self.sys.reduced.coupling * (a * p.rho())));
        let v = u.clone();
        let d = DMatrix::from_row_slice(
            3,
            3,
            &[
                a * p.c_total(),
                0.0,
                -b * p.beta_sq(),
                0.0,
                a,
                0.0,
                b * xi,
                0.0,
                a,
            ],
        );
        BorderedFactor::new(&block, u, v, d)
    }

    /// Reduced coordinates of a face-based vector (velocity projected onto
    /// the divergence-free space).
    pub fn to_reduced(&self, u: &HVector) -> DVector<f64> {
        let n = self.n_psi();
        let psi = self.sys.reduced.coords(&self.sys.ops, &u.v);
        let mut x = DVector::zeros(n + 3);
        x.rows_mut(0, n).copy_from(&psi);
        x[n] = u.omega;
        x[n + 1] = u.gamma[0];
        x[n + 2] = u.gamma[1];
        x
    }

    pub fn from_reduced(&self, x: &DVector<f64>) -> HVector {
        let n = self.n_psi();
        HVector {
            v: spmv(&self.sys.ops.curl, &x.rows(0, n).into_owned()),
            omega: x[n],
            gamma: [x[n + 1], x[n + 2]],
        }
    }

    /// Kernel vector `(0, 0, e1)`.
    pub fn kernel_vector(&self) -> DVector<f64> {
        let mut x = DVector::zeros(self.dim());
        x[self.gamma_index()] = 1.0;
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{apply_a, apply_b, apply_i};
    use crate::model::{derive_params, CavityGeometry, EquilibriumSign, RawParams};

    #[test]
    fn pencil_matches_face_operators() {
        let p = derive_params(&RawParams::default(), &CavityGeometry::unit_square(10)).unwrap();
        let sys = PendulumSystem::new(p, EquilibriumSign::Upper).unwrap();
        let pen = CoupledPencil::new(&sys);
        let x = DVector::from_fn(pen.dim(), |i, _| ((i * 13) % 7) as f64 - 3.0);
        let u = pen.from_reduced(&x);
        // Testing the face operators against the basis reproduces the pencil rows.
        let iu = apply_i(&sys, &u);
        let mx = pen.apply_m(&x);
        let tested = pen.to_reduced(&iu);
        let g_tested = sys
            .reduced
            .gram_apply(&tested.rows(0, pen.n_psi()).into_owned());
        assert!((&g_tested - mx.rows(0, pen.n_psi())).amax() < 1e-9 * mx.amax());
        assert!((iu.omega - mx[pen.omega_index()]).abs() < 1e-10);
        let a = apply_a(&sys, &u).unwrap();
        let b = apply_b(&sys, &u);
        let kx = pen.apply_k(&x);
        let ka = pen.to_reduced(&a);
        let g_ka = sys
            .reduced
            .gram_apply(&ka.rows(0, pen.n_psi()).into_owned());
        assert!((&g_ka - kx.rows(0, pen.n_psi())).amax() < 1e-8 * kx.amax());
        assert!((a.omega + b.omega - kx[pen.omega_index()]).abs() < 1e-12);
        assert!((a.gamma[1] + b.gamma[1] - kx[pen.gamma_index() + 1]).abs() < 1e-12);
        assert_eq!(pen.apply_k(&pen.kernel_vector()).amax(), 0.0);
    }

    #[test]
    fn factor_solves_shifted_pencil() {
        let p = derive_params(&RawParams::default(), &CavityGeometry::unit_square(9)).unwrap();
        let sys = PendulumSystem::new(p, EquilibriumSign::Lower).unwrap();
        let pen = CoupledPencil::new(&sys);
        let (a, b) = (1.0, 0.05);
        let f = pen.factor(a, b).unwrap();
        let rhs = DVector::from_fn(pen.dim(), |i, _| (i as f64).sin());
        let x = f.solve(&rhs);
        let back = pen.apply_m(&x) * a + pen.apply_k(&x) * b;
        assert!((&back - &rhs).amax() < 1e-10 * rhs.amax());
        let y = f.solve_transpose(&rhs);
        let back_t = pen.apply_m(&y) * a + pen.apply_k_t(&y) * b;
        assert!((&back_t - &rhs).amax() < 1e-10 * rhs.amax());
    }
}
