//! The operators of the evolution equation acting on face-based vectors
//! `u = (v, ω, γ)` of the space `H = L²_σ ⊕ ℝ ⊕ ℝ²`.

use nalgebra::DVector;

use super::PendulumSystem;
use crate::error::{DynamicsError, GridError, LinalgError};

#[derive(Debug, Clone, PartialEq)]
pub struct HVector {
    pub v: DVector<f64>,
    pub omega: f64,
    pub gamma: [f64; 2],
}

impl HVector {
    pub fn zeros(n_faces: usize) -> Self {
        Self {
            v: DVector::zeros(n_faces),
            omega: 0.0,
            gamma: [0.0, 0.0],
        }
    }

    /// Euclidean-weighted inner product `⟨v1, v2⟩_W + ω1 ω2 + γ1·γ2`.
    pub fn dot(&self, other: &Self, sys: &PendulumSystem) -> f64 {
        sys.ops.inner(&self.v, &other.v)
            + self.omega * other.omega
            + self.gamma[0] * other.gamma[0]
            + self.gamma[1] * other.gamma[1]
    }

    pub fn norm(&self, sys: &PendulumSystem) -> f64 {
        self.dot(self, sys).sqrt()
    }
}

/// `Ĩu = (ρv + P[ρω e3×x], C(ω − a(v)), γ)`.
pub fn apply_i(sys: &PendulumSystem, u: &HVector) -> HVector {
    let p = &sys.params;
    let v = &u.v * p.rho() + sys.projected_rigid() * (p.rho() * u.omega);
    let a = sys.ops.compute_a(&u.v, p);
    HVector {
        v,
        omega: p.c_total() * (u.omega - a),
        gamma: u.gamma,
    }
}

/// Inverse of [`apply_i`] for right-hand sides whose velocity part is
/// divergence-free. The velocity block is eliminated through the scalar
/// Schur complement `C − ρ‖P(e3×x)‖² ≥ C_B > 0`.
pub fn solve_i(sys: &PendulumSystem, f: &HVector) -> Result<HVector, DynamicsError> {
    let p = &sys.params;
    let pr = sys.projected_rigid();
    if p.rho() == 0.0 {
        return Ok(HVector {
            v: DVector::zeros(f.v.len()),
            omega: f.omega / p.c_body(),
            gamma: f.gamma,
        });
    }
    let schur = p.c_total() - p.rho() * sys.ops.norm_sq(pr);
    if !(schur > 0.0) {
        return Err(DynamicsError::Factorization(LinalgError::Singular {
            context: "inertia",
        }));
    }
    let omega = (f.omega - sys.ops.inner(pr, &f.v)) / schur;
    let v = (&f.v - pr * (p.rho() * omega)) / p.rho();
    Ok(HVector {
        v,
        omega,
        gamma: f.gamma,
    })
}

/// `B̃u = (0, −β²γ2 − ω, ω e3×γ0 − γ)` with `γ0 = ξ e1`.
pub fn apply_b(sys: &PendulumSystem, u: &HVector) -> HVector {
    let xi = sys.xi();
    HVector {
        v: DVector::zeros(u.v.len()),
        omega: -sys.params.beta_sq() * u.gamma[1] - u.omega,
        gamma: [-u.gamma[0], xi * u.omega - u.gamma[1]],
    }
}

/// `Ãu = (−μ PΔv, ω, γ)`.
pub fn apply_a(sys: &PendulumSystem, u: &HVector) -> Result<HVector, GridError> {
    let lap = sys.ops.laplacian(&u.v) * (-sys.params.mu());
    Ok(HVector {
        v: sys.ops.project(&lap)?,
        omega: u.omega,
        gamma: u.gamma,
    })
}

/// `Ñ(u) = (−ρ P[2ω e3×v + (v·∇)v], 0, −ω e3×γ)`.
pub fn apply_n(sys: &PendulumSystem, u: &HVector) -> Result<HVector, GridError> {
    let raw = sys.ops.coriolis(&u.v) * (2.0 * u.omega) + sys.ops.advection(&u.v);
    let v = sys.ops.project(&raw)? * (-sys.params.rho());
    Ok(HVector {
        v,
        omega: 0.0,
        gamma: [u.omega * u.gamma[1], -u.omega * u.gamma[0]],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        derive_params, derive_rigid_limit_params, CavityGeometry, EquilibriumSign, RawParams,
    };
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn system(n: usize, sign: EquilibriumSign) -> PendulumSystem {
        let p = derive_params(&RawParams::default(), &CavityGeometry::unit_square(n)).unwrap();
        PendulumSystem::new(p, sign).unwrap()
    }

    fn random_h(sys: &PendulumSystem, seed: u64) -> HVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = DVector::from_fn(sys.ops.grid.n_faces(), |_, _| rng.random_range(-1.0..1.0));
        sys.ops.grid.mask_boundary(&mut v);
        HVector {
            v: sys.ops.project(&v).unwrap(),
            omega: rng.random_range(-1.0..1.0),
            gamma: [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
        }
    }

    #[test]
    fn inertia_is_symmetric_and_positive() {
        let sys = system(10, EquilibriumSign::Lower);
        for seed in 0..5 {
            let a = random_h(&sys, seed);
            let b = random_h(&sys, seed + 100);
            let l = apply_i(&sys, &a).dot(&b, &sys);
            let r = a.dot(&apply_i(&sys, &b), &sys);
            assert!((l - r).abs() < 1e-12 * l.abs().max(1.0));
            // ⟨Ĩu,u⟩ = ∫ρ|v + ω e3×x|² + C_B ω² + |γ|².
            let q = apply_i(&sys, &a).dot(&a, &sys);
            let p = &sys.params;
            let mix = &a.v + sys.ops.rigid_field() * a.omega;
            let expect = p.rho() * sys.ops.norm_sq(&mix)
                + p.c_body() * a.omega * a.omega
                + a.gamma[0].powi(2)
                + a.gamma[1].powi(2);
            assert!((q - expect).abs() < 1e-12 * expect);
            assert!(q > 0.0);
        }
    }

    #[test]
    fn inertia_examples() {
        let sys = system(8, EquilibriumSign::Lower);
        let n = sys.ops.grid.n_faces();
        let u = HVector {
            v: DVector::zeros(n),
            omega: 0.0,
            gamma: [0.3, -0.2],
        };
        assert_eq!(apply_i(&sys, &u), u);
        assert_eq!(solve_i(&sys, &u).unwrap(), u);
        let u = HVector {
            v: DVector::zeros(n),
            omega: 1.0,
            gamma: [0.0, 0.0],
        };
        let iu = apply_i(&sys, &u);
        assert!((&iu.v - sys.projected_rigid()).amax() < 1e-15);
        assert_eq!(iu.omega, sys.params.c_total());
    }

    #[test]
    fn solve_inverts_apply() {
        let sys = system(12, EquilibriumSign::Upper);
        for seed in 0..3 {
            let u = random_h(&sys, seed);
            let back = solve_i(&sys, &apply_i(&sys, &u)).unwrap();
            assert!((&back.v - &u.v).amax() < 1e-10 * u.v.amax());
            assert!((back.omega - u.omega).abs() < 1e-10);
        }
    }

    #[test]
    fn rigid_limit_decouples() {
        let raw = RawParams {
            rho: 0.0,
            c_body: 2.0,
            ..RawParams::default()
        };
        let p = derive_rigid_limit_params(&raw, &CavityGeometry::unit_square(8)).unwrap();
        let sys = PendulumSystem::new(p, EquilibriumSign::Lower).unwrap();
        let f = HVector {
            v: DVector::zeros(sys.ops.grid.n_faces()),
            omega: 3.0,
            gamma: [0.0, 1.0],
        };
        assert_eq!(solve_i(&sys, &f).unwrap().omega, 1.5);
    }

    #[test]
    fn linear_part_examples() {
        let sys = system(8, EquilibriumSign::Lower);
        let n = sys.ops.grid.n_faces();
        let sigma = 0.7;
        let u = HVector {
            v: DVector::zeros(n),
            omega: 0.0,
            gamma: [sigma, 0.0],
        };
        let b = apply_b(&sys, &u);
        assert_eq!(b.gamma, [-sigma, 0.0]);
        let a = apply_a(&sys, &u).unwrap();
        assert_eq!(a.gamma[0] + b.gamma[0], 0.0);
        assert_eq!(a.omega + b.omega, 0.0);

        let u = HVector {
            v: DVector::zeros(n),
            omega: 2.0,
            gamma: [0.0, 0.0],
        };
        let b = apply_b(&sys, &u);
        assert_eq!((b.omega, b.gamma), (-2.0, [0.0, 2.0]));

        let u = HVector {
            v: DVector::zeros(n),
            omega: 0.0,
            gamma: [0.0, 0.5],
        };
        let b = apply_b(&sys, &u);
        assert_eq!(
            (b.omega, b.gamma),
            (-0.5 * sys.params.beta_sq(), [0.0, -0.5])
        );
    }

    #[test]
    fn nonlinear_part_examples() {
        let sys = system(10, EquilibriumSign::Lower);
        let n = sys.ops.grid.n_faces();
        let u = HVector {
            v: DVector::zeros(n),
            omega: 1.5,
            gamma: [0.2, -0.4],
        };
        let nu = apply_n(&sys, &u).unwrap();
        assert_eq!(nu.v.amax(), 0.0);
        assert_eq!(nu.gamma, [1.5 * -0.4, -1.5 * 0.2]);

        // Quadratic scaling of the fluid part.
        let u = random_h(&sys, 9);
        let small = HVector {
            v: &u.v * 1e-2,
            omega: 1e-2 * u.omega,
            gamma: [1e-2 * u.gamma[0], 1e-2 * u.gamma[1]],
        };
        let big = HVector {
            v: &u.v * 1e-1,
            omega: 1e-1 * u.omega,
            gamma: [1e-1 * u.gamma[0], 1e-1 * u.gamma[1]],
        };
        let ns = apply_n(&sys, &small).unwrap().norm(&sys);
        let nb = apply_n(&sys, &big).unwrap().norm(&sys);
        let slope = (nb / ns).log10();
        assert!((slope - 2.0).abs() < 1e-6, "{slope}");
    }
}
