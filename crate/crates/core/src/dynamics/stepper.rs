//! IMEX time stepping: Crank–Nicolson on the coupled linear part, solved
//! monolithically through the inertia operator, and second-order
//! Adams–Bashforth on the nonlinearity (explicit Euler on the first step).

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::CoupledPencil;
use crate::error::DynamicsError;
use crate::linalg::{spmv, spmv_t, BorderedFactor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Linear,
    Nonlinear,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Linear => "linear",
            Mode::Nonlinear => "nonlinear",
        }
    }
}

/// State in reduced coordinates `x = (ψ, ω, γ1, γ2)`. In nonlinear mode the
/// orientation is carried by the angular deviation `theta` and `γ` is rebuilt
/// from it after every step.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedState {
    pub x: DVector<f64>,
    pub theta: Option<f64>,
    pub time: f64,
}

pub struct Stepper<'a> {
    pen: CoupledPencil<'a>,
    dt: f64,
    mode: Mode,
    lhs: BorderedFactor,
    prev_f: Option<DVector<f64>>,
    h_min: f64,
}

impl<'a> Stepper<'a> {
    pub fn new(pen: CoupledPencil<'a>, dt: f64, mode: Mode) -> Result<Self, DynamicsError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(DynamicsError::InvalidTimeStep { dt });
        }
        let lhs = pen.factor(1.0, 0.5 * dt)?;
        let g = &pen.sys.ops.grid;
        let h_min = g.hx.min(g.hy);
        Ok(Self {
            pen,
            dt,
            mode,
            lhs,
            prev_f: None,
            h_min,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn pencil(&self) -> &CoupledPencil<'a> {
        &self.pen
    }

    /// Forgets the Adams–Bashforth history (next step is explicit Euler).
    pub fn reset_history(&mut self) {
        self.prev_f = None;
    }

    /// Explicit part `F(x)` in tested form: `(Cᵀ W N_v, 0, ωγ2, −ωγ1)` with
    /// `N_v = −ρ(2ω e3×v + (v·∇)v)`.
    pub fn nonlinear_rhs(&self, x: &DVector<f64>) -> DVector<f64> {
        let sys = self.pen.sys;
        let n = self.pen.n_psi();
        let mut f = DVector::zeros(n + 3);
        let omega = x[n];
        let (g1, g2) = (x[n + 1], x[n + 2]);
        let psi = x.rows(0, n).into_owned();
        if sys.params.rho() > 0.0 && psi.amax() > 0.0 {
            let v = spmv(&sys.ops.curl, &psi);
            let mut raw = sys.ops.coriolis(&v) * (2.0 * omega) + sys.ops.advection(&v);
            raw *= -sys.params.rho();
            raw.component_mul_assign(sys.ops.weights());
            f.rows_mut(0, n).copy_from(&spmv_t(&sys.ops.curl, &raw));
        }
        f[n + 1] = omega * g2;
        f[n + 2] = -omega * g1;
        f
    }

    /// Largest step allowed by the advective CFL bound, `None` for `v = 0`.
    pub fn cfl_limit(&self, x: &DVector<f64>) -> Option<f64> {
        let n = self.pen.n_psi();
        let psi = x.rows(0, n).into_owned();
        let vmax = spmv(&self.pen.sys.ops.curl, &psi).amax();
        (vmax > 0.0).then(|| 0.5 * self.h_min / vmax)
    }

    pub fn step(&mut self, st: &mut ReducedState) -> Result<(), DynamicsError> {
        let dt = self.dt;
        let n = self.pen.n_psi();
        let x = &st.x;
        let nonlinear = self.mode == Mode::Nonlinear;
        if nonlinear {
            if let Some(limit) = self.cfl_limit(x) {
                if dt > limit {
                    return Err(DynamicsError::CflViolation {
                        dt,
                        suggested: 0.9 * limit,
                    });
                }
            }
        }
        let mut rhs = self.pen.apply_m(x) - self.pen.apply_k(x) * (0.5 * dt);
        let f = if nonlinear {
            let f = self.nonlinear_rhs(x);
            let explicit = match &self.prev_f {
                Some(prev) => &f * 1.5 - prev * 0.5,
                None => f.clone(),
            };
            rhs += explicit * dt;
            Some(f)
        } else {
            None
        };
        let mut x_new = self.lhs.solve(&rhs);
        let back = self.pen.apply_m(&x_new) + self.pen.apply_k(&x_new) * (0.5 * dt);
        let scale = rhs.amax().max(f64::MIN_POSITIVE);
        let residual = (&back - &rhs).amax() / scale;
        if !(residual <= 1e-8) {
            return Err(DynamicsError::LinearSolve { residual });
        }
        if let Some(theta) = st.theta {
            let xi = self.pen.sys.xi();
            let theta_new = theta + 0.5 * dt * (x[n] + x_new[n]);
            x_new[n + 1] = xi * (theta_new.cos() - 1.0);
            x_new[n + 2] = -xi * theta_new.sin();
            st.theta = Some(theta_new);
        }
        if x_new.iter().any(|z| !z.is_finite()) {
            return Err(DynamicsError::NonFinite { time: st.time + dt });
        }
        st.x = x_new;
        st.time += dt;
        self.prev_f = f;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::PendulumSystem;
    use crate::model::{
        derive_params, derive_rigid_limit_params, CavityGeometry, EquilibriumSign, RawParams,
    };

    #[test]
    fn equilibria_are_fixed_points() {
        for sign in [EquilibriumSign::Lower, EquilibriumSign::Upper] {
            let p = derive_params(&RawParams::default(), &CavityGeometry::unit_square(8)).unwrap();
            let sys = PendulumSystem::new(p, sign).unwrap();
            for mode in [Mode::Linear, Mode::Nonlinear] {
                let pen = CoupledPencil::new(&sys);
                let dim = pen.dim();
                let mut stepper = Stepper::new(pen, 0.1, mode).unwrap();
                let mut st = ReducedState {
                    x: DVector::zeros(dim),
                    theta: (mode == Mode::Nonlinear).then_some(0.0),
                    time: 0.0,
                };
                for _ in 0..5 {
                    stepper.step(&mut st).unwrap();
                }
                assert_eq!(st.x.amax(), 0.0);
                assert_eq!(st.theta.unwrap_or(0.0), 0.0);
            }
        }
    }

    #[test]
    fn rigid_limit_oscillator_conserves_amplitude() {
        let raw = RawParams {
            rho: 0.0,
            ..RawParams::default()
        };
        let p = derive_rigid_limit_params(&raw, &CavityGeometry::unit_square(8)).unwrap();
        let sys = PendulumSystem::new(p, EquilibriumSign::Lower).unwrap();
        let pen = CoupledPencil::new(&sys);
        let n = pen.n_psi();
        let mut x = DVector::zeros(pen.dim());
        x[n] = 0.3;
        x[n + 2] = 0.1;
        let c = p.c_total();
        let level = |x: &DVector<f64>| c * x[n] * x[n] + p.beta_sq() * x[n + 2] * x[n + 2];
        let e0 = level(&x);
        let mut stepper = Stepper::new(pen, 0.05, Mode::Linear).unwrap();
        let mut st = ReducedState {
            x,
            theta: None,
            time: 0.0,
        };
        for _ in 0..200 {
            stepper.step(&mut st).unwrap();
            assert!((level(&st.x) - e0).abs() < 1e-13 * e0);
        }
    }

    #[test]
    fn cfl_violation_is_rejected_with_suggestion() {
        let p = derive_params(&RawParams::default(), &CavityGeometry::unit_square(8)).unwrap();
        let sys = PendulumSystem::new(p, EquilibriumSign::Lower).unwrap();
        let pen = CoupledPencil::new(&sys);
        let mut x = DVector::from_fn(pen.dim(), |i, _| (i as f64).sin());
        let n = pen.n_psi();
        x[n + 1] = 0.0;
        x[n + 2] = 0.0;
        let mut stepper = Stepper::new(pen, 1.0, Mode::Nonlinear).unwrap();
        let mut st = ReducedState {
            x,
            theta: Some(0.0),
            time: 0.0,
        };
        match stepper.step(&mut st) {
            Err(DynamicsError::CflViolation { suggested, .. }) => assert!(suggested < 1.0),
            other => panic!("unexpected {other:?}"),
        }
    }
}
