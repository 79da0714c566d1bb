use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::ToySystem;
use crate::spectral::SpectralProjections;

/// Norm beyond which integration stops and the run is flagged as blown up.
pub const BLOWUP_NORM: f64 = 1e6;

/// `u = u⁰ + u¹` with `u⁰ = Q u ∈ N[L]` and `u¹ = u − u⁰`.
pub fn split(u: &DVector<f64>, proj: &SpectralProjections) -> (DVector<f64>, DVector<f64>) {
    let u0 = proj.apply_q(u);
    let u1 = u - &u0;
    (u0, u1)
}

/// One classical Runge–Kutta step.
pub fn rk4_step(
    f: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    u: &DVector<f64>,
    dt: f64,
) -> DVector<f64> {
    let k1 = f(u);
    let k2 = f(&(u + &k1 * (0.5 * dt)));
    let k3 = f(&(u + &k2 * (0.5 * dt)));
    let k4 = f(&(u + &k3 * dt));
    u + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyTrajectory {
    pub t: Vec<f64>,
    pub u: Vec<DVector<f64>>,
    /// `Q u(t)`; empty when no projections were supplied.
    pub u0: Vec<DVector<f64>>,
    /// `P u(t)`; empty when no projections were supplied.
    pub u1: Vec<DVector<f64>>,
    pub blown_up: bool,
    /// `max ‖Q u + P u − u‖`.
    pub projection_residual: f64,
    /// `max ‖d(Qu)/dt + Q N(u)‖` with centred differences.
    pub kernel_equation_residual: f64,
}

impl ToyTrajectory {
    pub fn last(&self) -> &DVector<f64> {
        self.u.last().expect("trajectory holds the initial state")
    }
}

/// RK4 integration of `du/dt = −L u − N(u)` on `[0, horizon]`, storing every
/// step. Stops early if `‖u‖` exceeds [`BLOWUP_NORM`] or turns non-finite.
pub fn integrate_toy(
    sys: &ToySystem,
    proj: Option<&SpectralProjections>,
    u_init: &DVector<f64>,
    horizon: f64,
    dt: f64,
) -> ToyTrajectory {
    let n_steps = (horizon / dt).round().max(0.0) as usize;
    let f = |u: &DVector<f64>| sys.rhs(u);
    let mut t = vec![0.0];
    let mut us = vec![u_init.clone()];
    let mut blown_up = false;
    for k in 1..=n_steps {
        let next = rk4_step(&f, us.last().expect("non-empty"), dt);
        let nrm = next.norm();
        if !nrm.is_finite() || nrm > BLOWUP_NORM {
            blown_up = true;
            break;
        }
        t.push(k as f64 * dt);
        us.push(next);
    }
    let mut traj = ToyTrajectory {
        t,
        u: us,
        u0: Vec::new(),
        u1: Vec::new(),
        blown_up,
        projection_residual: 0.0,
        kernel_equation_residual: 0.0,
    };
    if let Some(pr) = proj {
        for u in &traj.u {
            let (a, b) = split(u, pr);
            traj.projection_residual = traj.projection_residual.max((&a + &b - u).norm());
            traj.u0.push(a);
            traj.u1.push(b);
        }
        for k in 1..traj.u.len().saturating_sub(1) {
            let d = (&traj.u0[k + 1] - &traj.u0[k - 1]) / (2.0 * dt);
            let r = (d + pr.apply_q(&sys.nonlinear(&traj.u[k]))).norm();
            traj.kernel_equation_residual = traj.kernel_equation_residual.max(r);
        }
    }
    traj
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MildResidual {
    pub t: f64,
    /// `‖u¹(t) − e^{−L t} u¹(0)‖` for the RK4 solution.
    pub residual: f64,
    /// Richardson estimate of the RK4 error from a half-step rerun.
    pub integrator_error: f64,
}

/// Compares the RK4 solution of the linear problem on the range,
/// `du¹/dt + L u¹ = 0`, with the matrix exponential (scaling and squaring).
pub fn mild_residual(
    sys: &ToySystem,
    proj: &SpectralProjections,
    u1_init: &DVector<f64>,
    t: f64,
    dt: f64,
) -> MildResidual {
    let u1 = proj.apply_p(u1_init);
    if t == 0.0 {
        return MildResidual {
            t,
            residual: 0.0,
            integrator_error: 0.0,
        };
    }
    let f = |u: &DVector<f64>| -(&sys.l * u);
    let run = |h: f64| {
        let n = (t / h).ceil().max(1.0) as usize;
        let h = t / n as f64;
        (0..n).fold(u1.clone(), |u, _| rk4_step(&f, &u, h))
    };
    let coarse = run(dt);
    let fine = run(dt / 2.0);
    let exact = (&sys.l * -t).exp() * &u1;
    MildResidual {
        t,
        residual: (&coarse - &exact).norm(),
        integrator_error: (&coarse - &fine).norm() * 16.0 / 15.0,
    }
}
