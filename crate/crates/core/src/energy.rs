//! Energy functionals, the strong-energy-inequality audit, the linear energy
//! identity and the basin-of-attraction test.
//!
//! With `a = −(ρ/C)∫(e3×x)·v`:
//! - kinetic energy `ℰ = ½[ρ‖v‖² − C a² + C(ω − a)²]`,
//! - `E = ρ‖v‖² − C a²`, which satisfies `(C_B/C) ρ‖v‖² ≤ E ≤ ρ‖v‖²`,
//! - the linear Lyapunov form `½[E + C(ω − a)² + (β²/ξ) γ2²]`.
//!
//! The potential energy defaults to `𝒰 = −β² χ1`, the form balanced by the
//! torque `β² χ2` of the angular-momentum equation; the alternative scaling
//! `−C β² χ1` is available through [`EnergyConvention::Scaled`].

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Mode, Trajectory};
use crate::error::EnergyError;
use crate::grid::DiscreteOperators;
use crate::model::{CoupledState, PhysicalParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnergyConvention {
    #[default]
    Consistent,
    /// `𝒰 = −C β² χ1`.
    #[serde(alias = "paper")]
    Scaled,
}

impl EnergyConvention {
    /// Multiplier of `β²` in the potential and in the basin bound.
    pub fn scale(self, params: &PhysicalParams) -> f64 {
        match self {
            EnergyConvention::Consistent => 1.0,
            EnergyConvention::Scaled => params.c_total(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyRecord {
    pub t: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub dissipation: f64,
    pub a: f64,
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "E1")]
    pub e1: Option<f64>,
    pub lyap_linear: f64,
}

/// Scalar ingredients of an [`EnergyRecord`], however they were computed.
#[derive(Debug, Clone, Copy)]
pub struct EnergyInputs {
    pub t: f64,
    /// `‖v‖²_W`
    pub v_sq: f64,
    /// `∫(e3×x)·v`
    pub cross: f64,
    /// `‖∇v‖²`
    pub grad_sq: f64,
    pub omega: f64,
    pub chi1: f64,
    pub gamma2: f64,
    pub xi: f64,
    /// `(‖v_t‖², ∫(e3×x)·v_t)` when a time derivative is available.
    pub v_t: Option<(f64, f64)>,
}

impl EnergyRecord {
    pub fn assemble(
        inp: &EnergyInputs,
        params: &PhysicalParams,
        convention: EnergyConvention,
    ) -> Self {
        let rho = params.rho();
        let c = params.c_total();
        let a = -(rho / c) * inp.cross;
        let e = rho * inp.v_sq - c * a * a;
        let rot = c * (inp.omega - a).powi(2);
        let e1 = inp
            .v_t
            .map(|(vt_sq, vt_cross)| rho * vt_sq - (rho * rho / c) * vt_cross * vt_cross);
        Self {
            t: inp.t,
            kinetic: 0.5 * (e + rot),
            potential: -convention.scale(params) * params.beta_sq() * inp.chi1,
            dissipation: params.mu() * inp.grad_sq,
            a,
            e,
            e1,
            lyap_linear: 0.5 * (e + rot + params.beta_sq() / inp.xi * inp.gamma2 * inp.gamma2),
        }
    }

    pub fn total(&self) -> f64 {
        self.kinetic + self.potential
    }
}

/// Energy record of a face-based state; `v_t` is an estimate of the velocity
/// time derivative (omitted → no `E1`).
pub fn energy_record(
    ops: &DiscreteOperators,
    state: &CoupledState,
    v_t: Option<&DVector<f64>>,
    params: &PhysicalParams,
    convention: EnergyConvention,
) -> EnergyRecord {
    let chi = state.chi();
    let gamma = state.gamma();
    let inp = EnergyInputs {
        t: state.time,
        v_sq: ops.norm_sq(&state.v),
        cross: ops.quad_cross_moment(&state.v),
        grad_sq: ops.grad_norm_sq(&state.v),
        omega: state.omega,
        chi1: chi[0],
        gamma2: gamma[1],
        xi: state.xi(),
        v_t: v_t.map(|w| (ops.norm_sq(w), ops.quad_cross_moment(w))),
    };
    EnergyRecord::assemble(&inp, params, convention)
}

/// `(lower, E, upper)` of the quadratic-form bounds `(C_B/C)ρ‖v‖² ≤ E ≤ ρ‖v‖²`.
pub fn quadratic_form_bounds(
    ops: &DiscreteOperators,
    v: &DVector<f64>,
    params: &PhysicalParams,
) -> (f64, f64, f64) {
    let rho = params.rho();
    let c = params.c_total();
    let vsq = rho * ops.norm_sq(v);
    let a = ops.compute_a(v, params);
    let e = vsq - c * a * a;
    (params.c_body() / c * vsq, e, vsq)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeiAudit {
    pub passed: bool,
    /// Largest `F(t) − F(s)` over `s ≤ t`, where `F` is the energy plus the
    /// accumulated dissipation.
    pub worst_violation: f64,
    /// Record index `t` at which the worst violation occurs.
    pub worst_index: usize,
    pub tolerance: f64,
    /// Energy scale used for the tolerance: initial energy above the rest state.
    pub reference_energy: f64,
}

fn audited_energy(r: &EnergyRecord, mode: Mode) -> f64 {
    match mode {
        Mode::Linear => r.lyap_linear,
        Mode::Nonlinear => r.total(),
    }
}

/// Audit of `F(t) ≤ F(s) + tol` for all record pairs `s ≤ t`, with
/// `F = energy + ∫ μ‖∇v‖²` (trapezoidal rule) and `tol = 10 dt² E0`.
/// Linear-mode runs audit the Lyapunov form, nonlinear ones `ℰ + 𝒰`.
pub fn sei_audit(traj: &Trajectory) -> SeiAudit {
    let recs = &traj.energy;
    let meta = &traj.meta;
    let reference = match recs.first() {
        None => 0.0,
        Some(r0) => match meta.mode {
            Mode::Linear => r0.lyap_linear.abs(),
            Mode::Nonlinear => (r0.total() - meta.potential_floor).max(0.0),
        },
    };
    let tolerance = 10.0 * meta.dt * meta.dt * reference;
    let mut worst = 0.0_f64;
    let mut worst_index = 0;
    let mut running_min = f64::INFINITY;
    let mut integral = 0.0;
    for (k, r) in recs.iter().enumerate() {
        if k > 0 {
            let prev = &recs[k - 1];
            integral += 0.5 * (r.t - prev.t) * (r.dissipation + prev.dissipation);
        }
        let f = audited_energy(r, meta.mode) + integral;
        running_min = running_min.min(f);
        let viol = f - running_min;
        if viol > worst {
            worst = viol;
            worst_index = k;
        }
    }
    SeiAudit {
        passed: worst <= tolerance,
        worst_violation: worst,
        worst_index,
        tolerance,
        reference_energy: reference,
    }
}

/// `d/dt lyap_linear + μ‖∇v‖²` per step: forward differences of the form and
/// the trapezoidal average of the endpoint dissipations.
pub fn linear_identity_residual(traj: &Trajectory) -> Result<Vec<f64>, EnergyError> {
    if traj.meta.mode != Mode::Linear {
        return Err(EnergyError::NotLinearMode {
            found: traj.meta.mode.as_str(),
        });
    }
    let recs = &traj.energy;
    if recs.len() < 2 {
        return Err(EnergyError::TooFewRecords {
            needed: 2,
            found: recs.len(),
        });
    }
    Ok(recs
        .windows(2)
        .map(|w| {
            let dt = w[1].t - w[0].t;
            (w[1].lyap_linear - w[0].lyap_linear) / dt + 0.5 * (w[0].dissipation + w[1].dissipation)
        })
        .collect())
}

/// Basin condition `ρ‖v0‖² + C(ω0 − a0)² < 2β²(1 + χ1,0)` (scaled by `C` on
/// the right under [`EnergyConvention::Scaled`]).
pub fn basin_check(
    ops: &DiscreteOperators,
    initial: &CoupledState,
    params: &PhysicalParams,
    convention: EnergyConvention,
) -> bool {
    let (lhs, rhs) = basin_terms(ops, initial, params, convention);
    lhs < rhs
}

/// Left and right side of the basin inequality.
pub fn basin_terms(
    ops: &DiscreteOperators,
    initial: &CoupledState,
    params: &PhysicalParams,
    convention: EnergyConvention,
) -> (f64, f64) {
    let a = ops.compute_a(&initial.v, params);
    let lhs =
        params.rho() * ops.norm_sq(&initial.v) + params.c_total() * (initial.omega - a).powi(2);
    let rhs = 2.0 * convention.scale(params) * params.beta_sq() * (1.0 + initial.chi()[0]);
    (lhs, rhs)
}
