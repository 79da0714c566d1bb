//! Coupled fluid/rigid-body dynamics: the inertia operator and the linear and
//! nonlinear parts of the evolution equation, the IMEX time stepper and the
//! trajectory driver.

mod inertia;
mod initial;
mod pencil;
mod simulate;
mod stepper;

pub use inertia::{apply_a, apply_b, apply_i, apply_n, solve_i, HVector};
pub use initial::{
    energy_level_state, explicit_state, perturbation_state, slow_mode_state, template_psi,
    VelocityTemplate,
};
pub use pencil::CoupledPencil;
pub use simulate::{
    recover_pressure, simulate, RunMeta, SampleRecord, SimulationOptions, Trajectory,
};
pub use stepper::{Mode, ReducedState, Stepper};

use nalgebra::DVector;

use crate::error::Result;
use crate::grid::{DiscreteOperators, ReducedSpace};
use crate::model::{EquilibriumSign, PhysicalParams};

/// Everything needed to evaluate the operators of one discretized pendulum
/// around one rest state.
pub struct PendulumSystem {
    pub params: PhysicalParams,
    pub sign: EquilibriumSign,
    pub ops: DiscreteOperators,
    pub reduced: ReducedSpace,
    /// `P[e3 × x]`, the projected rigid field.
    projected_rigid: DVector<f64>,
}

impl PendulumSystem {
    pub fn new(params: PhysicalParams, sign: EquilibriumSign) -> Result<Self> {
        let ops = DiscreteOperators::new(params.cavity())?;
        let reduced = ReducedSpace::new(&ops)?;
        let projected_rigid = ops.project(ops.rigid_field())?;
        Ok(Self {
            params,
            sign,
            ops,
            reduced,
            projected_rigid,
        })
    }

    pub fn xi(&self) -> f64 {
        self.sign.xi()
    }

    pub fn projected_rigid(&self) -> &DVector<f64> {
        &self.projected_rigid
    }

    /// Same discretization, other rest state.
    pub fn with_sign(&self, sign: EquilibriumSign) -> Result<Self> {
        Self::new(self.params, sign)
    }
}
