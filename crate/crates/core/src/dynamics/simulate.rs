//! Trajectory driver: runs the stepper, records energies every step and
//! scalar samples (plus optional full snapshots) at the output stride.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{CoupledPencil, Mode, PendulumSystem, ReducedState, Stepper};
use crate::energy::{EnergyConvention, EnergyInputs, EnergyRecord};
use crate::error::{DynamicsError, GridError, Result};
use crate::linalg::spmv;
use crate::model::{CoupledState, Orientation};
use crate::spectral::StokesEigen;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationOptions {
    pub dt: f64,
    pub horizon: f64,
    pub mode: Mode,
    /// Samples (and snapshots) are taken every `output_stride` steps.
    pub output_stride: usize,
    pub convention: EnergyConvention,
    /// Exponent of the graded velocity norm `‖A0^α v‖`.
    pub alpha: f64,
    pub keep_snapshots: bool,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self {
            dt: 0.01,
            horizon: 1.0,
            mode: Mode::Nonlinear,
            output_stride: 1,
            convention: EnergyConvention::Consistent,
            alpha: 0.75,
            keep_snapshots: false,
        }
    }
}

/// Scalar diagnostics at one output time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub step: usize,
    pub t: f64,
    pub omega: f64,
    pub phi: f64,
    pub chi1: f64,
    pub chi2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub v_l2: f64,
    pub v_alpha: f64,
    pub v_h2proxy: f64,
    /// `‖v_t‖` by backward difference (zero at the first sample).
    pub v_t_l2: f64,
    pub a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub dt: f64,
    pub horizon: f64,
    pub nx: usize,
    pub ny: usize,
    pub scheme: String,
    pub xi: i32,
    pub mode: Mode,
    pub convention: EnergyConvention,
    pub output_stride: usize,
    pub alpha: f64,
    pub steps: usize,
    pub snapshot_count: usize,
    /// Potential energy of the lower rest state (energy floor for audits).
    pub potential_floor: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub meta: RunMeta,
    pub samples: Vec<SampleRecord>,
    pub energy: Vec<EnergyRecord>,
    pub snapshots: Vec<CoupledState>,
    /// Set when the run stopped before the horizon.
    pub halted: Option<DynamicsError>,
}

impl Trajectory {
    pub fn final_sample(&self) -> Option<&SampleRecord> {
        self.samples.last()
    }

    pub fn completed(&self) -> bool {
        self.halted.is_none()
    }
}

struct Recorder<'a> {
    sys: &'a PendulumSystem,
    stokes: Option<&'a StokesEigen>,
    opts: SimulationOptions,
}

impl Recorder<'_> {
    fn orientation(&self, st: &ReducedState) -> Orientation {
        let n = self.sys.reduced.dim();
        match st.theta {
            Some(theta) => Orientation::Angle { theta },
            None => Orientation::Linearized {
                gamma: [st.x[n + 1], st.x[n + 2]],
            },
        }
    }

    fn state(&self, st: &ReducedState) -> CoupledState {
        let n = self.sys.reduced.dim();
        CoupledState {
            v: spmv(&self.sys.ops.curl, &st.x.rows(0, n).into_owned()),
            p: None,
            omega: st.x[n],
            orientation: self.orientation(st),
            sign: self.sys.sign,
            time: st.time,
        }
    }

    fn energy(&self, st: &ReducedState, psi_prev: Option<&DVector<f64>>) -> EnergyRecord {
        let rs = &self.sys.reduced;
        let n = rs.dim();
        let psi = st.x.rows(0, n).into_owned();
        let gpsi = rs.gram_apply(&psi);
        let v_t = psi_prev.map(|prev| {
            let d = (&psi - prev) / self.opts.dt;
            (d.dot(&rs.gram_apply(&d)), rs.coupling.dot(&d))
        });
        let tmp = CoupledState {
            v: DVector::zeros(0),
            p: None,
            omega: st.x[n],
            orientation: self.orientation(st),
            sign: self.sys.sign,
            time: st.time,
        };
        let inp = EnergyInputs {
            t: st.time,
            v_sq: psi.dot(&gpsi),
            cross: rs.coupling.dot(&psi),
            grad_sq: psi.dot(&rs.stiffness_apply(&psi)),
            omega: st.x[n],
            chi1: tmp.chi()[0],
            gamma2: tmp.gamma()[1],
            xi: self.sys.xi(),
            v_t,
        };
        EnergyRecord::assemble(&inp, &self.sys.params, self.opts.convention)
    }

    fn sample(&self, step: usize, st: &ReducedState, rec: &EnergyRecord) -> SampleRecord {
        let n = self.sys.reduced.dim();
        let psi = st.x.rows(0, n).into_owned();
        let tmp = CoupledState {
            v: DVector::zeros(0),
            p: None,
            omega: st.x[n],
            orientation: self.orientation(st),
            sign: self.sys.sign,
            time: st.time,
        };
        let chi = tmp.chi();
        let gamma = tmp.gamma();
        let v_sq = self.sys.reduced.norm_sq(&psi);
        let (v_alpha, v_h2) = match self.stokes {
            Some(se) => se.alpha_and_h2(&psi, self.opts.alpha),
            None => (f64::NAN, f64::NAN),
        };
        SampleRecord {
            step,
            t: st.time,
            omega: st.x[n],
            phi: tmp.phi(),
            chi1: chi[0],
            chi2: chi[1],
            gamma1: gamma[0],
            gamma2: gamma[1],
            v_l2: v_sq.max(0.0).sqrt(),
            v_alpha,
            v_h2proxy: v_h2,
            v_t_l2: 0.0,
            a: rec.a,
        }
    }
}

/// Initial reduced state from a face-based state: the velocity is projected
/// onto the divergence-free space; nonlinear runs carry the angle.
pub(crate) fn reduce_initial(
    sys: &PendulumSystem,
    initial: &CoupledState,
    mode: Mode,
) -> ReducedState {
    let n = sys.reduced.dim();
    let mut x = DVector::zeros(n + 3);
    let psi = sys.reduced.coords(&sys.ops, &initial.v);
    x.rows_mut(0, n).copy_from(&psi);
    x[n] = initial.omega;
    let xi = sys.xi();
    let theta = match mode {
        Mode::Nonlinear => Some(match initial.orientation {
            Orientation::Angle { theta } => theta,
            Orientation::Linearized { .. } => {
                let chi = initial.chi();
                (-xi * chi[1]).atan2(xi * chi[0])
            }
        }),
        Mode::Linear => None,
    };
    let gamma = match theta {
        Some(t) => [xi * (t.cos() - 1.0), -xi * t.sin()],
        None => initial.gamma(),
    };
    x[n + 1] = gamma[0];
    x[n + 2] = gamma[1];
    ReducedState {
        x,
        theta,
        time: initial.time,
    }
}

/// Integrates from `initial` up to `initial.time + horizon`.
///
/// Step failures (CFL violation, linear-solve failure, non-finite values) stop
/// the run; the trajectory up to the last valid step is returned with
/// [`Trajectory::halted`] set.
pub fn simulate(
    sys: &PendulumSystem,
    stokes: Option<&StokesEigen>,
    initial: &CoupledState,
    opts: &SimulationOptions,
) -> Result<Trajectory> {
    let stride = opts.output_stride.max(1);
    let pen = CoupledPencil::new(sys);
    let mut stepper = Stepper::new(pen, opts.dt, opts.mode)?;
    let n_steps = (opts.horizon / opts.dt).round() as usize;
    let rec = Recorder {
        sys,
        stokes,
        opts: *opts,
    };
    let n = sys.reduced.dim();
    let mut st = reduce_initial(sys, initial, opts.mode);
    let mut energy = Vec::with_capacity(n_steps + 1);
    let mut samples = Vec::with_capacity(n_steps / stride + 1);
    let mut snapshots = Vec::new();

    let e0 = rec.energy(&st, None);
    samples.push(with_vt(rec.sample(0, &st, &e0), None, sys));
    energy.push(e0);
    if opts.keep_snapshots {
        snapshots.push(rec.state(&st));
    }
    let mut halted = None;
    let mut steps_done = 0;
    for k in 1..=n_steps {
        let psi_prev = st.x.rows(0, n).into_owned();
        let mut next = st.clone();
        if let Err(e) = stepper.step(&mut next) {
            halted = Some(e);
            break;
        }
        // Keep times on the exact grid t0 + k dt.
        next.time = initial.time + k as f64 * opts.dt;
        st = next;
        steps_done = k;
        let e = rec.energy(&st, Some(&psi_prev));
        if k % stride == 0 || k == n_steps {
            let vt = (&st.x.rows(0, n).into_owned() - &psi_prev) / opts.dt;
            samples.push(with_vt(rec.sample(k, &st, &e), Some(&vt), sys));
            if opts.keep_snapshots {
                snapshots.push(rec.state(&st));
            }
        }
        energy.push(e);
    }
    let params = &sys.params;
    let meta = RunMeta {
        dt: opts.dt,
        horizon: opts.horizon,
        nx: params.cavity().nx,
        ny: params.cavity().ny,
        scheme: "MAC/IMEX-CN-AB2".into(),
        xi: sys.xi() as i32,
        mode: opts.mode,
        convention: opts.convention,
        output_stride: stride,
        alpha: opts.alpha,
        steps: steps_done,
        snapshot_count: snapshots.len(),
        potential_floor: -opts.convention.scale(params) * params.beta_sq(),
    };
    Ok(Trajectory {
        meta,
        samples,
        energy,
        snapshots,
        halted,
    })
}

fn with_vt(mut s: SampleRecord, vt: Option<&DVector<f64>>, sys: &PendulumSystem) -> SampleRecord {
    s.v_t_l2 = vt
        .map(|d| sys.reduced.norm_sq(d).max(0.0).sqrt())
        .unwrap_or(0.0);
    s
}

/// Diagnostic pressure: the gradient part of the non-solenoidal momentum
/// terms `μΔv − ρ(2ω e3×v + (v·∇)v + ω̇ e3×x)`, normalized to zero mean.
pub fn recover_pressure(
    sys: &PendulumSystem,
    state: &CoupledState,
    omega_dot: f64,
) -> std::result::Result<DVector<f64>, GridError> {
    let ops = &sys.ops;
    let rho = sys.params.rho();
    let mut raw = ops.laplacian(&state.v) * sys.params.mu();
    raw -= (ops.coriolis(&state.v) * (2.0 * state.omega) + ops.advection(&state.v)) * rho;
    raw -= ops.rigid_field() * (rho * omega_dot);
    ops.project_with_pressure(&raw).map(|(_, q)| q)
}
