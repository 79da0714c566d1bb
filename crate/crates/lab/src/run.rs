//! Scenario execution: system assembly, initial data, simulation, spectrum,
//! decay analysis and audits, and the artifacts written for each.

use std::path::Path;
use std::time::Instant;

use pendulum_core::decay::{
    detect_t0, fit_series, noise_floor_time, perturbation_energy, rate_vs_gap, series, DecayFit,
    RateGapComparison, SeriesId, TransientTime,
};
use pendulum_core::dynamics::Mode;
use pendulum_core::dynamics::{
    energy_level_state, explicit_state, perturbation_state, simulate, slow_mode_state,
    PendulumSystem, SimulationOptions, Trajectory,
};
use pendulum_core::energy::{
    basin_terms, linear_identity_residual, quadratic_form_bounds, sei_audit, SeiAudit,
};
use pendulum_core::model::{
    derive_inviscid_params, derive_params, derive_rigid_limit_params, CoupledState, PhysicalParams,
    RawParams,
};
use pendulum_core::spectral::{system_spectrum, SpectrumReport, StokesEigen};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, InitialSpec};
use crate::error::LabError;
use crate::io;

pub const CODE_VERSION: &str = concat!("pendulum-lab ", env!("CARGO_PKG_VERSION"));

/// Massless liquid and inviscid liquid are admitted as limits; otherwise all
/// parameters must be positive.
pub fn physical_params(cfg: &ExperimentConfig) -> Result<PhysicalParams, LabError> {
    let raw: RawParams = cfg.physics.into();
    let cavity = cfg.grid.geometry();
    let p = if raw.rho == 0.0 {
        derive_rigid_limit_params(&raw, &cavity)
    } else if raw.mu == 0.0 {
        derive_inviscid_params(&raw, &cavity)
    } else {
        derive_params(&raw, &cavity)
    };
    p.map_err(|e| LabError::Solver(e.into()))
}

/// Discretized system with the Stokes eigenbasis used for graded norms and
/// the initial state.
pub struct Prepared {
    pub sys: PendulumSystem,
    pub stokes: StokesEigen,
    pub initial: CoupledState,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared, LabError> {
    let params = physical_params(cfg)?;
    let sign = cfg
        .run
        .sign()
        .ok_or_else(|| LabError::Config(format!("bad sign {}", cfg.run.xi)))?;
    let sys = PendulumSystem::new(params, sign)?;
    let mu_norm = if params.mu() > 0.0 { params.mu() } else { 1.0 };
    let stokes = StokesEigen::with_viscosity(&sys, mu_norm).map_err(pendulum_core::Error::from)?;
    let alpha = cfg.run.alpha;
    let initial = match cfg.initial {
        InitialSpec::Equilibrium => CoupledState::equilibrium(sys.ops.grid.n_faces(), sign),
        InitialSpec::Perturbation {
            amplitude,
            template,
            weights,
        } => perturbation_state(&sys, &stokes, template, amplitude, weights, alpha)
            .map_err(|e| LabError::Config(e.to_string()))?,
        InitialSpec::Explicit {
            template,
            v_scale,
            omega,
            theta,
        } => explicit_state(&sys, &stokes, template, v_scale, omega, theta, alpha)
            .map_err(|e| LabError::Config(e.to_string()))?,
        InitialSpec::EnergyLevel { seed, energy } => energy_level_state(
            &sys,
            &stokes,
            seed,
            energy,
            alpha,
            cfg.run.energy_convention,
        )
        .map_err(|e| LabError::Config(e.to_string()))?,
        InitialSpec::SlowMode { amplitude } => slow_mode_state(&sys, &stokes, amplitude, alpha)?,
    };
    Ok(Prepared {
        sys,
        stokes,
        initial,
    })
}

pub fn simulation_options(cfg: &ExperimentConfig) -> SimulationOptions {
    SimulationOptions {
        dt: cfg.run.dt,
        horizon: cfg.run.horizon,
        mode: cfg.run.mode,
        output_stride: cfg.run.output_stride,
        convention: cfg.run.energy_convention,
        alpha: cfg.run.alpha,
        keep_snapshots: cfg.run.snapshots,
    }
}

pub fn simulate_prepared(cfg: &ExperimentConfig, prep: &Prepared) -> Result<Trajectory, LabError> {
    Ok(simulate(
        &prep.sys,
        Some(&prep.stokes),
        &prep.initial,
        &simulation_options(cfg),
    )?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesFit {
    pub series: SeriesId,
    pub window: (f64, f64),
    pub fit: Option<DecayFit>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub gamma_gap: Option<f64>,
    pub energy_threshold: f64,
    pub t0_window: f64,
    pub transient: TransientTime,
    pub fits: Vec<SeriesFit>,
    /// Perturbation-norm rate against the spectral gap.
    pub rate_vs_gap: Option<RateGapComparison>,
}

impl DecayReport {
    pub fn fit(&self, id: SeriesId) -> Option<&DecayFit> {
        self.fits
            .iter()
            .find(|f| f.series == id)
            .and_then(|f| f.fit.as_ref())
    }
}

/// Transient time and post-transient fits of every series, each ending where
/// the series reaches the configured noise floor.
pub fn decay_analysis(
    cfg: &ExperimentConfig,
    traj: &Trajectory,
    params: &PhysicalParams,
    spectrum: Option<&SpectrumReport>,
) -> DecayReport {
    let th = &cfg.thresholds;
    let e0 = perturbation_energy(traj).first().copied().unwrap_or(0.0);
    let energy_threshold = th.t0_energy.unwrap_or(th.t0_energy_fraction * e0);
    let transient = detect_t0(traj, energy_threshold, th.t0_window);
    let ta = transient.t0().unwrap_or(0.0);
    let bc = params.beta_sq() / params.c_total();
    let fits: Vec<SeriesFit> = SeriesId::ALL
        .iter()
        .map(|&id| {
            let (t, y) = series(traj, id, bc);
            let tb = noise_floor_time(&t, &y, th.fit_floor);
            match fit_series(traj, id, bc, (ta, tb)) {
                Ok(f) => SeriesFit {
                    series: id,
                    window: (ta, tb),
                    fit: Some(f),
                    error: None,
                },
                Err(e) => SeriesFit {
                    series: id,
                    window: (ta, tb),
                    fit: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let mut report = DecayReport {
        gamma_gap: spectrum.and_then(|s| s.gamma_gap),
        energy_threshold,
        t0_window: th.t0_window,
        transient,
        fits,
        rate_vs_gap: None,
    };
    report.rate_vs_gap = match (report.fit(SeriesId::Perturbation), spectrum) {
        (Some(f), Some(s)) => rate_vs_gap(f, s, cfg.thresholds.rate_fraction).ok(),
        _ => None,
    };
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasinReport {
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    /// `lhs < (1 − margin) rhs`
    pub inside: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub sei: SeiAudit,
    pub basin: BasinReport,
    /// Initial energy above the rest state (Lyapunov form for linear runs).
    pub initial_energy: f64,
    /// `(C_B/C) ρ‖v0‖² ≤ E ≤ ρ‖v0‖²` for the initial velocity.
    pub quadratic_form_bounds: (f64, f64, f64),
    /// Max `|d/dt lyap_linear + μ‖∇v‖²|` (linear runs).
    pub linear_identity_max: Option<f64>,
    /// `|lyap_linear(T) − lyap_linear(0)| / T` (linear runs).
    pub linear_drift_rate: Option<f64>,
    pub pass: bool,
}

pub fn audit(cfg: &ExperimentConfig, prep: &Prepared, traj: &Trajectory) -> AuditReport {
    let p = &prep.sys.params;
    let (lhs, rhs) = basin_terms(&prep.sys.ops, &prep.initial, p, cfg.run.energy_convention);
    let margin = cfg.thresholds.basin_margin;
    let sei = sei_audit(traj);
    let (linear_identity_max, linear_drift_rate) = match traj.meta.mode {
        Mode::Linear => {
            let max = linear_identity_residual(traj)
                .ok()
                .map(|r| r.iter().map(|x| x.abs()).fold(0.0, f64::max));
            let drift = match (traj.energy.first(), traj.energy.last()) {
                (Some(a), Some(b)) if b.t > a.t => {
                    Some((b.lyap_linear - a.lyap_linear).abs() / (b.t - a.t))
                }
                _ => None,
            };
            (max, drift)
        }
        Mode::Nonlinear => (None, None),
    };
    AuditReport {
        sei,
        basin: BasinReport {
            lhs,
            rhs,
            margin,
            inside: lhs < (1.0 - margin) * rhs,
        },
        initial_energy: perturbation_energy(traj).first().copied().unwrap_or(0.0),
        quadratic_form_bounds: quadratic_form_bounds(&prep.sys.ops, &prep.initial.v, p),
        linear_identity_max,
        linear_drift_rate,
        pass: sei.passed,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub scenario: String,
    pub command: String,
    pub code_version: String,
    pub wall_time_s: f64,
    pub artifacts: Vec<String>,
    pub completed: bool,
    pub halted: Option<String>,
    pub steps: Option<usize>,
    pub config: ExperimentConfig,
}

/// Everything `simulate` produces, in memory.
pub struct RunOutcome {
    pub hash: String,
    pub trajectory: Trajectory,
    pub spectrum: Result<SpectrumReport, String>,
    pub decay: DecayReport,
    pub audit: AuditReport,
}

impl RunOutcome {
    pub fn spectrum(&self) -> Option<&SpectrumReport> {
        self.spectrum.as_ref().ok()
    }
}

fn spectrum_of(cfg: &ExperimentConfig, sys: &PendulumSystem) -> Result<SpectrumReport, String> {
    if !cfg.spectrum.enabled {
        return Err("disabled in configuration".into());
    }
    system_spectrum(sys, &cfg.spectrum.options()).map_err(|e| e.to_string())
}

/// Runs a scenario in memory.
pub fn execute(cfg: &ExperimentConfig) -> Result<RunOutcome, LabError> {
    let prep = prepare(cfg)?;
    let trajectory = simulate_prepared(cfg, &prep)?;
    let spectrum = spectrum_of(cfg, &prep.sys);
    let decay = decay_analysis(cfg, &trajectory, &prep.sys.params, spectrum.as_ref().ok());
    let audit = audit(cfg, &prep, &trajectory);
    Ok(RunOutcome {
        hash: cfg.hash(),
        trajectory,
        spectrum,
        decay,
        audit,
    })
}

#[derive(Serialize)]
struct SpectrumFailure<'a> {
    error: &'a str,
}

fn write_spectrum(
    dir: &Path,
    hash: &str,
    spectrum: &Result<SpectrumReport, String>,
) -> Result<(), LabError> {
    let path = dir.join(io::SPECTRUM_FILE);
    match spectrum {
        Ok(rep) => io::write_json(&path, hash, rep),
        Err(e) => io::write_json(&path, hash, &SpectrumFailure { error: e }),
    }
}

fn write_manifest(
    dir: &Path,
    cfg: &ExperimentConfig,
    command: &str,
    started: Instant,
    artifacts: &[&str],
    traj: Option<&Trajectory>,
) -> Result<(), LabError> {
    let m = Manifest {
        scenario: cfg.name.clone(),
        command: command.into(),
        code_version: CODE_VERSION.into(),
        wall_time_s: started.elapsed().as_secs_f64(),
        artifacts: artifacts.iter().map(|s| s.to_string()).collect(),
        completed: traj.is_none_or(|t| t.completed()),
        halted: traj.and_then(|t| t.halted.as_ref().map(|e| e.to_string())),
        steps: traj.map(|t| t.meta.steps),
        config: cfg.clone(),
    };
    io::write_json(&dir.join(io::MANIFEST_FILE), &cfg.hash(), &m)
}

fn halted_error(traj: &Trajectory) -> Option<LabError> {
    traj.halted.as_ref().map(|e| LabError::Halted {
        time: traj.samples.last().map(|s| s.t).unwrap_or(0.0),
        reason: e.to_string(),
    })
}

/// `simulate`: writes trajectory, energy, spectrum, decay and manifest
/// (plus velocity snapshots when configured). A halted run still writes its
/// partial artifacts before the error is returned.
pub fn run(cfg: &ExperimentConfig, dir: &Path) -> Result<RunOutcome, LabError> {
    let started = Instant::now();
    let out = execute(cfg)?;
    let h = &out.hash;
    let traj = &out.trajectory;
    io::atomic_write(&dir.join(io::TRAJECTORY_FILE), &io::trajectory_csv(h, traj))?;
    io::atomic_write(&dir.join(io::ENERGY_FILE), &io::energy_csv(h, traj))?;
    write_spectrum(dir, h, &out.spectrum)?;
    io::write_json(&dir.join(io::DECAY_FILE), h, &out.decay)?;
    let mut artifacts = vec![
        io::TRAJECTORY_FILE,
        io::ENERGY_FILE,
        io::SPECTRUM_FILE,
        io::DECAY_FILE,
    ];
    if cfg.run.snapshots {
        io::atomic_write(&dir.join(io::SNAPSHOT_FILE), &io::snapshot_bytes(h, traj))?;
        artifacts.push(io::SNAPSHOT_FILE);
    }
    write_manifest(dir, cfg, "simulate", started, &artifacts, Some(traj))?;
    match halted_error(traj) {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

/// `spectrum`: spectrum report and manifest only.
pub fn run_spectrum(cfg: &ExperimentConfig, dir: &Path) -> Result<SpectrumReport, LabError> {
    let started = Instant::now();
    let params = physical_params(cfg)?;
    let sign = cfg
        .run
        .sign()
        .ok_or_else(|| LabError::Config(format!("bad sign {}", cfg.run.xi)))?;
    let sys = PendulumSystem::new(params, sign)?;
    let rep = system_spectrum(&sys, &cfg.spectrum.options()).map_err(pendulum_core::Error::from)?;
    io::write_json(&dir.join(io::SPECTRUM_FILE), &cfg.hash(), &rep)?;
    write_manifest(dir, cfg, "spectrum", started, &[io::SPECTRUM_FILE], None)?;
    Ok(rep)
}

/// `fit`: simulates in memory and writes the decay report and manifest.
pub fn run_fit(cfg: &ExperimentConfig, dir: &Path) -> Result<DecayReport, LabError> {
    let started = Instant::now();
    let prep = prepare(cfg)?;
    let traj = simulate_prepared(cfg, &prep)?;
    let spectrum = spectrum_of(cfg, &prep.sys);
    let rep = decay_analysis(cfg, &traj, &prep.sys.params, spectrum.as_ref().ok());
    io::write_json(&dir.join(io::DECAY_FILE), &cfg.hash(), &rep)?;
    write_manifest(dir, cfg, "fit", started, &[io::DECAY_FILE], Some(&traj))?;
    match halted_error(&traj) {
        Some(e) => Err(e),
        None => Ok(rep),
    }
}

/// `audit`: simulates in memory and writes the energy audit and manifest.
pub fn run_audit(cfg: &ExperimentConfig, dir: &Path) -> Result<AuditReport, LabError> {
    let started = Instant::now();
    let prep = prepare(cfg)?;
    let traj = simulate_prepared(cfg, &prep)?;
    let rep = audit(cfg, &prep, &traj);
    io::write_json(&dir.join(io::AUDIT_FILE), &cfg.hash(), &rep)?;
    write_manifest(dir, cfg, "audit", started, &[io::AUDIT_FILE], Some(&traj))?;
    if let Some(e) = halted_error(&traj) {
        return Err(e);
    }
    Ok(rep)
}
