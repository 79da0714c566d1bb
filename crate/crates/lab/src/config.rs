//! Scenario configuration: a TOML document with flat sections, hashed for
//! provenance.

use std::path::{Path, PathBuf};

use pendulum_core::dynamics::{Mode, VelocityTemplate};
use pendulum_core::energy::EnergyConvention;
use pendulum_core::model::{CavityGeometry, EquilibriumSign, RawParams};
use pendulum_core::spectral::SpectrumOptions;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::LabError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub physics: PhysicsConfig,
    pub grid: GridConfig,
    pub run: RunConfig,
    pub initial: InitialSpec,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    /// Not part of the hash: the same scenario may be written anywhere.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsConfig {
    pub rho: f64,
    pub mu: f64,
    pub c_body: f64,
    pub beta_sq: f64,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        let r = RawParams::default();
        Self {
            rho: r.rho,
            mu: r.mu,
            c_body: r.c_body,
            beta_sq: r.beta_sq,
        }
    }
}

impl From<PhysicsConfig> for RawParams {
    fn from(p: PhysicsConfig) -> Self {
        RawParams {
            rho: p.rho,
            mu: p.mu,
            c_body: p.c_body,
            beta_sq: p.beta_sq,
        }
    }
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    #[serde(default = "half")]
    pub half_width: f64,
    #[serde(default = "half")]
    pub half_height: f64,
    #[serde(default)]
    pub center_offset: [f64; 2],
}

impl GridConfig {
    pub fn square(n: usize) -> Self {
        Self {
            nx: n,
            ny: n,
            half_width: 0.5,
            half_height: 0.5,
            center_offset: [0.0, 0.0],
        }
    }

    pub fn geometry(&self) -> CavityGeometry {
        CavityGeometry {
            half_width: self.half_width,
            half_height: self.half_height,
            center_offset: self.center_offset,
            nx: self.nx,
            ny: self.ny,
        }
    }
}

fn default_alpha() -> f64 {
    0.75
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// `+1` (lower rest state) or `−1` (upper).
    pub xi: i32,
    pub mode: Mode,
    pub dt: f64,
    pub horizon: f64,
    #[serde(default = "default_stride")]
    pub output_stride: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub energy_convention: EnergyConvention,
    /// Also write velocity snapshots at the output stride.
    #[serde(default)]
    pub snapshots: bool,
}

impl RunConfig {
    pub fn sign(&self) -> Option<EquilibriumSign> {
        EquilibriumSign::from_xi(self.xi)
    }
}

fn default_weights() -> [f64; 3] {
    [1.0, 1.0, 1.0]
}

fn default_template() -> VelocityTemplate {
    VelocityTemplate::Rigid
}

/// Initial data, relative to the rest state selected by `run.xi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    Equilibrium,
    /// `‖A0^α v0‖ + |ω0| + |γ0| = amplitude`, split by `weights`.
    Perturbation {
        amplitude: f64,
        #[serde(default = "default_template")]
        template: VelocityTemplate,
        #[serde(default = "default_weights")]
        weights: [f64; 3],
    },
    /// Velocity `v_scale · template`, angular velocity and angle given.
    Explicit {
        #[serde(default = "default_template")]
        template: VelocityTemplate,
        #[serde(default)]
        v_scale: f64,
        #[serde(default)]
        omega: f64,
        #[serde(default)]
        theta: f64,
    },
    /// Random direction at a prescribed energy above the rest state.
    EnergyLevel {
        seed: u64,
        energy: f64,
    },
    /// Slowest non-kernel eigenmode of the linearization.
    SlowMode {
        amplitude: f64,
    },
}

impl InitialSpec {
    /// Replaces every seed (energy-level direction, random template).
    pub fn with_seed(self, seed: u64) -> Self {
        let reseed = |t: VelocityTemplate| match t {
            VelocityTemplate::Random { .. } => VelocityTemplate::Random { seed },
            other => other,
        };
        match self {
            InitialSpec::EnergyLevel { energy, .. } => InitialSpec::EnergyLevel { seed, energy },
            InitialSpec::Perturbation {
                amplitude,
                template,
                weights,
            } => InitialSpec::Perturbation {
                amplitude,
                template: reseed(template),
                weights,
            },
            InitialSpec::Explicit {
                template,
                v_scale,
                omega,
                theta,
            } => InitialSpec::Explicit {
                template: reseed(template),
                v_scale,
                omega,
                theta,
            },
            other => other,
        }
    }
}

/// Numerical realizations of the stability quantifiers and of the decay
/// analysis knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Initial-data radius of the small-data statements.
    pub delta: f64,
    /// Radius the small-data solutions must stay in.
    pub eps: f64,
    /// `‖·‖_α` radius whose exit marks instability.
    pub exit_radius: f64,
    /// Relative margin demanded inside the basin bound: `lhs < (1 − m) rhs`.
    pub basin_margin: f64,
    /// Transient-time energy threshold as a fraction of the initial
    /// perturbation energy.
    pub t0_energy_fraction: f64,
    /// Absolute transient-time energy threshold; overrides the fraction.
    /// Needed to compare `t0` across scenarios.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t0_energy: Option<f64>,
    /// Window length of the transient-time fit test.
    pub t0_window: f64,
    /// Fits stop where a series falls below this fraction of its maximum.
    pub fit_floor: f64,
    /// Required `κ / γ_gap`.
    pub rate_fraction: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            delta: 0.2,
            eps: 0.5,
            exit_radius: 0.5,
            basin_margin: 0.0,
            t0_energy_fraction: 0.01,
            t0_energy: None,
            t0_window: 5.0,
            fit_floor: 1e-9,
            rate_fraction: pendulum_core::decay::RATE_GAP_RATIO,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub enabled: bool,
    pub tol_rank_rel: f64,
    pub tol_imag: f64,
    pub n_eigs: usize,
    pub shift: f64,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        let o = SpectrumOptions::default();
        Self {
            enabled: true,
            tol_rank_rel: o.tol_rank_rel,
            tol_imag: o.tol_imag,
            n_eigs: o.n_eigs,
            shift: o.shift,
        }
    }
}

impl SpectrumConfig {
    pub fn options(&self) -> SpectrumOptions {
        SpectrumOptions {
            tol_rank_rel: self.tol_rank_rel,
            tol_imag: self.tol_imag,
            n_eigs: self.n_eigs,
            shift: self.shift,
        }
    }
}

fn invalid(msg: impl Into<String>) -> LabError {
    LabError::Config(msg.into())
}

fn finite_positive(name: &str, x: f64) -> Result<(), LabError> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!(
            "`{name}` must be positive and finite, got {x}"
        )))
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, LabError> {
        let cfg: Self = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config types serialize to TOML")
    }

    /// SHA-256 of the canonical TOML form, without the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        hex::encode(Sha256::digest(c.to_toml().as_bytes()))
    }

    /// Every seed the initial data depends on.
    pub fn seeds(&self) -> Vec<u64> {
        let tpl = |t: VelocityTemplate| match t {
            VelocityTemplate::Random { seed } => Some(seed),
            _ => None,
        };
        match self.initial {
            InitialSpec::EnergyLevel { seed, .. } => vec![seed],
            InitialSpec::Perturbation { template, .. } | InitialSpec::Explicit { template, .. } => {
                tpl(template).into_iter().collect()
            }
            _ => Vec::new(),
        }
    }

    /// Structural checks that need no discretization. Physical parameters
    /// and template indices are checked when the system is built.
    pub fn validate(&self) -> Result<(), LabError> {
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        {
            return Err(invalid(format!(
                "scenario name {:?} must be non-empty [A-Za-z0-9_-]",
                self.name
            )));
        }
        let r = &self.run;
        if r.sign().is_none() {
            return Err(invalid(format!("`run.xi` must be +1 or -1, got {}", r.xi)));
        }
        finite_positive("run.dt", r.dt)?;
        finite_positive("run.horizon", r.horizon)?;
        if r.output_stride == 0 {
            return Err(invalid("`run.output_stride` must be at least 1"));
        }
        if !(0.0..=1.0).contains(&r.alpha) {
            return Err(invalid(format!(
                "`run.alpha` must lie in [0, 1], got {}",
                r.alpha
            )));
        }
        match self.initial {
            InitialSpec::Perturbation {
                amplitude, weights, ..
            } => {
                if !(amplitude.is_finite() && amplitude >= 0.0) {
                    return Err(invalid("`initial.amplitude` must be non-negative"));
                }
                if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                    return Err(invalid("`initial.weights` must be non-negative"));
                }
            }
            InitialSpec::Explicit {
                v_scale,
                omega,
                theta,
                ..
            } => {
                if ![v_scale, omega, theta].iter().all(|x| x.is_finite()) {
                    return Err(invalid("explicit initial data must be finite"));
                }
            }
            InitialSpec::EnergyLevel { energy, .. } => finite_positive("initial.energy", energy)?,
            InitialSpec::SlowMode { amplitude } => finite_positive("initial.amplitude", amplitude)?,
            InitialSpec::Equilibrium => {}
        }
        for seed in self.seeds() {
            if seed > i64::MAX as u64 {
                return Err(invalid(format!("seed {seed} does not fit a TOML integer")));
            }
        }
        let t = &self.thresholds;
        for (name, x) in [
            ("thresholds.delta", t.delta),
            ("thresholds.eps", t.eps),
            ("thresholds.exit_radius", t.exit_radius),
            ("thresholds.t0_energy_fraction", t.t0_energy_fraction),
            ("thresholds.t0_window", t.t0_window),
            ("thresholds.fit_floor", t.fit_floor),
            ("thresholds.rate_fraction", t.rate_fraction),
        ] {
            finite_positive(name, x)?;
        }
        if let Some(e) = t.t0_energy {
            finite_positive("thresholds.t0_energy", e)?;
        }
        if !(0.0..1.0).contains(&t.basin_margin) {
            return Err(invalid("`thresholds.basin_margin` must lie in [0, 1)"));
        }
        if self.spectrum.n_eigs == 0 {
            return Err(invalid("`spectrum.n_eigs` must be positive"));
        }
        Ok(())
    }
}
