//! `toy` subcommand: hypothesis checks, stability verdict and an RK4
//! refinement oracle for one preset.

use std::path::Path;

use nalgebra::DVector;
use pendulum_core::toy::{
    amplitude_grid, integrate_toy, theorem1_verdict, verify_h4_h5, HypothesisCheck, Preset,
    RayOptions, Theorem1Options, Theorem1Report, ToySystem,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::LabError;
use crate::io;

/// Refinement factor of the oracle integration.
pub const ORACLE_REFINEMENT: usize = 10;
/// Relative agreement required between production and oracle trajectories.
pub const ORACLE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyConfig {
    pub preset: Preset,
    pub amplitudes: Vec<f64>,
    pub directions: usize,
    pub seed: u64,
    pub oracle_horizon: f64,
    pub options: Theorem1Options,
    pub rays: RayOptions,
}

impl ToyConfig {
    /// Stable presets probe `{1e-3, 1e-2, 1e-1}`; the unstable one starts
    /// from norms down to `1e-6` with a longer horizon.
    pub fn for_preset(preset: Preset) -> Self {
        let (amplitudes, horizon) = match preset {
            Preset::Unstable3 => ((2..=6).map(|k| 10f64.powi(-k)).collect(), 80.0),
            _ => (vec![1e-3, 1e-2, 1e-1], 40.0),
        };
        Self {
            preset,
            amplitudes,
            directions: 3,
            seed: 11,
            oracle_horizon: 10.0,
            options: Theorem1Options {
                horizon,
                ..Theorem1Options::default()
            },
            rays: RayOptions::default(),
        }
    }

    /// Parses a toy document: `preset` selects the defaults of
    /// [`ToyConfig::for_preset`], every other key overrides them.
    pub fn from_toml(text: &str) -> Result<Self, LabError> {
        let user: toml::Table =
            toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
        let preset = user
            .get("preset")
            .and_then(|v| v.as_str())
            .ok_or_else(|| LabError::Config("toy config needs a `preset`".into()))?;
        let preset = Preset::from_name(preset)
            .ok_or_else(|| LabError::Config(format!("unknown preset `{preset}`")))?;
        let mut merged = toml::Table::try_from(Self::for_preset(preset))
            .map_err(|e| LabError::Config(e.to_string()))?;
        merge(&mut merged, user);
        merged
            .try_into()
            .map_err(|e: toml::de::Error| LabError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn hash(&self) -> String {
        let text = toml::to_string(self).expect("toy config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub refinement: usize,
    pub horizon: f64,
    /// `max_t ‖u_dt(t) − u_{dt/r}(t)‖ / max(‖u_{dt/r}(t)‖, tiny)`.
    pub max_rel: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyReport {
    pub preset: Preset,
    pub hypotheses: Option<HypothesisCheck>,
    pub verdict: Option<Theorem1Report>,
    /// Why the spectral splitting was refused, if it was.
    pub refused: Option<String>,
    pub oracle: OracleCheck,
    pub pass: bool,
}

/// Production RK4 at `dt` against RK4 at `dt / refinement` from `u0`.
pub fn oracle_check(sys: &ToySystem, u0: &DVector<f64>, horizon: f64, dt: f64) -> OracleCheck {
    let coarse = integrate_toy(sys, None, u0, horizon, dt);
    let fine = integrate_toy(sys, None, u0, horizon, dt / ORACLE_REFINEMENT as f64);
    let mut max_rel: f64 = 0.0;
    for (k, uc) in coarse.u.iter().enumerate() {
        let Some(uf) = fine.u.get(k * ORACLE_REFINEMENT) else {
            break;
        };
        max_rel = max_rel.max((uc - uf).norm() / uf.norm().max(1e-300));
    }
    OracleCheck {
        refinement: ORACLE_REFINEMENT,
        horizon,
        max_rel,
        pass: max_rel <= ORACLE_TOL,
    }
}

pub fn evaluate(cfg: &ToyConfig) -> ToyReport {
    let sys = cfg.preset.system();
    let grid = amplitude_grid(sys.dim(), &cfg.amplitudes, cfg.directions, cfg.seed);
    let oracle_start = grid
        .last()
        .cloned()
        .unwrap_or_else(|| DVector::from_element(sys.dim(), 0.01));
    let oracle = oracle_check(&sys, &oracle_start, cfg.oracle_horizon, cfg.options.dt);
    let (hypotheses, verdict, refused) = match sys.projections() {
        Err(e) => (None, None, Some(e.to_string())),
        Ok(proj) => {
            let h = verify_h4_h5(&sys, &proj, &cfg.rays);
            match theorem1_verdict(&sys, &grid, &cfg.options) {
                Ok(v) => (Some(h), Some(v), None),
                Err(e) => (Some(h), None, Some(e.to_string())),
            }
        }
    };
    let pass = verdict.as_ref().is_some_and(|v| v.pass) && oracle.pass;
    ToyReport {
        preset: cfg.preset,
        hypotheses,
        verdict,
        refused,
        oracle,
        pass,
    }
}

pub const TOY_FILE: &str = "toy.json";

pub fn run_toy(cfg: &ToyConfig, dir: &Path) -> Result<ToyReport, LabError> {
    let rep = evaluate(cfg);
    io::write_json(&dir.join(TOY_FILE), &cfg.hash(), &rep)?;
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_document_overrides_preset_defaults() {
        let cfg = ToyConfig::from_toml(
            "preset = \"unstable3\"\nseed = 5\n[options]\nexit_radius = 0.25\n",
        )
        .unwrap();
        let mut want = ToyConfig::for_preset(Preset::Unstable3);
        want.seed = 5;
        want.options.exit_radius = 0.25;
        assert_eq!(cfg, want);
    }

    #[test]
    fn full_document_round_trips() {
        for p in Preset::ALL {
            let cfg = ToyConfig::for_preset(p);
            let text = toml::to_string(&cfg).unwrap();
            assert_eq!(ToyConfig::from_toml(&text).unwrap(), cfg);
        }
    }

    #[test]
    fn bad_documents_are_config_errors() {
        for text in [
            "seed = 1\n",
            "preset = \"quartic\"\n",
            "preset = \"cubic3\"\nbogus = 1\n",
            "preset = \"cubic3\"\n[options]\nbogus = 1\n",
        ] {
            assert!(
                matches!(ToyConfig::from_toml(text), Err(LabError::Config(_))),
                "{text}"
            );
        }
    }
}
