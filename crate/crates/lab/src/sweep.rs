//! Parameter sweeps: one scenario per value of a dotted config key, run
//! concurrently, summarized in `sweep.csv`.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::LabError;
use crate::io;
use crate::run;

pub const SWEEP_FILE: &str = "sweep.csv";
pub const SWEEP_COLUMNS: [&str; 10] = [
    "value",
    "t0",
    "basin_lhs",
    "basin_rhs",
    "inside_basin",
    "initial_energy",
    "sei_passed",
    "rate",
    "gamma_gap",
    "exit_code",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Base scenario, relative to the sweep file.
    pub base: PathBuf,
    /// Dotted key into the base scenario, e.g. `initial.theta`.
    pub parameter: String,
    pub values: Vec<f64>,
}

impl SweepConfig {
    pub fn load(path: &Path) -> Result<(Self, String), LabError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: Self = toml::from_str(&text).map_err(|e| LabError::Config(e.to_string()))?;
        if cfg.base.is_relative() {
            cfg.base = path.parent().unwrap_or(Path::new(".")).join(&cfg.base);
        }
        if cfg.values.is_empty() {
            return Err(LabError::Config("sweep has no values".into()));
        }
        Ok((cfg, hex::encode(Sha256::digest(text.as_bytes()))))
    }
}

/// `base` with `key` set to `value` and the name suffixed by the index.
pub fn variant(
    base: &str,
    key: &str,
    value: f64,
    index: usize,
) -> Result<ExperimentConfig, LabError> {
    let mut doc: toml::Table = toml::from_str(base).map_err(|e| LabError::Config(e.to_string()))?;
    let parts: Vec<&str> = key.split('.').collect();
    let (last, path) = parts
        .split_last()
        .ok_or_else(|| LabError::Config("empty sweep parameter".into()))?;
    let mut table = &mut doc;
    for p in path {
        table = table
            .get_mut(*p)
            .and_then(|v| v.as_table_mut())
            .ok_or_else(|| LabError::Config(format!("sweep key `{key}`: no table `{p}`")))?;
    }
    let slot = table.get_mut(*last).ok_or_else(|| {
        LabError::Config(format!("sweep key `{key}` is not in the base scenario"))
    })?;
    *slot = match slot {
        toml::Value::Integer(_) if value.fract() == 0.0 => toml::Value::Integer(value as i64),
        toml::Value::Float(_) | toml::Value::Integer(_) => toml::Value::Float(value),
        _ => {
            return Err(LabError::Config(format!(
                "sweep key `{key}` is not numeric"
            )))
        }
    };
    let name = doc
        .get("name")
        .and_then(|v| v.as_str())
        .unwrap_or("sweep")
        .to_string();
    doc.insert(
        "name".into(),
        toml::Value::String(format!("{name}_{index:03}")),
    );
    ExperimentConfig::from_toml(
        &toml::to_string(&doc).map_err(|e| LabError::Config(e.to_string()))?,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub t0: f64,
    pub basin_lhs: f64,
    pub basin_rhs: f64,
    pub inside_basin: bool,
    pub initial_energy: f64,
    pub sei_passed: bool,
    pub rate: f64,
    pub gamma_gap: f64,
    pub exit_code: i32,
}

impl SweepRow {
    fn failed(value: f64, code: i32) -> Self {
        Self {
            value,
            t0: f64::NAN,
            basin_lhs: f64::NAN,
            basin_rhs: f64::NAN,
            inside_basin: false,
            initial_energy: f64::NAN,
            sei_passed: false,
            rate: f64::NAN,
            gamma_gap: f64::NAN,
            exit_code: code,
        }
    }

    fn values(&self) -> Vec<f64> {
        let b = |x: bool| if x { 1.0 } else { 0.0 };
        vec![
            self.value,
            self.t0,
            self.basin_lhs,
            self.basin_rhs,
            b(self.inside_basin),
            self.initial_energy,
            b(self.sei_passed),
            self.rate,
            self.gamma_gap,
            self.exit_code as f64,
        ]
    }
}

/// Runs every variant (each into `out/<name>`) on a pool of `threads`
/// workers and writes the summary. Rows keep the order of `values`.
pub fn sweep(path: &Path, out: &Path, threads: Option<usize>) -> Result<Vec<SweepRow>, LabError> {
    let (cfg, hash) = SweepConfig::load(path)?;
    let base = std::fs::read_to_string(&cfg.base)
        .map_err(|e| LabError::Config(format!("cannot read {}: {e}", cfg.base.display())))?;
    let variants = cfg
        .values
        .iter()
        .enumerate()
        .map(|(i, &v)| variant(&base, &cfg.parameter, v, i))
        .collect::<Result<Vec<_>, _>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| LabError::Config(format!("thread pool: {e}")))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        variants
            .par_iter()
            .zip(cfg.values.par_iter())
            .map(|(c, &value)| {
                let dir = out.join(&c.name);
                match run::run(c, &dir) {
                    Ok(o) => SweepRow {
                        value,
                        t0: o.decay.transient.t0().unwrap_or(f64::NAN),
                        basin_lhs: o.audit.basin.lhs,
                        basin_rhs: o.audit.basin.rhs,
                        inside_basin: o.audit.basin.inside,
                        initial_energy: o.audit.initial_energy,
                        sei_passed: o.audit.sei.passed,
                        rate: o
                            .decay
                            .fit(pendulum_core::decay::SeriesId::Perturbation)
                            .map(|f| f.rate)
                            .unwrap_or(f64::NAN),
                        gamma_gap: o.decay.gamma_gap.unwrap_or(f64::NAN),
                        exit_code: 0,
                    },
                    Err(e) => SweepRow::failed(value, e.exit_code()),
                }
            })
            .collect()
    });
    let mut buf = format!("# config_hash={hash}\n").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(SWEEP_COLUMNS).expect("in-memory write");
        for r in &rows {
            w.write_record(r.values().iter().map(|x| format!("{x:.16e}")))
                .expect("in-memory write");
        }
        w.flush().expect("in-memory write");
    }
    io::atomic_write(&out.join(SWEEP_FILE), &buf)?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
name = "b"
[physics]
rho = 1.0
mu = 1.0
c_body = 1.0
beta_sq = 1.0
[grid]
nx = 8
ny = 8
[run]
xi = 1
mode = "nonlinear"
dt = 0.01
horizon = 1.0
output_stride = 2
[initial]
kind = "explicit"
theta = 0.5
"#;

    #[test]
    fn variant_sets_nested_keys() {
        let c = variant(BASE, "initial.theta", 1.25, 3).unwrap();
        assert_eq!(c.name, "b_003");
        assert!(matches!(
            c.initial,
            crate::config::InitialSpec::Explicit { theta, .. } if theta == 1.25
        ));
        let c = variant(BASE, "run.output_stride", 4.0, 0).unwrap();
        assert_eq!(c.run.output_stride, 4);
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        assert!(matches!(
            variant(BASE, "initial.nothing", 1.0, 0),
            Err(LabError::Config(_))
        ));
    }
}
