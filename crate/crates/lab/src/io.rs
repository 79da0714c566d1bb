//! Artifact files. Every file starts with the producing config hash; writes
//! go to a temporary sibling that is renamed into place.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use pendulum_core::dynamics::{SampleRecord, Trajectory};
use pendulum_core::energy::EnergyRecord;
use serde::Serialize;

use crate::error::LabError;

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const ENERGY_FILE: &str = "energy.csv";
pub const SPECTRUM_FILE: &str = "spectrum.json";
pub const DECAY_FILE: &str = "decay.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const AUDIT_FILE: &str = "audit.json";
pub const SNAPSHOT_FILE: &str = "velocity.bin";

pub const TRAJECTORY_COLUMNS: [&str; 10] = [
    "t",
    "omega",
    "phi",
    "chi1",
    "chi2",
    "gamma1",
    "gamma2",
    "v_l2",
    "v_alpha",
    "v_h2proxy",
];
pub const ENERGY_COLUMNS: [&str; 8] = [
    "t",
    "kinetic",
    "potential",
    "dissipation",
    "a",
    "E",
    "E1",
    "lyap_linear",
];

const HASH_PREFIX: &str = "# config_hash=";

pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), LabError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp"));
    let mut f = fs::File::create(&tmp).map_err(|e| LabError::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| LabError::io(&tmp, e))?;
    f.sync_all().map_err(|e| LabError::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| LabError::io(path, e))
}

/// 17 significant digits.
fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_bytes(hash: &str, columns: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> Vec<u8> {
    let mut buf = format!("{HASH_PREFIX}{hash}\n").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(columns).expect("in-memory write");
        for r in rows {
            w.write_record(r.into_iter().map(fmt))
                .expect("in-memory write");
        }
        w.flush().expect("in-memory write");
    }
    buf
}

fn trajectory_row(s: &SampleRecord) -> Vec<f64> {
    vec![
        s.t,
        s.omega,
        s.phi,
        s.chi1,
        s.chi2,
        s.gamma1,
        s.gamma2,
        s.v_l2,
        s.v_alpha,
        s.v_h2proxy,
    ]
}

fn energy_row(e: &EnergyRecord) -> Vec<f64> {
    vec![
        e.t,
        e.kinetic,
        e.potential,
        e.dissipation,
        e.a,
        e.e,
        e.e1.unwrap_or(f64::NAN),
        e.lyap_linear,
    ]
}

pub fn trajectory_csv(hash: &str, traj: &Trajectory) -> Vec<u8> {
    csv_bytes(
        hash,
        &TRAJECTORY_COLUMNS,
        traj.samples.iter().map(trajectory_row),
    )
}

pub fn energy_csv(hash: &str, traj: &Trajectory) -> Vec<u8> {
    csv_bytes(hash, &ENERGY_COLUMNS, traj.energy.iter().map(energy_row))
}

#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    config_hash: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

/// Pretty JSON whose first key is `config_hash`.
pub fn json_bytes<T: Serialize>(hash: &str, body: &T) -> Result<Vec<u8>, LabError> {
    let mut v = serde_json::to_vec_pretty(&Stamped {
        config_hash: hash,
        body,
    })
    .map_err(|e| LabError::Config(format!("cannot serialize artifact: {e}")))?;
    v.push(b'\n');
    Ok(v)
}

pub fn write_json<T: Serialize>(path: &Path, hash: &str, body: &T) -> Result<(), LabError> {
    atomic_write(path, &json_bytes(hash, body)?)
}

/// Flat binary velocity snapshots: one ASCII header line declaring layout,
/// dtype and byte order, then little-endian `f64` records
/// `t, omega, phi, v[n_faces]`.
pub fn snapshot_bytes(hash: &str, traj: &Trajectory) -> Vec<u8> {
    let n_faces = traj.snapshots.first().map(|s| s.v.len()).unwrap_or(0);
    let header = format!(
        "PNDV1 config_hash={hash} dtype=f64 endian=little records={} n_faces={n_faces} layout=t,omega,phi,v[n_faces]\n",
        traj.snapshots.len()
    );
    let mut buf = header.into_bytes();
    for s in &traj.snapshots {
        for x in [s.time, s.omega, s.phi()]
            .into_iter()
            .chain(s.v.iter().cloned())
        {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    buf
}

/// A parsed artifact CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub config_hash: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

pub fn read_csv(path: &Path) -> Result<CsvTable, LabError> {
    let text = fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
    let (first, rest) = text.split_once('\n').unwrap_or((&text, ""));
    let config_hash = first
        .strip_prefix(HASH_PREFIX)
        .ok_or_else(|| LabError::Schema(format!("{} lacks a config hash header", path.display())))?
        .trim()
        .to_string();
    let mut r = csv::Reader::from_reader(rest.as_bytes());
    let bad = |e: csv::Error| LabError::Schema(format!("{}: {e}", path.display()));
    let columns = r.headers().map_err(bad)?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(bad)?;
        let row = rec
            .iter()
            .map(|x| {
                x.parse::<f64>()
                    .map_err(|e| LabError::Schema(format!("{}: {x:?}: {e}", path.display())))
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(CsvTable {
        config_hash,
        columns,
        rows,
    })
}

pub fn artifact_path(dir: &Path, file: &str) -> PathBuf {
    dir.join(file)
}
