//! Column-wise comparison of two run directories.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use pendulum_core::dynamics::Mode;
use serde::{Deserialize, Serialize};

use crate::error::LabError;
use crate::io::{self, CsvTable};
use crate::run::Manifest;

/// Rows are matched on `t` rounded to this resolution, so runs with
/// different `dt` (and matching output times) can be compared.
const TIME_KEY_RESOLUTION: f64 = 1e-9;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnDiff {
    pub file: String,
    pub column: String,
    pub max_abs: f64,
    pub max_rel: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileDiff {
    pub file: String,
    pub byte_identical: bool,
    pub rows_a: usize,
    pub rows_b: usize,
    pub rows_compared: usize,
}

/// Max energy-identity residual of each run (linear runs only) and their
/// ratio `a / b`; about 4 for a second-order scheme when `dt_b = dt_a / 2`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IdentityRatio {
    pub residual_a: f64,
    pub residual_b: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SpectrumDiff {
    pub compared: usize,
    /// Largest distance from a leading eigenvalue of run `a` to the nearest
    /// eigenvalue of run `b`.
    pub max_abs: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareReport {
    pub tol: f64,
    pub files: Vec<FileDiff>,
    pub columns: Vec<ColumnDiff>,
    pub max_rel: f64,
    pub within_tol: bool,
    pub identity: Option<IdentityRatio>,
    pub spectrum: Option<SpectrumDiff>,
}

fn manifest(dir: &Path) -> Result<Manifest, LabError> {
    let path = dir.join(io::MANIFEST_FILE);
    let text = fs::read_to_string(&path)
        .map_err(|_| LabError::Schema(format!("{} has no manifest", dir.display())))?;
    serde_json::from_str(&text).map_err(|e| LabError::Schema(format!("{}: {e}", path.display())))
}

fn rel(a: f64, b: f64) -> (f64, f64) {
    if a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()) {
        return (0.0, 0.0);
    }
    let d = (a - b).abs();
    if !d.is_finite() {
        return (f64::INFINITY, f64::INFINITY);
    }
    let scale = a.abs().max(b.abs());
    (d, if scale > 0.0 { d / scale } else { 0.0 })
}

fn time_key(t: f64) -> i64 {
    (t / TIME_KEY_RESOLUTION).round() as i64
}

fn compare_tables(
    file: &str,
    a: &CsvTable,
    b: &CsvTable,
    columns: Option<&[String]>,
) -> Result<(usize, Vec<ColumnDiff>), LabError> {
    if a.columns != b.columns {
        return Err(LabError::Schema(format!(
            "{file}: columns {:?} vs {:?}",
            a.columns, b.columns
        )));
    }
    let selected: Vec<usize> = match columns {
        None => (1..a.columns.len()).collect(),
        Some(names) => names
            .iter()
            .filter_map(|n| a.columns.iter().position(|c| c == n))
            .filter(|&j| j > 0)
            .collect(),
    };
    let index: HashMap<i64, usize> = b
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| (time_key(r[0]), i))
        .collect();
    let mut diffs: Vec<ColumnDiff> = selected
        .iter()
        .map(|&j| ColumnDiff {
            file: file.into(),
            column: a.columns[j].clone(),
            max_abs: 0.0,
            max_rel: 0.0,
        })
        .collect();
    let mut matched = 0;
    for ra in &a.rows {
        let Some(&ib) = index.get(&time_key(ra[0])) else {
            continue;
        };
        matched += 1;
        let rb = &b.rows[ib];
        for (d, &j) in diffs.iter_mut().zip(&selected) {
            let (abs, r) = rel(ra[j], rb[j]);
            d.max_abs = d.max_abs.max(abs);
            d.max_rel = d.max_rel.max(r);
        }
    }
    if matched == 0 && !a.rows.is_empty() {
        return Err(LabError::Schema(format!("{file}: no common output times")));
    }
    Ok((matched, diffs))
}

/// `max |Δlyap/Δt + (D_k + D_{k+1})/2|` from an energy table.
pub fn identity_residual(energy: &CsvTable) -> Option<f64> {
    let t = energy.column("t")?;
    let l = energy.column("lyap_linear")?;
    let d = energy.column("dissipation")?;
    (1..t.len())
        .map(|k| ((l[k] - l[k - 1]) / (t[k] - t[k - 1]) + 0.5 * (d[k] + d[k - 1])).abs())
        .reduce(f64::max)
}

fn eigenvalues(dir: &Path) -> Option<Vec<(f64, f64)>> {
    let text = fs::read_to_string(dir.join(io::SPECTRUM_FILE)).ok()?;
    let v: serde_json::Value = serde_json::from_str(&text).ok()?;
    v.get("eigenvalues")?
        .as_array()?
        .iter()
        .map(|z| Some((z.get(0)?.as_f64()?, z.get(1)?.as_f64()?)))
        .collect()
}

/// Number of leading eigenvalues compared between spectra.
pub const LEADING_EIGENVALUES: usize = 6;

fn spectrum_diff(a: &Path, b: &Path) -> Option<SpectrumDiff> {
    let ea = eigenvalues(a)?;
    let eb = eigenvalues(b)?;
    if ea.is_empty() || eb.is_empty() {
        return None;
    }
    let mut lead = ea.clone();
    lead.sort_by(|x, y| x.0.hypot(x.1).total_cmp(&y.0.hypot(y.1)));
    lead.truncate(LEADING_EIGENVALUES);
    let max_abs = lead
        .iter()
        .map(|za| {
            eb.iter()
                .map(|zb| (za.0 - zb.0).hypot(za.1 - zb.1))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    Some(SpectrumDiff {
        compared: lead.len(),
        max_abs,
    })
}

/// Compares the CSV artifacts of two runs column by column (optionally only
/// `columns`), on rows with matching times.
pub fn compare(
    a: &Path,
    b: &Path,
    columns: Option<&[String]>,
    tol: f64,
) -> Result<CompareReport, LabError> {
    let ma = manifest(a)?;
    let mb = manifest(b)?;
    let mut files = Vec::new();
    let mut all = Vec::new();
    let mut energies = Vec::new();
    for file in [io::TRAJECTORY_FILE, io::ENERGY_FILE] {
        let (pa, pb) = (a.join(file), b.join(file));
        if !pa.exists() && !pb.exists() {
            continue;
        }
        let ta = io::read_csv(&pa)?;
        let tb = io::read_csv(&pb)?;
        let (matched, diffs) = compare_tables(file, &ta, &tb, columns)?;
        let byte_identical = fs::read(&pa).ok() == fs::read(&pb).ok();
        files.push(FileDiff {
            file: file.into(),
            byte_identical,
            rows_a: ta.rows.len(),
            rows_b: tb.rows.len(),
            rows_compared: matched,
        });
        all.extend(diffs);
        if file == io::ENERGY_FILE {
            energies = vec![ta, tb];
        }
    }
    if let Some(names) = columns {
        for n in names {
            if !all.iter().any(|d| &d.column == n) {
                return Err(LabError::Schema(format!("unknown column `{n}`")));
            }
        }
    }
    let max_rel = all.iter().map(|d| d.max_rel).fold(0.0, f64::max);
    let identity = match (&energies[..], ma.config.run.mode, mb.config.run.mode) {
        ([ea, eb], Mode::Linear, Mode::Linear) => {
            match (identity_residual(ea), identity_residual(eb)) {
                (Some(x), Some(y)) => Some(IdentityRatio {
                    residual_a: x,
                    residual_b: y,
                    ratio: x / y,
                }),
                _ => None,
            }
        }
        _ => None,
    };
    Ok(CompareReport {
        tol,
        files,
        columns: all,
        max_rel,
        within_tol: max_rel <= tol,
        identity,
        spectrum: spectrum_diff(a, b),
    })
}
