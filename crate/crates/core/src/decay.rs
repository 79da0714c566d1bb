//! Exponential decay fits, transient-time detection and rate/gap comparison.

use serde::{Deserialize, Serialize};

use crate::dynamics::{Mode, SampleRecord, Trajectory};
use crate::error::DecayError;
use crate::spectral::SpectrumReport;

/// Minimum number of samples for a reportable rate.
pub const MIN_FIT_SAMPLES: usize = 20;
/// Minimum number of e-foldings spanned by a reportable fit.
pub const MIN_EFOLDINGS: f64 = 2.0;
/// Plain-fit residual above which the envelope of local maxima is fitted.
pub const ENVELOPE_SWITCH: f64 = 0.1;
/// Values are clipped from below at this floor before taking logarithms.
pub const CLIP_FLOOR: f64 = 1e-300;

/// Which norm a series tracks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesId {
    /// `‖A0^α v‖`
    VAlpha,
    /// `‖v‖`
    VL2,
    /// `‖A0 v‖`
    VH2Proxy,
    /// `‖v_t‖`
    VT,
    Omega,
    OmegaDot,
    /// `|γ|`
    Gamma,
    /// `|χ − e1|`
    ChiMinusE1,
    /// `‖A0^α v‖ + |ω| + |γ|`
    Perturbation,
}

impl SeriesId {
    pub const ALL: [SeriesId; 9] = [
        SeriesId::VAlpha,
        SeriesId::VL2,
        SeriesId::VH2Proxy,
        SeriesId::VT,
        SeriesId::Omega,
        SeriesId::OmegaDot,
        SeriesId::Gamma,
        SeriesId::ChiMinusE1,
        SeriesId::Perturbation,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub series: Option<SeriesId>,
    /// `κ` in `y ≈ c e^{−κ t}`.
    pub rate: f64,
    /// `c`, referred to `t = 0`.
    pub amplitude: f64,
    pub t_a: f64,
    pub t_b: f64,
    /// `max |y/ŷ − 1|` over the fitted points.
    pub residual: f64,
    /// Samples inside the window.
    pub n_samples: usize,
    /// Samples clipped at [`CLIP_FLOOR`].
    pub clipped: usize,
    /// Fitted through local maxima rather than all samples.
    pub envelope: bool,
    /// At least [`MIN_FIT_SAMPLES`] samples spanning [`MIN_EFOLDINGS`].
    pub reportable: bool,
}

impl DecayFit {
    pub fn efoldings(&self) -> f64 {
        self.rate * (self.t_b - self.t_a)
    }
}

/// Least squares on `(t, ln y)`; returns `(κ, ln c, max |y/ŷ − 1|)`.
fn loglinear(t: &[f64], ly: &[f64]) -> (f64, f64, f64) {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let ym = ly.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (ti, yi) in t.iter().zip(ly) {
        sxx += (ti - tm) * (ti - tm);
        sxy += (ti - tm) * (yi - ym);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let icpt = ym - slope * tm;
    let res = t
        .iter()
        .zip(ly)
        .map(|(ti, yi)| ((yi - icpt - slope * ti).exp() - 1.0).abs())
        .fold(0.0, f64::max);
    (-slope, icpt, res)
}

/// Interior local maxima of `y` restricted to the index subsequence `idx`.
fn local_maxima(idx: &[usize], y: &[f64]) -> Vec<usize> {
    (1..idx.len().saturating_sub(1))
        .filter(|&k| y[idx[k]] >= y[idx[k - 1]] && y[idx[k]] > y[idx[k + 1]])
        .map(|k| idx[k])
        .collect()
}

/// Fits `y ≈ c e^{−κ t}` on `window` (inclusive). When the plain fit residual
/// exceeds [`ENVELOPE_SWITCH`], the envelope of local maxima is fitted too and
/// the better of the two is kept.
pub fn fit_exponential(t: &[f64], y: &[f64], window: (f64, f64)) -> Result<DecayFit, DecayError> {
    let mut ts = Vec::new();
    let mut ls = Vec::new();
    let mut ys = Vec::new();
    let mut clipped = 0;
    let mut positive = 0;
    for (&ti, &yi) in t.iter().zip(y) {
        if ti < window.0 || ti > window.1 || !yi.is_finite() {
            continue;
        }
        if yi > 0.0 {
            positive += 1;
        }
        if yi < CLIP_FLOOR {
            clipped += 1;
        }
        let yc = yi.max(CLIP_FLOOR);
        ts.push(ti);
        ys.push(yc);
        ls.push(yc.ln());
    }
    if positive < MIN_FIT_SAMPLES {
        return Err(DecayError::TooFewSamples {
            found: positive,
            needed: MIN_FIT_SAMPLES,
        });
    }
    let (mut rate, mut lc, mut residual) = loglinear(&ts, &ls);
    let mut envelope = false;
    if residual > ENVELOPE_SWITCH {
        // Local maxima, then maxima of those (series with two humps per
        // oscillation period).
        let mut idx: Vec<usize> = (0..ys.len()).collect();
        for _ in 0..2 {
            idx = local_maxima(&idx, &ys);
            if idx.len() < 3 {
                break;
            }
            let pt: Vec<f64> = idx.iter().map(|&i| ts[i]).collect();
            let pl: Vec<f64> = idx.iter().map(|&i| ls[i]).collect();
            let (r, c, res) = loglinear(&pt, &pl);
            if res < residual {
                rate = r;
                lc = c;
                residual = res;
                envelope = true;
            }
            if residual <= ENVELOPE_SWITCH {
                break;
            }
        }
    }
    let t_a = ts[0];
    let t_b = *ts.last().expect("non-empty");
    Ok(DecayFit {
        series: None,
        rate,
        amplitude: lc.exp(),
        t_a,
        t_b,
        residual,
        n_samples: ts.len(),
        clipped,
        envelope,
        reportable: ts.len() >= MIN_FIT_SAMPLES && rate * (t_b - t_a) >= MIN_EFOLDINGS,
    })
}

/// Extracts a named norm series `(t, y)` from a trajectory. `beta_sq_over_c`
/// is needed only for `|ω̇| = |ȧ + (β²/C) γ2|`, with `ȧ` differenced from
/// the per-step energy records.
pub fn series(traj: &Trajectory, id: SeriesId, beta_sq_over_c: f64) -> (Vec<f64>, Vec<f64>) {
    let dt = traj.meta.dt;
    let a_dot = |s: &SampleRecord| -> f64 {
        let e = &traj.energy;
        let k = s.step.min(e.len().saturating_sub(1));
        if e.len() < 2 {
            0.0
        } else if k == 0 {
            (e[1].a - e[0].a) / dt
        } else {
            (e[k].a - e[k - 1].a) / dt
        }
    };
    let t = traj.samples.iter().map(|s| s.t).collect();
    let y = traj
        .samples
        .iter()
        .map(|s| match id {
            SeriesId::VAlpha => s.v_alpha,
            SeriesId::VL2 => s.v_l2,
            SeriesId::VH2Proxy => s.v_h2proxy,
            // Undefined before the first step.
            SeriesId::VT if s.step == 0 => f64::NAN,
            SeriesId::VT => s.v_t_l2,
            SeriesId::Omega => s.omega.abs(),
            SeriesId::OmegaDot => (a_dot(s) + beta_sq_over_c * s.gamma2).abs(),
            SeriesId::Gamma => s.gamma1.hypot(s.gamma2),
            SeriesId::ChiMinusE1 => (s.chi1 - 1.0).hypot(s.chi2),
            SeriesId::Perturbation => s.v_alpha + s.omega.abs() + s.gamma1.hypot(s.gamma2),
        })
        .collect();
    (t, y)
}

/// Fits a named series of a trajectory on `window`.
pub fn fit_series(
    traj: &Trajectory,
    id: SeriesId,
    beta_sq_over_c: f64,
    window: (f64, f64),
) -> Result<DecayFit, DecayError> {
    let (t, y) = series(traj, id, beta_sq_over_c);
    let mut fit = fit_exponential(&t, &y, window)?;
    fit.series = Some(id);
    Ok(fit)
}

/// Latest time at which `y` is still above `floor · max(y)`; fits should end
/// there to stay clear of round-off.
pub fn noise_floor_time(t: &[f64], y: &[f64], floor: f64) -> f64 {
    let ymax = y
        .iter()
        .cloned()
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max);
    let mut last = t.first().copied().unwrap_or(0.0);
    for (&ti, &yi) in t.iter().zip(y) {
        if yi > floor * ymax {
            last = ti;
        }
    }
    last
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TransientTime {
    Found {
        t0: f64,
    },
    /// The criteria were not met before the end of the run.
    HorizonExhausted {
        horizon: f64,
    },
}

impl TransientTime {
    pub fn t0(&self) -> Option<f64> {
        match self {
            TransientTime::Found { t0 } => Some(*t0),
            TransientTime::HorizonExhausted { .. } => None,
        }
    }
}

/// Onset of clean exponential decay: the first sample time `t` such that the
/// perturbation energy stays below `energy_threshold` from `t` on and the
/// decay fit of `‖v‖` over `[t, t + window]` (envelope fallback included) has
/// residual below [`ENVELOPE_SWITCH`]. The window should cover a few periods
/// when the leading mode oscillates.
///
/// The perturbation energy is the total energy minus the energy of the lower
/// rest state for nonlinear runs and the quadratic form for linear runs.
pub fn detect_t0(traj: &Trajectory, energy_threshold: f64, window: f64) -> TransientTime {
    let horizon = traj.samples.last().map(|s| s.t).unwrap_or(0.0);
    let exhausted = TransientTime::HorizonExhausted { horizon };
    let pert = perturbation_energy(traj);
    // Suffix maximum of the perturbation energy over all steps.
    let mut suffix = vec![f64::NEG_INFINITY; pert.len() + 1];
    for k in (0..pert.len()).rev() {
        suffix[k] = suffix[k + 1].max(pert[k]);
    }
    let t: Vec<f64> = traj.samples.iter().map(|s| s.t).collect();
    let v: Vec<f64> = traj.samples.iter().map(|s| s.v_l2).collect();
    for (i, s) in traj.samples.iter().enumerate() {
        let k = s.step.min(pert.len().saturating_sub(1));
        if !(suffix[k] < energy_threshold) {
            continue;
        }
        if t[i] + window > horizon + 1e-12 * horizon.abs().max(1.0) {
            break;
        }
        let end = t.partition_point(|&x| x <= t[i] + window);
        if v[i..end].iter().any(|&x| !(x > 0.0)) {
            continue;
        }
        match fit_exponential(&t[i..end], &v[i..end], (t[i], t[i] + window)) {
            Ok(f) if f.residual < ENVELOPE_SWITCH && f.rate > 0.0 => {
                return TransientTime::Found { t0: t[i] }
            }
            _ => {}
        }
    }
    exhausted
}

/// Per-step perturbation energy (see [`detect_t0`]).
pub fn perturbation_energy(traj: &Trajectory) -> Vec<f64> {
    traj.energy
        .iter()
        .map(|e| match traj.meta.mode {
            Mode::Linear => e.lyap_linear,
            Mode::Nonlinear => e.total() - traj.meta.potential_floor,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateGapComparison {
    pub rate: f64,
    pub gamma_gap: f64,
    pub ratio: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Default acceptance ratio for `κ / γ_gap`.
pub const RATE_GAP_RATIO: f64 = 0.8;

/// Compares a fitted rate with the spectral gap; passes when
/// `κ / γ_gap ≥ threshold`.
pub fn rate_vs_gap(
    fit: &DecayFit,
    report: &SpectrumReport,
    threshold: f64,
) -> Result<RateGapComparison, DecayError> {
    let gap = report.gamma_gap.ok_or(DecayError::NoGap { gap: None })?;
    let ratio = fit.rate / gap;
    Ok(RateGapComparison {
        rate: fit.rate,
        gamma_gap: gap,
        ratio,
        threshold,
        pass: ratio >= threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
        let t: Vec<f64> = (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect();
        let y = t.iter().map(|&x| f(x)).collect();
        (t, y)
    }

    #[test]
    fn exact_exponential() {
        let (t, y) = sample(|x| 3.0 * (-2.0 * x).exp(), 0.0, 5.0, 101);
        let f = fit_exponential(&t, &y, (0.0, 5.0)).unwrap();
        assert!((f.rate - 2.0).abs() < 1e-12);
        assert!((f.amplitude - 3.0).abs() < 1e-11);
        assert!(f.residual < 1e-12);
        assert!(f.reportable && !f.envelope);
    }

    #[test]
    fn rippled_exponential() {
        let (t, y) = sample(
            |x| 3.0 * (-2.0 * x).exp() * (1.0 + 0.01 * (10.0 * x).sin()),
            0.0,
            5.0,
            501,
        );
        let f = fit_exponential(&t, &y, (0.0, 5.0)).unwrap();
        assert!((f.rate - 2.0).abs() < 0.02);
    }

    #[test]
    fn constant_series_has_zero_rate() {
        let (t, y) = sample(|_| 0.7, 0.0, 1.0, 30);
        let f = fit_exponential(&t, &y, (0.0, 1.0)).unwrap();
        assert!(f.rate.abs() < 1e-12);
        assert!(!f.reportable);
    }

    #[test]
    fn too_few_samples() {
        let (t, y) = sample(|x| (-x).exp(), 0.0, 1.0, 10);
        assert!(matches!(
            fit_exponential(&t, &y, (0.0, 1.0)),
            Err(DecayError::TooFewSamples { found: 10, .. })
        ));
    }

    #[test]
    fn oscillatory_decay_uses_envelope() {
        let (t, y) = sample(
            |x| (-0.5 * x).exp() * (1.0 + 0.6 * (3.0 * x).cos()),
            0.0,
            12.0,
            1201,
        );
        let f = fit_exponential(&t, &y, (0.0, 12.0)).unwrap();
        assert!(f.envelope);
        assert!((f.rate - 0.5).abs() < 1e-3, "{}", f.rate);
        assert!(f.residual < 0.01);
    }

    #[test]
    fn zeros_are_clipped_and_flagged() {
        let (t, mut y) = sample(|x| (-x).exp(), 0.0, 4.0, 40);
        y[5] = 0.0;
        let f = fit_exponential(&t, &y, (0.0, 4.0)).unwrap();
        assert_eq!(f.clipped, 1);
    }

    #[test]
    fn noise_floor_cut() {
        let (t, y) = sample(|x| (-x).exp(), 0.0, 40.0, 401);
        let tb = noise_floor_time(&t, &y, 1e-10);
        assert!((tb - 23.0).abs() < 0.1);
    }
}
