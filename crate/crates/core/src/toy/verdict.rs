//! Stability / instability verdict for a toy system over a grid of initial
//! data.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::integrate::{integrate_toy, mild_residual, MildResidual};
use super::ToySystem;
use crate::decay::{fit_exponential, noise_floor_time};
use crate::error::ToyError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    /// All non-zero eigenvalues have positive real part.
    Stable,
    /// Some eigenvalue has negative real part.
    Unstable,
    /// Neither (eigenvalues on the imaginary axis).
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Theorem1Options {
    pub horizon: f64,
    pub dt: f64,
    /// Initial data with `‖u0‖_α ≥ delta` are skipped in the stable case.
    pub delta: f64,
    /// Bound on `sup_t ‖u(t)‖_α` in the stable case.
    pub eps: f64,
    /// Decay rate tested is `b = b_fraction · γ_gap`.
    pub b_fraction: f64,
    /// Fitted rate must reach `rate_fraction · b`.
    pub rate_fraction: f64,
    /// Radius of the ball that unstable trajectories must leave.
    pub exit_radius: f64,
    /// `‖u¹(T)‖ ≤ convergence_tol · ‖u¹(0)‖` counts as converged.
    pub convergence_tol: f64,
}

impl Default for Theorem1Options {
    fn default() -> Self {
        Self {
            horizon: 40.0,
            dt: 0.01,
            delta: 0.2,
            eps: 0.5,
            b_fraction: 0.9,
            rate_fraction: 0.8,
            exit_radius: 1.0,
            convergence_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRun {
    pub u0: Vec<f64>,
    pub u0_alpha: f64,
    pub sup_alpha: f64,
    pub blown_up: bool,
    pub bounded: bool,
    /// `ū = Q u(T)`.
    pub limit: Vec<f64>,
    /// `‖u(T) − ū‖ / ‖u¹(0)‖` (0 if `u¹(0) = 0`).
    pub distance_to_limit: f64,
    pub converged: bool,
    /// `‖ū − Q u0‖`: drift of the kernel coordinate.
    pub limit_shift: f64,
    /// `‖ū − Q u0‖ / ‖u¹(0)‖_α`.
    pub shift_ratio: Option<f64>,
    /// Fitted decay rate of `‖u¹(t)‖`.
    pub rate: Option<f64>,
    pub fit_residual: Option<f64>,
    /// `max_t ‖u¹(t)‖ e^{b t} / ‖u¹(0)‖`.
    pub envelope_constant: Option<f64>,
    pub rate_ok: bool,
    /// First time `‖u(t)‖_α` exceeds the exit radius.
    pub exit_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Report {
    pub system: String,
    pub classification: Classification,
    pub gamma_gap: Option<f64>,
    pub b: Option<f64>,
    pub rate_threshold: Option<f64>,
    pub runs: Vec<StabilityRun>,
    pub mild: Vec<MildResidual>,
    pub mild_ok: bool,
    pub projection_residual: f64,
    pub kernel_equation_residual: f64,
    pub pass: bool,
}

/// Random directions scaled to each amplitude (one per amplitude and
/// direction index).
pub fn amplitude_grid(
    n: usize,
    amplitudes: &[f64],
    directions: usize,
    seed: u64,
) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dirs: Vec<DVector<f64>> = (0..directions)
        .map(|_| DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)).normalize())
        .collect();
    amplitudes
        .iter()
        .flat_map(|&a| dirs.iter().map(move |d| d * a))
        .collect()
}

fn alpha_norms(sys: &ToySystem, us: &[DVector<f64>]) -> Vec<f64> {
    us.iter().map(|u| sys.alpha_norm(u)).collect()
}

/// Stable systems: every initial datum with `‖u0‖_α < δ` stays in the
/// `ε`-ball, converges to a kernel point and its range component decays at a
/// fitted rate of at least `rate_fraction · b`; RK4 solutions of the linear
/// range problem match the matrix exponential within integrator error.
///
/// Unstable systems: every initial datum leaves the `exit_radius` ball.
pub fn theorem1_verdict(
    sys: &ToySystem,
    grid: &[DVector<f64>],
    opts: &Theorem1Options,
) -> Result<Theorem1Report, ToyError> {
    for u in grid {
        if u.len() != sys.dim() {
            return Err(ToyError::Dimension {
                n: sys.dim(),
                what: "initial datum",
                got: u.len(),
            });
        }
    }
    let rep = sys.spectrum();
    let proj = sys.projections()?;
    let classification = if rep.unstable_count > 0 {
        Classification::Unstable
    } else if rep.gamma_gap.is_some() && rep.verdicts.h3 {
        Classification::Stable
    } else {
        Classification::Degenerate
    };
    let b = rep.gamma_gap.map(|g| opts.b_fraction * g);
    let rate_threshold = b.map(|b| opts.rate_fraction * b);
    let mut runs = Vec::new();
    let mut mild = Vec::new();
    let mut projection_residual: f64 = 0.0;
    let mut kernel_equation_residual: f64 = 0.0;
    for u0 in grid {
        let u0_alpha = sys.alpha_norm(u0);
        if classification == Classification::Stable && u0_alpha >= opts.delta {
            continue;
        }
        let tr = integrate_toy(sys, Some(&proj), u0, opts.horizon, opts.dt);
        projection_residual = projection_residual.max(tr.projection_residual);
        kernel_equation_residual = kernel_equation_residual.max(tr.kernel_equation_residual);
        let norms = alpha_norms(sys, &tr.u);
        let sup_alpha = norms.iter().cloned().fold(0.0, f64::max);
        let exit_time = norms
            .iter()
            .position(|&x| x > opts.exit_radius)
            .map(|i| tr.t[i])
            .or(if tr.blown_up {
                tr.t.last().copied()
            } else {
                None
            });
        let last = tr.last();
        let limit = proj.apply_q(last);
        let u1_0 = proj.apply_p(u0);
        let n1 = u1_0.norm();
        let dist = (last - &limit).norm();
        let distance_to_limit = if n1 > 0.0 { dist / n1 } else { dist };
        let limit_shift = (&limit - proj.apply_q(u0)).norm();
        let (mut rate, mut fit_residual, mut envelope_constant) = (None, None, None);
        let mut rate_ok = true;
        if classification == Classification::Stable && n1 > 0.0 {
            let y: Vec<f64> = tr.u1.iter().map(|v| v.norm()).collect();
            let tb = noise_floor_time(&tr.t, &y, 1e-9);
            if let Ok(f) = fit_exponential(&tr.t, &y, (0.0, tb)) {
                rate = Some(f.rate);
                fit_residual = Some(f.residual);
                rate_ok = rate_threshold.is_some_and(|th| f.rate >= th);
            } else {
                rate_ok = false;
            }
            let bb = b.expect("stable implies a gap");
            envelope_constant = Some(
                tr.t.iter()
                    .zip(&y)
                    .map(|(t, y)| y * (bb * t).exp() / n1)
                    .fold(0.0, f64::max),
            );
            for t in [0.5, 1.0, 2.0] {
                mild.push(mild_residual(sys, &proj, u0, t, opts.dt));
            }
        }
        runs.push(StabilityRun {
            u0: u0.iter().cloned().collect(),
            u0_alpha,
            sup_alpha,
            blown_up: tr.blown_up,
            bounded: !tr.blown_up && sup_alpha < opts.eps,
            limit: limit.iter().cloned().collect(),
            distance_to_limit,
            converged: !tr.blown_up && distance_to_limit <= opts.convergence_tol,
            limit_shift,
            shift_ratio: (n1 > 0.0).then(|| limit_shift / sys.alpha_norm(&u1_0)),
            rate,
            fit_residual,
            envelope_constant,
            rate_ok,
            exit_time,
        });
    }
    let mild_ok = mild
        .iter()
        .all(|m| m.residual <= 2.0 * m.integrator_error + 1e-13);
    let pass = !runs.is_empty()
        && match classification {
            Classification::Stable => {
                mild_ok && runs.iter().all(|r| r.bounded && r.converged && r.rate_ok)
            }
            Classification::Unstable => runs.iter().all(|r| r.exit_time.is_some()),
            Classification::Degenerate => false,
        };
    Ok(Theorem1Report {
        system: sys.name.clone(),
        classification,
        gamma_gap: rep.gamma_gap,
        b,
        rate_threshold,
        runs,
        mild,
        mild_ok,
        projection_residual,
        kernel_equation_residual,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toy::Preset;

    #[test]
    fn cubic_preset_passes() {
        let sys = Preset::Cubic3.system();
        let grid = amplitude_grid(3, &[1e-3, 1e-2, 1e-1], 3, 11);
        let rep = theorem1_verdict(&sys, &grid, &Theorem1Options::default()).unwrap();
        assert_eq!(rep.classification, Classification::Stable);
        assert!(rep.pass, "{rep:#?}");
        assert!(rep.projection_residual < 1e-12);
        // The kernel coordinate drifts: the limit is not Q u0.
        assert!(rep.runs.iter().any(|r| r.limit_shift > 1e-6));
    }

    #[test]
    fn zero_datum_stays_zero() {
        let sys = Preset::Cubic3.system();
        let rep =
            theorem1_verdict(&sys, &[DVector::zeros(3)], &Theorem1Options::default()).unwrap();
        let r = &rep.runs[0];
        assert_eq!(r.sup_alpha, 0.0);
        assert!(r.limit.iter().all(|&x| x == 0.0));
        assert!(rep.pass);
    }

    #[test]
    fn unstable_preset_leaves_the_ball() {
        let sys = Preset::Unstable3.system();
        let amps: Vec<f64> = (2..=6).map(|k| 10f64.powi(-k)).collect();
        let grid = amplitude_grid(3, &amps, 2, 5);
        let opts = Theorem1Options {
            horizon: 80.0,
            ..Theorem1Options::default()
        };
        let rep = theorem1_verdict(&sys, &grid, &opts).unwrap();
        assert_eq!(rep.classification, Classification::Unstable);
        assert!(rep.pass, "{rep:#?}");
    }

    #[test]
    fn jordan_preset_is_refused() {
        let sys = Preset::Jordan2.system();
        assert!(theorem1_verdict(&sys, &[DVector::zeros(2)], &Theorem1Options::default()).is_err());
    }
}
