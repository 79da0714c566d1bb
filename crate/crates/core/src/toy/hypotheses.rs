//! Sampled Lipschitz constant of `N` and regression of its growth exponents
//! near the origin.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ToySystem;
use crate::spectral::SpectralProjections;

/// Allowed shortfall of a fitted exponent below the declared one.
pub const EXPONENT_SLACK: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RayOptions {
    /// Random pairs / points sampled in the ball.
    pub n_samples: usize,
    pub radius: f64,
    pub seed: u64,
    pub n_rays: usize,
    /// Ray parameters span `radius · [10^lo, 10^hi]`.
    pub log_scales: (f64, f64),
    pub n_scales: usize,
}

impl Default for RayOptions {
    fn default() -> Self {
        Self {
            n_samples: 2000,
            radius: 0.1,
            seed: 7,
            n_rays: 16,
            log_scales: (-4.0, -1.0),
            n_scales: 13,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    /// `max ‖N(u1) − N(u2)‖ / ‖u1 − u2‖_α` over sampled pairs.
    pub lipschitz: f64,
    /// `max ‖N(u)‖ / [(‖u⁰‖ + ‖u¹‖^κ1)‖u¹‖^κ2 + ‖u¹‖_α^κ3]` over samples.
    pub growth_constant: f64,
    /// Smallest log-log slope of `‖N(u⁰ + s d)‖` in `s` (fixed `u⁰ ≠ 0`).
    pub mixed_exponent: Option<f64>,
    /// Smallest log-log slope of `‖N(s d)‖` in `s`, `d ∈ R[L]`.
    pub pure_exponent: Option<f64>,
    pub declared: [f64; 3],
    /// `κ1, κ2 ≥ 1` and `κ3 > 1`.
    pub admissible: bool,
    pub pass: bool,
}

fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let nrm = v.norm();
        if nrm > 1e-3 && nrm <= 1.0 {
            return v / nrm;
        }
    }
}

fn random_in_ball(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> DVector<f64> {
    let r = radius * rng.random_range(0.0f64..1.0).powf(1.0 / n as f64);
    random_unit(rng, n) * r
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    sxy / sxx
}

/// Minimum log-log slope of `‖N(base + s d)‖` over rays; rays on which `N`
/// vanishes identically are skipped.
fn ray_exponent(
    sys: &ToySystem,
    proj: &SpectralProjections,
    rng: &mut ChaCha8Rng,
    opts: &RayOptions,
    mixed: bool,
) -> Option<f64> {
    let n = sys.dim();
    let scales: Vec<f64> = (0..opts.n_scales)
        .map(|j| {
            let e = opts.log_scales.0
                + (opts.log_scales.1 - opts.log_scales.0) * j as f64 / (opts.n_scales - 1) as f64;
            opts.radius * 10f64.powf(e)
        })
        .collect();
    let mut worst: Option<f64> = None;
    for _ in 0..opts.n_rays {
        let base = if mixed {
            let b = proj.apply_q(&random_unit(rng, n));
            if b.norm() < 1e-8 {
                continue;
            }
            b.normalize() * (0.5 * opts.radius)
        } else {
            DVector::zeros(n)
        };
        let d = proj.apply_p(&random_unit(rng, n));
        if d.norm() < 1e-8 {
            continue;
        }
        let d = d.normalize();
        let ys: Vec<f64> = scales
            .iter()
            .map(|&s| sys.nonlinear(&(&base + &d * s)).norm())
            .collect();
        if ys.iter().any(|&y| !(y > 0.0)) {
            continue;
        }
        let lx: Vec<f64> = scales.iter().map(|s| s.ln()).collect();
        let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
        let k = slope(&lx, &ly);
        worst = Some(worst.map_or(k, |w: f64| w.min(k)));
    }
    worst
}

/// Samples the ball of radius `opts.radius` for the Lipschitz-type and growth
/// constants, and fits growth exponents along random rays. The declared
/// exponents pass when `κ1, κ2 ≥ 1`, `κ3 > 1` and neither fitted exponent
/// falls more than [`EXPONENT_SLACK`] below what the declaration implies:
/// `κ2` on mixed rays, `min(κ1 + κ2, κ3)` on pure-range rays.
pub fn verify_h4_h5(
    sys: &ToySystem,
    proj: &SpectralProjections,
    opts: &RayOptions,
) -> HypothesisCheck {
    let n = sys.dim();
    let [k1, k2, k3] = sys.kappa;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut lipschitz: f64 = 0.0;
    let mut growth: f64 = 0.0;
    for _ in 0..opts.n_samples {
        let u1 = random_in_ball(&mut rng, n, opts.radius);
        let u2 = random_in_ball(&mut rng, n, opts.radius);
        let den = sys.alpha_norm(&(&u1 - &u2));
        if den > 0.0 {
            lipschitz = lipschitz.max((sys.nonlinear(&u1) - sys.nonlinear(&u2)).norm() / den);
        }
        let (a, b) = (proj.apply_q(&u1), proj.apply_p(&u1));
        let nb = b.norm();
        let bound = (a.norm() + nb.powf(k1)) * nb.powf(k2) + sys.alpha_norm(&b).powf(k3);
        let m = sys.nonlinear(&u1).norm();
        if bound > 0.0 {
            growth = growth.max(m / bound);
        } else if m > 0.0 {
            growth = f64::INFINITY;
        }
    }
    let mixed_exponent = ray_exponent(sys, proj, &mut rng, opts, true);
    let pure_exponent = ray_exponent(sys, proj, &mut rng, opts, false);
    let admissible = k1 >= 1.0 && k2 >= 1.0 && k3 > 1.0;
    let mixed_ok = mixed_exponent.is_none_or(|k| k >= k2 - EXPONENT_SLACK);
    let pure_ok = pure_exponent.is_none_or(|k| k >= (k1 + k2).min(k3) - EXPONENT_SLACK);
    HypothesisCheck {
        lipschitz,
        growth_constant: growth,
        mixed_exponent,
        pure_exponent,
        declared: sys.kappa,
        admissible,
        pass: admissible && mixed_ok && pure_ok && lipschitz.is_finite() && growth.is_finite(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toy::{Monomial, Preset};
    use nalgebra::DMatrix;

    fn diag012(n: Vec<Vec<Monomial>>) -> ToySystem {
        ToySystem::new(
            "t",
            DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0, 2.0])),
            n,
            [1.0, 2.0, 2.0],
            0.5,
        )
        .unwrap()
    }

    #[test]
    fn cubic_preset_exponents() {
        let sys = Preset::Cubic3.system();
        let pr = sys.projections().unwrap();
        let c = verify_h4_h5(&sys, &pr, &RayOptions::default());
        assert!(c.pass, "{c:?}");
        let km = c.mixed_exponent.unwrap();
        let kp = c.pure_exponent.unwrap();
        assert!(
            (km - 2.0).abs() < 0.05 && (kp - 2.0).abs() < 0.05,
            "{km} {kp}"
        );
        assert!(c.lipschitz.is_finite() && c.lipschitz > 0.0);
    }

    #[test]
    fn zero_nonlinearity_has_zero_constants() {
        let sys = diag012(vec![vec![], vec![], vec![]]);
        let pr = sys.projections().unwrap();
        let c = verify_h4_h5(&sys, &pr, &RayOptions::default());
        assert_eq!(c.lipschitz, 0.0);
        assert_eq!(c.growth_constant, 0.0);
        assert!(c.mixed_exponent.is_none() && c.pure_exponent.is_none());
        assert!(c.pass);
    }

    #[test]
    fn linear_nonlinearity_fails() {
        let id = |i: usize| {
            let mut p = vec![0; 3];
            p[i] = 1;
            vec![Monomial::new(1.0, &p)]
        };
        let sys = diag012(vec![id(0), id(1), id(2)]);
        let pr = sys.projections().unwrap();
        let c = verify_h4_h5(&sys, &pr, &RayOptions::default());
        assert!(!c.pass);
        assert!(c.mixed_exponent.unwrap() < 0.5);
    }
}
