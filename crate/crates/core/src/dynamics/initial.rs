//! Initial data: rest-state perturbations built from named velocity
//! templates.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CoupledPencil, PendulumSystem};
use crate::energy::{energy_record, EnergyConvention};
use crate::error::ParamError;
use crate::linalg::spmv;
use crate::model::{CoupledState, Orientation};
use crate::spectral::{shift_invert_arnoldi, ArnoldiOptions, StokesEigen};

/// Shape of the initial velocity; normalized before use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VelocityTemplate {
    Zero,
    /// Divergence-free part of the rigid rotation field `e3 × x`.
    Rigid,
    /// Stokes eigenmode (0 = slowest).
    StokesMode {
        index: usize,
    },
    /// Random smooth field: Stokes coefficients `N(0,1)/λ_j`.
    Random {
        seed: u64,
    },
}

/// Stream-function coordinates of a template with `‖A0^α v‖ = 1` (zero for
/// [`VelocityTemplate::Zero`]).
pub fn template_psi(
    sys: &PendulumSystem,
    stokes: &StokesEigen,
    template: VelocityTemplate,
    alpha: f64,
) -> Result<DVector<f64>, ParamError> {
    let n = sys.reduced.dim();
    let psi = match template {
        VelocityTemplate::Zero => return Ok(DVector::zeros(n)),
        VelocityTemplate::Rigid => sys.reduced.coords(&sys.ops, sys.projected_rigid()),
        VelocityTemplate::StokesMode { index } => {
            if index >= n {
                return Err(ParamError::InvalidInitial {
                    reason: format!("Stokes mode {index} out of range"),
                });
            }
            stokes.eigen.vectors.column(index).into_owned()
        }
        VelocityTemplate::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let vals = &stokes.eigen.values;
            let c = DVector::from_fn(n, |j, _| {
                // Box–Muller keeps the dependency set small.
                let u1: f64 = rng.random_range(f64::EPSILON..1.0);
                let u2: f64 = rng.random_range(0.0..1.0);
                (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos() * vals[0] / vals[j]
            });
            &stokes.eigen.vectors * c
        }
    };
    let nrm = stokes.alpha_norm_psi(&psi, alpha);
    if !(nrm > 0.0) {
        return Err(ParamError::InvalidInitial {
            reason: "velocity template has zero norm".into(),
        });
    }
    Ok(psi / nrm)
}

/// Builds a state with velocity `v_scale · template`, angular velocity
/// `omega` and orientation angle `theta` relative to the rest state.
pub fn explicit_state(
    sys: &PendulumSystem,
    stokes: &StokesEigen,
    template: VelocityTemplate,
    v_scale: f64,
    omega: f64,
    theta: f64,
    alpha: f64,
) -> Result<CoupledState, ParamError> {
    let psi = template_psi(sys, stokes, template, alpha)? * v_scale;
    Ok(CoupledState {
        v: spmv(&sys.ops.curl, &psi),
        p: None,
        omega,
        orientation: Orientation::Angle { theta },
        sign: sys.sign,
        time: 0.0,
    })
}

/// Perturbation with `‖A0^α v0‖ + |ω0| + |γ0| = amplitude`, split between
/// the three parts by `weights` (normalized to sum one).
pub fn perturbation_state(
    sys: &PendulumSystem,
    stokes: &StokesEigen,
    template: VelocityTemplate,
    amplitude: f64,
    weights: [f64; 3],
    alpha: f64,
) -> Result<CoupledState, ParamError> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || weights.iter().any(|w| *w < 0.0) {
        return Err(ParamError::InvalidInitial {
            reason: "weights must be non-negative with positive sum".into(),
        });
    }
    let w = weights.map(|x| x / total);
    let w = if template == VelocityTemplate::Zero {
        let s = w[1] + w[2];
        [0.0, w[1] / s, w[2] / s]
    } else {
        w
    };
    let g = amplitude * w[2];
    if g > 2.0 {
        return Err(ParamError::InvalidInitial {
            reason: format!("orientation perturbation {g} exceeds 2"),
        });
    }
    // |γ| = 2 |sin(θ/2)|
    let theta = 2.0 * (0.5 * g).asin();
    explicit_state(
        sys,
        stokes,
        template,
        amplitude * w[0],
        amplitude * w[1],
        theta,
        alpha,
    )
}

/// Random direction in `(v, ω, θ)` scaled (by bisection) so that the energy
/// above the rest state equals `energy`.
pub fn energy_level_state(
    sys: &PendulumSystem,
    stokes: &StokesEigen,
    seed: u64,
    energy: f64,
    alpha: f64,
    convention: EnergyConvention,
) -> Result<CoupledState, ParamError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dir: [f64; 3] = [
        rng.random_range(0.2..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    ];
    let template = VelocityTemplate::Random {
        seed: seed ^ 0x5eed,
    };
    let params = &sys.params;
    let floor = energy_record(
        &sys.ops,
        &CoupledState::equilibrium(sys.ops.grid.n_faces(), sys.sign),
        None,
        params,
        convention,
    )
    .total();
    let at = |s: f64| -> Result<(CoupledState, f64), ParamError> {
        let st = explicit_state(
            sys,
            stokes,
            template,
            s * dir[0],
            s * dir[1],
            s * dir[2],
            alpha,
        )?;
        let e = energy_record(&sys.ops, &st, None, params, convention).total() - floor;
        Ok((st, e))
    };
    // Keep |θ| below π/2 so the potential part stays monotone.
    let s_max = 0.5 * std::f64::consts::PI / dir[2].abs().max(1e-12);
    let (mut lo, mut hi) = (0.0, 1.0_f64.min(s_max));
    while at(hi)?.1 < energy && hi < s_max {
        hi = (2.0 * hi).min(s_max);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if at(mid)?.1 < energy {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(at(0.5 * (lo + hi))?.0)
}

/// Real part of the slowest non-kernel eigenmode of the linearization,
/// scaled to `‖A0^α v‖ + |ω| + |γ| = amplitude`, with linearized
/// orientation. Linear runs from this datum stay in a two-dimensional
/// invariant subspace, free of start-up layers.
pub fn slow_mode_state(
    sys: &PendulumSystem,
    stokes: &StokesEigen,
    amplitude: f64,
    alpha: f64,
) -> crate::error::Result<CoupledState> {
    let pen = CoupledPencil::new(sys);
    let n = pen.n_psi();
    let res = shift_invert_arnoldi(
        &pen,
        &ArnoldiOptions {
            n_eigs: 6.min(pen.dim()),
            ..ArnoldiOptions::default()
        },
    )?;
    let scale = res.eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let k = (0..res.eigenvalues.len())
        .filter(|&i| res.eigenvalues[i].norm() > 1e-8 * scale)
        .min_by(|&a, &b| {
            res.eigenvalues[a]
                .norm()
                .total_cmp(&res.eigenvalues[b].norm())
        })
        .ok_or_else(|| ParamError::InvalidInitial {
            reason: "linearization has no non-kernel eigenvalue near the origin".into(),
        })?;
    let z = &res.vectors[k];
    let pivot = z[z.icamax()];
    let phase = pivot.conj() / pivot.norm();
    let x = z.map(|c| (c * phase).re);
    let psi = x.rows(0, n).into_owned();
    let gamma = [x[n + 1], x[n + 2]];
    let size = stokes.alpha_norm_psi(&psi, alpha) + x[n].abs() + gamma[0].hypot(gamma[1]);
    if !(size > 0.0) {
        return Err(ParamError::InvalidInitial {
            reason: "slow eigenmode has zero size".into(),
        }
        .into());
    }
    let s = amplitude / size;
    Ok(CoupledState {
        v: spmv(&sys.ops.curl, &(psi * s)),
        p: None,
        omega: x[n] * s,
        orientation: Orientation::Linearized {
            gamma: [gamma[0] * s, gamma[1] * s],
        },
        sign: sys.sign,
        time: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::HVector;
    use crate::model::{derive_params, CavityGeometry, EquilibriumSign, RawParams};
    use crate::spectral::alpha_norm;

    fn setup() -> (PendulumSystem, StokesEigen) {
        let p = derive_params(&RawParams::default(), &CavityGeometry::unit_square(10)).unwrap();
        let sys = PendulumSystem::new(p, EquilibriumSign::Lower).unwrap();
        let st = StokesEigen::new(&sys).unwrap();
        (sys, st)
    }

    #[test]
    fn perturbation_has_requested_norm() {
        let (sys, st) = setup();
        for tpl in [
            VelocityTemplate::Rigid,
            VelocityTemplate::StokesMode { index: 0 },
            VelocityTemplate::Random { seed: 3 },
        ] {
            let s = perturbation_state(&sys, &st, tpl, 0.05, [1.0, 1.0, 1.0], 0.75).unwrap();
            let h = HVector {
                v: s.v.clone(),
                omega: s.omega,
                gamma: s.gamma(),
            };
            let n = alpha_norm(&sys, &st, &h, 0.75).unwrap();
            assert!((n - 0.05).abs() < 1e-12, "{tpl:?}: {n}");
            assert!(sys.ops.divergence(&s.v).amax() < 1e-10);
        }
    }

    #[test]
    fn energy_level_is_hit() {
        let (sys, st) = setup();
        let s = energy_level_state(&sys, &st, 9, 0.02, 0.75, EnergyConvention::Consistent).unwrap();
        let e = energy_record(
            &sys.ops,
            &s,
            None,
            &sys.params,
            EnergyConvention::Consistent,
        )
        .total()
            + sys.params.beta_sq();
        assert!((e - 0.02).abs() < 1e-10);
    }
}
