//! Physical parameters, state containers and equilibrium conventions.
//!
//! The cavity flow is planar: velocities are `(v1(x1, x2), v2(x1, x2))`, the
//! axis of rotation is `e3`, and `e3 × x = (-x2, x1)`. Orientation of the body
//! is the unit vector `chi = (cos phi, -sin phi)`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::ParamError;

/// Rectangular cavity in the body frame, together with its grid resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityGeometry {
    pub half_width: f64,
    pub half_height: f64,
    /// Cavity center relative to the suspension point, body frame.
    pub center_offset: [f64; 2],
    pub nx: usize,
    pub ny: usize,
}

impl CavityGeometry {
    /// Unit square centered at the suspension point.
    pub fn unit_square(n: usize) -> Self {
        Self {
            half_width: 0.5,
            half_height: 0.5,
            center_offset: [0.0, 0.0],
            nx: n,
            ny: n,
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        check_positive("half_width", self.half_width)?;
        check_positive("half_height", self.half_height)?;
        for &c in &self.center_offset {
            if !c.is_finite() {
                return Err(ParamError::NonFinite {
                    field: "center_offset",
                    value: c,
                });
            }
        }
        if self.nx < 8 || self.ny < 8 {
            return Err(ParamError::GridTooCoarse {
                nx: self.nx,
                ny: self.ny,
            });
        }
        Ok(())
    }

    pub fn hx(&self) -> f64 {
        2.0 * self.half_width / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        2.0 * self.half_height / self.ny as f64
    }
}

/// User-facing parameters before derivation of the liquid moment of inertia.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawParams {
    pub rho: f64,
    pub mu: f64,
    pub c_body: f64,
    pub beta_sq: f64,
}

impl Default for RawParams {
    fn default() -> Self {
        Self {
            rho: 1.0,
            mu: 1.0,
            c_body: 1.0,
            beta_sq: 1.0,
        }
    }
}

/// Validated parameters with the derived moments `c_liquid` and `c_total`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhysicalParams {
    rho: f64,
    mu: f64,
    c_body: f64,
    beta_sq: f64,
    cavity: CavityGeometry,
    c_liquid: f64,
    c_total: f64,
}

impl PhysicalParams {
    pub fn rho(&self) -> f64 {
        self.rho
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn c_body(&self) -> f64 {
        self.c_body
    }
    pub fn beta_sq(&self) -> f64 {
        self.beta_sq
    }
    pub fn cavity(&self) -> &CavityGeometry {
        &self.cavity
    }
    pub fn c_liquid(&self) -> f64 {
        self.c_liquid
    }
    pub fn c_total(&self) -> f64 {
        self.c_total
    }
    pub fn raw(&self) -> RawParams {
        RawParams {
            rho: self.rho,
            mu: self.mu,
            c_body: self.c_body,
            beta_sq: self.beta_sq,
        }
    }
}

fn check_positive(field: &'static str, value: f64) -> Result<(), ParamError> {
    if !value.is_finite() {
        return Err(ParamError::NonFinite { field, value });
    }
    if value <= 0.0 {
        return Err(ParamError::NonPositive { field, value });
    }
    Ok(())
}

/// Midpoint rule for `∫ |x|² dA` over the pressure cells of the cavity.
pub fn cavity_second_moment(cavity: &CavityGeometry) -> f64 {
    let (hx, hy) = (cavity.hx(), cavity.hy());
    let x0 = cavity.center_offset[0] - cavity.half_width;
    let y0 = cavity.center_offset[1] - cavity.half_height;
    let mut sum = 0.0;
    for j in 0..cavity.ny {
        let y = y0 + (j as f64 + 0.5) * hy;
        for i in 0..cavity.nx {
            let x = x0 + (i as f64 + 0.5) * hx;
            sum += x * x + y * y;
        }
    }
    sum * hx * hy
}

fn assemble(raw: &RawParams, cavity: &CavityGeometry) -> PhysicalParams {
    let c_liquid = raw.rho * cavity_second_moment(cavity);
    PhysicalParams {
        rho: raw.rho,
        mu: raw.mu,
        c_body: raw.c_body,
        beta_sq: raw.beta_sq,
        cavity: *cavity,
        c_liquid,
        c_total: raw.c_body + c_liquid,
    }
}

/// Validates `raw` and derives the liquid moment of inertia by the midpoint rule.
pub fn derive_params(
    raw: &RawParams,
    cavity: &CavityGeometry,
) -> Result<PhysicalParams, ParamError> {
    check_positive("rho", raw.rho)?;
    check_positive("mu", raw.mu)?;
    check_positive("c_body", raw.c_body)?;
    check_positive("beta_sq", raw.beta_sq)?;
    cavity.validate()?;
    Ok(assemble(raw, cavity))
}

/// Like [`derive_params`] but admits `rho = 0`: the liquid is massless and the
/// rigid block decouples. Used by degenerate-limit presets only.
pub fn derive_rigid_limit_params(
    raw: &RawParams,
    cavity: &CavityGeometry,
) -> Result<PhysicalParams, ParamError> {
    if !(raw.rho.is_finite() && raw.rho >= 0.0) {
        return Err(ParamError::NonPositive {
            field: "rho",
            value: raw.rho,
        });
    }
    check_positive("mu", raw.mu)?;
    check_positive("c_body", raw.c_body)?;
    check_positive("beta_sq", raw.beta_sq)?;
    cavity.validate()?;
    Ok(assemble(raw, cavity))
}

/// Like [`derive_params`] but admits `mu = 0` (no dissipation), for
/// conservation checks of the linear energy identity.
pub fn derive_inviscid_params(
    raw: &RawParams,
    cavity: &CavityGeometry,
) -> Result<PhysicalParams, ParamError> {
    if !(raw.mu.is_finite() && raw.mu >= 0.0) {
        return Err(ParamError::NonPositive {
            field: "mu",
            value: raw.mu,
        });
    }
    check_positive("rho", raw.rho)?;
    check_positive("c_body", raw.c_body)?;
    check_positive("beta_sq", raw.beta_sq)?;
    cavity.validate()?;
    Ok(assemble(raw, cavity))
}

/// Which rest state the perturbation is taken around.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EquilibriumSign {
    /// Center of mass lowest, `xi = +1`.
    Lower,
    /// Center of mass highest, `xi = -1`.
    Upper,
}

impl EquilibriumSign {
    pub fn xi(self) -> f64 {
        match self {
            EquilibriumSign::Lower => 1.0,
            EquilibriumSign::Upper => -1.0,
        }
    }

    pub fn from_xi(xi: i32) -> Option<Self> {
        match xi {
            1 => Some(EquilibriumSign::Lower),
            -1 => Some(EquilibriumSign::Upper),
            _ => None,
        }
    }

    /// Pendulum angle of the reference rest state.
    pub fn phi_ref(self) -> f64 {
        match self {
            EquilibriumSign::Lower => 0.0,
            EquilibriumSign::Upper => std::f64::consts::PI,
        }
    }
}

/// Body orientation.
///
/// Nonlinear runs store the angular deviation `theta = phi - phi_ref`, so that
/// `chi = xi (cos theta, -sin theta)` is exactly unit length and both rest
/// states are exact fixed points. Linearized runs evolve `gamma` directly; the
/// unit-length constraint is then only satisfied to first order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Orientation {
    Angle { theta: f64 },
    Linearized { gamma: [f64; 2] },
}

/// One snapshot of the coupled system, expressed as a perturbation of the rest
/// state selected by `sign`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledState {
    /// Face velocities on the staggered grid (u-faces then v-faces).
    pub v: DVector<f64>,
    /// Cell pressure, diagnostic only.
    pub p: Option<DVector<f64>>,
    pub omega: f64,
    pub orientation: Orientation,
    pub sign: EquilibriumSign,
    pub time: f64,
}

impl CoupledState {
    /// The rest state itself: zero perturbation.
    pub fn equilibrium(n_faces: usize, sign: EquilibriumSign) -> Self {
        Self {
            v: DVector::zeros(n_faces),
            p: None,
            omega: 0.0,
            orientation: Orientation::Angle { theta: 0.0 },
            sign,
            time: 0.0,
        }
    }

    pub fn xi(&self) -> f64 {
        self.sign.xi()
    }

    /// Perturbation `gamma = chi - xi e1`.
    pub fn gamma(&self) -> [f64; 2] {
        match self.orientation {
            Orientation::Angle { theta } => {
                let xi = self.xi();
                [xi * (theta.cos() - 1.0), -xi * theta.sin()]
            }
            Orientation::Linearized { gamma } => gamma,
        }
    }

    pub fn chi(&self) -> [f64; 2] {
        match self.orientation {
            Orientation::Angle { theta } => {
                let xi = self.xi();
                [xi * theta.cos(), -xi * theta.sin()]
            }
            Orientation::Linearized { gamma } => [gamma[0] + self.xi(), gamma[1]],
        }
    }

    /// Pendulum angle; for linearized orientations this is the angle of the
    /// (not necessarily unit) vector `gamma + xi e1`.
    pub fn phi(&self) -> f64 {
        match self.orientation {
            Orientation::Angle { theta } => self.sign.phi_ref() + theta,
            Orientation::Linearized { .. } => {
                let chi = self.chi();
                (-chi[1]).atan2(chi[0])
            }
        }
    }
}

/// Builds a nonlinear state from an orientation vector `chi`.
///
/// `chi` is renormalized before storing; deviations from unit length larger
/// than `1e-6` are rejected as corrupted.
pub fn state_from_chi(
    v: DVector<f64>,
    omega: f64,
    chi: [f64; 2],
    sign: EquilibriumSign,
) -> Result<CoupledState, ParamError> {
    let norm = chi[0].hypot(chi[1]);
    if !norm.is_finite() || (norm - 1.0).abs() > 1e-6 {
        return Err(ParamError::CorruptedOrientation { norm });
    }
    let (c1, c2) = (chi[0] / norm, chi[1] / norm);
    let xi = sign.xi();
    let theta = (-xi * c2).atan2(xi * c1);
    Ok(CoupledState {
        v,
        p: None,
        omega,
        orientation: Orientation::Angle { theta },
        sign,
        time: 0.0,
    })
}
