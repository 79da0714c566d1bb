//! Numerical laboratory for a physical pendulum whose interior cavity is
//! completely filled with a viscous liquid.
//!
//! The planar problem is discretized on a staggered (MAC) grid over a
//! rectangular cavity. The crate provides
//!
//! - the physical model and state containers ([`model`]),
//! - the cavity discretization with Leray projection and Stokes operator ([`grid`]),
//! - the coupled inertia operator, its linear/nonlinear parts and an IMEX
//!   time stepper ([`dynamics`]),
//! - spectra of the linearization, spectral projections and fractional
//!   powers ([`spectral`]),
//! - energy functionals and audits ([`energy`]),
//! - exponential decay fits and transient detection ([`decay`]),
//! - a finite-dimensional laboratory for evolution equations with a
//!   slow center manifold ([`toy`]).

pub mod decay;
pub mod dynamics;
pub mod energy;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod model;
pub mod spectral;
pub mod toy;

pub use error::{Error, Result};
pub use model::{
    derive_inviscid_params, derive_params, derive_rigid_limit_params, state_from_chi,
    CavityGeometry, CoupledState, EquilibriumSign, Orientation, PhysicalParams, RawParams,
};
