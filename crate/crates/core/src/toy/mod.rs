//! Finite-dimensional systems `du/dt + L u + N(u) = 0` with a non-trivial
//! kernel: kernel/range splitting, integration, hypothesis checks and the
//! stability/instability verdict.

mod hypotheses;
mod integrate;
mod system;
mod verdict;

pub use hypotheses::{verify_h4_h5, HypothesisCheck, RayOptions};
pub use integrate::{integrate_toy, mild_residual, rk4_step, split, MildResidual, ToyTrajectory};
pub use system::{Monomial, Preset, ToySystem};
pub use verdict::{
    amplitude_grid, theorem1_verdict, Classification, StabilityRun, Theorem1Options, Theorem1Report,
};
