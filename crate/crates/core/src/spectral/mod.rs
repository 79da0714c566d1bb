//! Spectrum of the linearization `L = Ĩ⁻¹(Ã + B̃)`, hypothesis verdicts,
//! spectral projections onto the kernel and fractional powers of the Stokes
//! operator.

mod arnoldi;
mod assemble;
mod fractional;
mod projections;
mod report;

pub use arnoldi::{shift_invert_arnoldi, ArnoldiOptions, ArnoldiResult};
pub use assemble::{assemble_l, LOperator};
pub use fractional::{alpha_norm, frac_power, gen_eigen, kato_diagnostic, GenEigen, StokesEigen};
pub use projections::{projections, projections_from_bases, SpectralProjections};
pub use report::{
    spectrum, spectrum_of_matrix, system_spectrum, SpectrumMethod, SpectrumOptions, SpectrumReport,
    Verdicts, DENSE_LIMIT, H2_TOL,
};
