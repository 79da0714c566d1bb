use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::arnoldi::{left_kernel, shift_invert_arnoldi, ArnoldiOptions};
use super::assemble::{assemble_l, LOperator};
use super::projections::{kernel_bases, kernel_range_angle};
use crate::dynamics::{CoupledPencil, PendulumSystem};
use crate::error::SpectralError;

/// Reduced dimension up to which `L` is handled densely.
pub const DENSE_LIMIT: usize = 2000;
/// Minimum kernel/range angle for the spectral splitting to be accepted.
pub const H2_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumOptions {
    /// Kernel threshold relative to the largest singular value.
    pub tol_rank_rel: f64,
    /// Half-width of the band around the imaginary axis.
    pub tol_imag: f64,
    /// Number of eigenvalues reported (closest to the origin).
    pub n_eigs: usize,
    /// Shift for the iterative path.
    pub shift: f64,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            tol_rank_rel: 1e-8,
            tol_imag: 1e-6,
            n_eigs: 40,
            shift: -0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumMethod {
    Dense,
    Arnoldi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdicts {
    /// Non-trivial kernel.
    pub h1: bool,
    /// Kernel and range intersect only at zero.
    pub h2: bool,
    /// No non-zero eigenvalue on the imaginary axis.
    pub h3: bool,
    /// No eigenvalue with negative real part.
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// Sorted by real part, then imaginary part.
    pub eigenvalues: Vec<Complex<f64>>,
    pub kernel_dim: usize,
    pub h2_angle: f64,
    /// `min |Re λ|` over the non-zero eigenvalues.
    pub imag_axis_gap: f64,
    /// `min Re λ` over the non-zero eigenvalues, when positive.
    pub gamma_gap: Option<f64>,
    pub unstable_count: usize,
    /// `‖L (0, 0, e1)‖`.
    pub kernel_residual: f64,
    pub sigma_max: f64,
    /// Absolute kernel threshold `tol_rank_rel · sigma_max`.
    pub tol_rank: f64,
    pub tol_rank_rel: f64,
    pub tol_imag: f64,
    pub method: SpectrumMethod,
    pub dim: usize,
    pub xi: Option<i32>,
    pub grid: Option<String>,
    pub verdicts: Verdicts,
}

impl SpectrumReport {
    /// Real parts of the eigenvalues below `−tol_imag`, most negative first.
    pub fn unstable_eigenvalues(&self) -> Vec<Complex<f64>> {
        self.eigenvalues
            .iter()
            .filter(|z| z.re < -self.tol_imag)
            .cloned()
            .collect()
    }
}

/// Eigenvalue bookkeeping shared by the dense and iterative paths.
struct Classified {
    imag_axis_gap: f64,
    gamma_gap: Option<f64>,
    unstable_count: usize,
    h3: bool,
}

/// The `kernel_dim` eigenvalues of smallest modulus are the kernel; all others
/// are the non-zero spectrum.
fn classify(eigs: &[Complex<f64>], kernel_dim: usize, tol_rank: f64, tol_imag: f64) -> Classified {
    let mut by_mod: Vec<&Complex<f64>> = eigs.iter().collect();
    by_mod.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    let nonzero = &by_mod[kernel_dim.min(by_mod.len())..];
    let imag_axis_gap = nonzero
        .iter()
        .map(|z| z.re.abs())
        .fold(f64::INFINITY, f64::min);
    let min_re = nonzero.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    Classified {
        imag_axis_gap,
        gamma_gap: (min_re > 0.0 && min_re.is_finite()).then_some(min_re),
        unstable_count: eigs.iter().filter(|z| z.re < -tol_imag).count(),
        h3: !eigs
            .iter()
            .any(|z| z.re.abs() <= tol_imag && z.norm() >= tol_rank),
    }
}

fn sort_by_real(eigs: &mut [Complex<f64>]) {
    eigs.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

/// Dense report of an arbitrary square matrix. `kernel_vector` (if known)
/// feeds the kernel residual.
pub fn spectrum_of_matrix(
    l: &DMatrix<f64>,
    kernel_vector: Option<&DVector<f64>>,
    opts: &SpectrumOptions,
) -> SpectrumReport {
    let sv = l.singular_values();
    let sigma_max = sv.iter().cloned().fold(0.0, f64::max);
    let tol_rank = opts.tol_rank_rel * sigma_max;
    let kernel_dim = sv.iter().filter(|&&s| s <= tol_rank).count();
    let h2_angle = if kernel_dim == 0 {
        f64::NAN
    } else {
        let (right, left) = kernel_bases(l, opts.tol_rank_rel);
        kernel_range_angle(&right, &left)
    };
    let all: Vec<Complex<f64>> = l.complex_eigenvalues().iter().cloned().collect();
    let cls = classify(&all, kernel_dim, tol_rank, opts.tol_imag);
    let mut eigenvalues = all;
    eigenvalues.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    eigenvalues.truncate(opts.n_eigs.max(1));
    sort_by_real(&mut eigenvalues);
    let kernel_residual = kernel_vector.map(|k| (l * k).norm()).unwrap_or(f64::NAN);
    SpectrumReport {
        eigenvalues,
        kernel_dim,
        h2_angle,
        imag_axis_gap: cls.imag_axis_gap,
        gamma_gap: cls.gamma_gap,
        unstable_count: cls.unstable_count,
        kernel_residual,
        sigma_max,
        tol_rank,
        tol_rank_rel: opts.tol_rank_rel,
        tol_imag: opts.tol_imag,
        method: SpectrumMethod::Dense,
        dim: l.nrows(),
        xi: None,
        grid: None,
        verdicts: Verdicts {
            h1: kernel_dim >= 1,
            h2: h2_angle > H2_TOL,
            h3: cls.h3,
            stable: cls.unstable_count == 0,
        },
    }
}

/// Largest singular value of `M⁻¹K` by power iteration on `LᵀL`.
fn sigma_max_pencil(pen: &CoupledPencil<'_>) -> Result<f64, SpectralError> {
    let m = pen.factor(1.0, 0.0)?;
    let n = pen.dim();
    let mut x = DVector::from_fn(n, |i, _| 1.0 + (0.37 * i as f64).sin());
    x /= x.norm();
    let mut est = 0.0;
    for _ in 0..200 {
        let y = m.solve(&pen.apply_k(&x));
        let z = pen.apply_k_t(&m.solve_transpose(&y));
        let nz = z.norm();
        if nz == 0.0 {
            return Ok(0.0);
        }
        let next = nz.sqrt();
        x = z / nz;
        if (next - est).abs() <= 1e-6 * next {
            return Ok(next);
        }
        est = next;
    }
    Ok(est)
}

fn spectrum_arnoldi(
    pen: &CoupledPencil<'_>,
    opts: &SpectrumOptions,
) -> Result<SpectrumReport, SpectralError> {
    let sigma_max = sigma_max_pencil(pen)?;
    let tol_rank = opts.tol_rank_rel * sigma_max;
    let res = shift_invert_arnoldi(
        pen,
        &ArnoldiOptions {
            n_eigs: opts.n_eigs,
            shift: opts.shift,
            ..ArnoldiOptions::default()
        },
    )?;
    // Eigenvalues below the rank threshold span the numerical kernel; for the
    // real kernel vectors the imaginary parts vanish.
    let kernel_idx: Vec<usize> = (0..res.eigenvalues.len())
        .filter(|&i| res.eigenvalues[i].norm() <= tol_rank)
        .collect();
    let kernel_dim = kernel_idx.len();
    let h2_angle = if kernel_dim == 0 {
        f64::NAN
    } else {
        let n = pen.dim();
        let mut right = DMatrix::zeros(n, kernel_dim);
        for (c, &i) in kernel_idx.iter().enumerate() {
            let v = &res.vectors[i];
            // Rotate the phase so the vector is real.
            let k = v.icamax();
            let phase = v[k] / Complex::new(v[k].norm(), 0.0);
            right.set_column(c, &v.map(|z| (z / phase).re));
        }
        let left = left_kernel(pen, kernel_dim, opts.shift)?;
        kernel_range_angle(&right, &left)
    };
    let cls = classify(&res.eigenvalues, kernel_dim, tol_rank, opts.tol_imag);
    let mut eigenvalues = res.eigenvalues;
    sort_by_real(&mut eigenvalues);
    let m = pen.factor(1.0, 0.0)?;
    let kernel_residual = m.solve(&pen.apply_k(&pen.kernel_vector())).norm();
    Ok(SpectrumReport {
        eigenvalues,
        kernel_dim,
        h2_angle,
        imag_axis_gap: cls.imag_axis_gap,
        gamma_gap: cls.gamma_gap,
        unstable_count: cls.unstable_count,
        kernel_residual,
        sigma_max,
        tol_rank,
        tol_rank_rel: opts.tol_rank_rel,
        tol_imag: opts.tol_imag,
        method: SpectrumMethod::Arnoldi,
        dim: pen.dim(),
        xi: None,
        grid: None,
        verdicts: Verdicts {
            h1: kernel_dim >= 1,
            h2: h2_angle > H2_TOL,
            h3: cls.h3,
            stable: cls.unstable_count == 0,
        },
    })
}

/// Spectrum report of an assembled `L`.
///
/// On the iterative path only the `n_eigs` eigenvalues closest to the shift
/// are resolved, so gap and stability verdicts refer to that part of the
/// spectrum.
pub fn spectrum(
    l: &LOperator<'_>,
    opts: &SpectrumOptions,
) -> Result<SpectrumReport, SpectralError> {
    match l {
        LOperator::Dense { matrix, .. } => {
            Ok(spectrum_of_matrix(matrix, Some(&l.kernel_vector()), opts))
        }
        LOperator::Pencil(pen) => spectrum_arnoldi(pen, opts),
    }
}

/// Assembles `L` for `sys` and labels the report with sign and grid.
pub fn system_spectrum(
    sys: &PendulumSystem,
    opts: &SpectrumOptions,
) -> Result<SpectrumReport, SpectralError> {
    let l = assemble_l(sys)?;
    let mut rep = spectrum(&l, opts)?;
    let cav = sys.params.cavity();
    rep.xi = Some(sys.xi() as i32);
    rep.grid = Some(format!("{}x{}", cav.nx, cav.ny));
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{derive_params, CavityGeometry, EquilibriumSign, RawParams};

    #[test]
    fn diagonal_matrix_report() {
        let l = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0, 2.0]));
        let rep = spectrum_of_matrix(&l, None, &SpectrumOptions::default());
        assert_eq!(rep.kernel_dim, 1);
        assert_eq!(rep.gamma_gap, Some(1.0));
        assert_eq!(rep.unstable_count, 0);
        assert!(rep.verdicts.h1 && rep.verdicts.h2 && rep.verdicts.h3);
        assert!((rep.h2_angle - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn imaginary_pair_fails_h3() {
        let l = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0]);
        let rep = spectrum_of_matrix(&l, None, &SpectrumOptions::default());
        assert!(!rep.verdicts.h3);
        assert_eq!(rep.gamma_gap, None);
    }

    #[test]
    fn arnoldi_and_dense_reports_agree() {
        let p = derive_params(&RawParams::default(), &CavityGeometry::unit_square(12)).unwrap();
        for sign in [EquilibriumSign::Lower, EquilibriumSign::Upper] {
            let sys = PendulumSystem::new(p, sign).unwrap();
            let opts = SpectrumOptions {
                n_eigs: 10,
                ..SpectrumOptions::default()
            };
            let dense = system_spectrum(&sys, &opts).unwrap();
            let pen = CoupledPencil::new(&sys);
            let it = spectrum_arnoldi(&pen, &opts).unwrap();
            assert_eq!(dense.kernel_dim, it.kernel_dim);
            assert_eq!(dense.unstable_count, it.unstable_count);
            assert!((dense.sigma_max - it.sigma_max).abs() < 1e-3 * dense.sigma_max);
            assert!(
                (dense.h2_angle - it.h2_angle).abs() < 1e-6,
                "{} vs {}",
                dense.h2_angle,
                it.h2_angle
            );
            match (dense.gamma_gap, it.gamma_gap) {
                (Some(a), Some(b)) => assert!((a - b).abs() < 1e-8 * a.max(1.0)),
                (None, None) => {}
                other => panic!("gap mismatch {other:?}"),
            }
        }
    }
}
