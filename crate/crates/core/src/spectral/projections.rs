//! Oblique projections onto the kernel of `L` along its range.

use nalgebra::{DMatrix, DVector};

use super::report::H2_TOL;
use crate::error::SpectralError;

/// `Q = R (Lᵀ R)⁻¹ Lᵀ` from right (`R`) and left (`L`) kernel bases; `P = I − Q`.
#[derive(Debug, Clone)]
pub struct SpectralProjections {
    right: DMatrix<f64>,
    /// `(Lᵀ R)⁻¹ Lᵀ`
    left_scaled: DMatrix<f64>,
    pub h2_angle: f64,
}

impl SpectralProjections {
    pub fn rank(&self) -> usize {
        self.right.ncols()
    }

    pub fn dim(&self) -> usize {
        self.right.nrows()
    }

    pub fn apply_q(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.right * (&self.left_scaled * x)
    }

    pub fn apply_p(&self, x: &DVector<f64>) -> DVector<f64> {
        x - self.apply_q(x)
    }

    pub fn q(&self) -> DMatrix<f64> {
        &self.right * &self.left_scaled
    }

    pub fn p(&self) -> DMatrix<f64> {
        DMatrix::identity(self.dim(), self.dim()) - self.q()
    }
}

fn orthonormal(b: &DMatrix<f64>) -> DMatrix<f64> {
    b.clone().qr().q()
}

/// Smallest principal angle between `span(right)` and the range, whose
/// orthogonal complement is `span(left)`.
pub(crate) fn kernel_range_angle(right: &DMatrix<f64>, left: &DMatrix<f64>) -> f64 {
    let r = orthonormal(right);
    let l = orthonormal(left);
    let s = (l.transpose() * r).singular_values();
    let smin = s.iter().cloned().fold(f64::INFINITY, f64::min);
    smin.clamp(0.0, 1.0).asin()
}

pub fn projections_from_bases(
    right: DMatrix<f64>,
    left: DMatrix<f64>,
) -> Result<SpectralProjections, SpectralError> {
    if right.ncols() == 0 {
        return Err(SpectralError::TrivialKernel);
    }
    let angle = kernel_range_angle(&right, &left);
    if !(angle > H2_TOL) {
        return Err(SpectralError::KernelRangeIntersect { angle });
    }
    let coupling = left.transpose() * &right;
    let inv = coupling
        .try_inverse()
        .ok_or(SpectralError::KernelRangeIntersect { angle })?;
    Ok(SpectralProjections {
        left_scaled: inv * left.transpose(),
        right,
        h2_angle: angle,
    })
}

/// Kernel projections of a dense matrix. The kernel dimension is the number
/// of singular values below `1e-8 σ_max`; the operation refuses when kernel
/// and range intersect.
pub fn projections(l: &DMatrix<f64>) -> Result<SpectralProjections, SpectralError> {
    let (right, left) = kernel_bases(l, 1e-8);
    projections_from_bases(right, left)
}

/// Right and left null-space bases from the SVD.
pub(crate) fn kernel_bases(l: &DMatrix<f64>, rel_tol: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = l.nrows();
    let svd = l.clone().svd(true, true);
    let s = &svd.singular_values;
    let smax = s.iter().cloned().fold(0.0, f64::max);
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let idx: Vec<usize> = (0..s.len())
        .filter(|&i| s[i] <= rel_tol * smax || smax == 0.0)
        .collect();
    let mut right = DMatrix::zeros(n, idx.len());
    let mut left = DMatrix::zeros(n, idx.len());
    for (c, &i) in idx.iter().enumerate() {
        right.set_column(c, &vt.row(i).transpose());
        left.set_column(c, &u.column(i));
    }
    (right, left)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_example() {
        let l = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0, 2.0]));
        let pr = projections(&l).unwrap();
        let q = pr.q();
        let expect = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0, 0.0]));
        assert!((q - expect).amax() < 1e-12);
    }

    #[test]
    fn oblique_example() {
        let l = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 1.0]);
        let pr = projections(&l).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, 0.0, 0.0]);
        assert!((pr.q() - &expect).amax() < 1e-12);
        let q = pr.q();
        let p = pr.p();
        assert!((&q * &q - &q).amax() < 1e-12);
        assert!((&p * &p - &p).amax() < 1e-12);
        assert!((&q * &p).amax() < 1e-12);
        assert!((&l * &q).amax() < 1e-12 && (&q * &l).amax() < 1e-12);
    }

    #[test]
    fn jordan_block_is_refused() {
        let l = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(
            projections(&l),
            Err(SpectralError::KernelRangeIntersect { .. })
        ));
    }

    #[test]
    fn invertible_matrix_has_trivial_kernel() {
        let l = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]));
        assert!(matches!(projections(&l), Err(SpectralError::TrivialKernel)));
    }
}
