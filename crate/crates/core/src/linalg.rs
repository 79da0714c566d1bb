//! Small sparse/dense linear-algebra helpers shared by the grid, the stepper
//! and the eigen-solvers.

use nalgebra::{Complex, DMatrix, DVector};
use nalgebra_sparse::{factorization::CscCholesky, CooMatrix, CscMatrix, CsrMatrix};

use crate::error::LinalgError;

/// Assembles a CSR matrix from (row, col, value) triplets; duplicates are summed.
pub fn csr_from_triplets(
    nrows: usize,
    ncols: usize,
    triplets: &[(usize, usize, f64)],
) -> CsrMatrix<f64> {
    let mut coo = CooMatrix::new(nrows, ncols);
    for &(r, c, v) in triplets {
        coo.push(r, c, v);
    }
    CsrMatrix::from(&coo)
}

/// `y = A x` with a fixed, row-sequential summation order.
pub fn spmv(a: &CsrMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    debug_assert_eq!(a.ncols(), x.len());
    let mut y = DVector::zeros(a.nrows());
    let (offsets, cols, vals) = (a.row_offsets(), a.col_indices(), a.values());
    for r in 0..a.nrows() {
        let mut s = 0.0;
        for k in offsets[r]..offsets[r + 1] {
            s += vals[k] * x[cols[k]];
        }
        y[r] = s;
    }
    y
}

/// `y = Aᵀ x`.
pub fn spmv_t(a: &CsrMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    debug_assert_eq!(a.nrows(), x.len());
    let mut y = DVector::zeros(a.ncols());
    let (offsets, cols, vals) = (a.row_offsets(), a.col_indices(), a.values());
    for r in 0..a.nrows() {
        let xr = x[r];
        if xr == 0.0 {
            continue;
        }
        for k in offsets[r]..offsets[r + 1] {
            y[cols[k]] += vals[k] * xr;
        }
    }
    y
}

/// Row-scales a CSR matrix in place: `A ← diag(d) A`.
pub fn scale_rows(a: &mut CsrMatrix<f64>, d: &DVector<f64>) {
    let offsets = a.row_offsets().to_vec();
    let vals = a.values_mut();
    for r in 0..offsets.len() - 1 {
        for v in &mut vals[offsets[r]..offsets[r + 1]] {
            *v *= d[r];
        }
    }
}

/// `Aᵀ diag(w) A` for sparse `A`.
pub fn weighted_gram(a: &CsrMatrix<f64>, w: &DVector<f64>) -> CsrMatrix<f64> {
    let mut wa = a.clone();
    scale_rows(&mut wa, w);
    let at = a.transpose();
    &at * &wa
}

/// `alpha A + beta B` for matrices with possibly different sparsity.
pub fn sp_add(alpha: f64, a: &CsrMatrix<f64>, beta: f64, b: &CsrMatrix<f64>) -> CsrMatrix<f64> {
    let mut trip = Vec::with_capacity(a.nnz() + b.nnz());
    for (r, c, v) in a.triplet_iter() {
        trip.push((r, c, alpha * v));
    }
    for (r, c, v) in b.triplet_iter() {
        trip.push((r, c, beta * v));
    }
    csr_from_triplets(a.nrows(), a.ncols(), &trip)
}

pub fn to_dense(a: &CsrMatrix<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.nrows(), a.ncols());
    for (r, c, v) in a.triplet_iter() {
        m[(r, c)] += v;
    }
    m
}

/// Sparse Cholesky factorization of a symmetric positive definite matrix.
pub struct SpdFactor {
    chol: CscCholesky<f64>,
    n: usize,
}

impl SpdFactor {
    pub fn new(a: &CsrMatrix<f64>) -> Result<Self, LinalgError> {
        let n = a.nrows();
        let csc = CscMatrix::from(a);
        let chol = CscCholesky::factor(&csc).map_err(|_| LinalgError::NotPositiveDefinite { n })?;
        Ok(Self { chol, n })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut buf = DMatrix::from_column_slice(self.n, 1, b.as_slice());
        self.chol.solve_mut(&mut buf);
        DVector::from_column_slice(buf.as_slice())
    }

    pub fn solve_many(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut buf = b.clone();
        self.chol.solve_mut(&mut buf);
        buf
    }
}

/// Factorization of the bordered system
///
/// ```text
/// [ A   U ] [x]   [f]
/// [ Vᵀ  D ] [y] = [g]
/// ```
///
/// with `A` sparse SPD and a thin dense border of width `k`. Solves use the
/// `k×k` Schur complement `D − Vᵀ A⁻¹ U`.
pub struct BorderedFactor {
    a: SpdFactor,
    u: DMatrix<f64>,
    v: DMatrix<f64>,
    ainv_u: DMatrix<f64>,
    ainv_v: DMatrix<f64>,
    schur: DMatrix<f64>,
    schur_inv: DMatrix<f64>,
    schur_t_inv: DMatrix<f64>,
}

impl BorderedFactor {
    pub fn new(
        a: &CsrMatrix<f64>,
        u: DMatrix<f64>,
        v: DMatrix<f64>,
        d: DMatrix<f64>,
    ) -> Result<Self, LinalgError> {
        let n = a.nrows();
        let k = d.nrows();
        if u.shape() != (n, k) || v.shape() != (n, k) || d.ncols() != k {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                got: u.nrows(),
            });
        }
        let fa = SpdFactor::new(a)?;
        let ainv_u = fa.solve_many(&u);
        let ainv_v = fa.solve_many(&v);
        let schur = &d - v.transpose() * &ainv_u;
        let schur_inv = schur.clone().try_inverse().ok_or(LinalgError::Singular {
            context: "bordered Schur",
        })?;
        let schur_t_inv = schur_inv.transpose();
        Ok(Self {
            a: fa,
            u,
            v,
            ainv_u,
            ainv_v,
            schur,
            schur_inv,
            schur_t_inv,
        })
    }

    pub fn dim(&self) -> usize {
        self.a.dim() + self.schur.nrows()
    }

    pub fn border_width(&self) -> usize {
        self.schur.nrows()
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.solve_impl(rhs, false)
    }

    /// Solves with the transposed block matrix.
    pub fn solve_transpose(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.solve_impl(rhs, true)
    }

    fn solve_impl(&self, rhs: &DVector<f64>, transpose: bool) -> DVector<f64> {
        let n = self.a.dim();
        let k = self.schur.nrows();
        let (right, ainv_left, sinv) = if transpose {
            (&self.u, &self.ainv_v, &self.schur_t_inv)
        } else {
            (&self.v, &self.ainv_u, &self.schur_inv)
        };
        let f = rhs.rows(0, n).into_owned();
        let g = rhs.rows(n, k).into_owned();
        let ainv_f = self.a.solve(&f);
        let y = sinv * (g - right.transpose() * &ainv_f);
        let x = ainv_f - ainv_left * &y;
        let mut out = DVector::zeros(n + k);
        out.rows_mut(0, n).copy_from(&x);
        out.rows_mut(n, k).copy_from(&y);
        out
    }
}

/// Eigen-decomposition of a small dense complex matrix through its complex
/// Schur form: returns eigenvalues and unit eigenvectors (columns).
pub fn eig_with_vectors(h: &DMatrix<Complex<f64>>) -> (Vec<Complex<f64>>, DMatrix<Complex<f64>>) {
    let n = h.nrows();
    let (q, t) = nalgebra::Schur::new(h.clone()).unpack();
    let mut vecs = DMatrix::<Complex<f64>>::zeros(n, n);
    let mut vals = Vec::with_capacity(n);
    let scale = t
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    for kk in 0..n {
        let lam = t[(kk, kk)];
        vals.push(lam);
        // Back substitution for (T − λ I) z = 0 with z_kk = 1.
        let mut z = DVector::<Complex<f64>>::zeros(n);
        z[kk] = Complex::new(1.0, 0.0);
        for i in (0..kk).rev() {
            let mut s = Complex::new(0.0, 0.0);
            for j in i + 1..=kk {
                s += t[(i, j)] * z[j];
            }
            let mut den = t[(i, i)] - lam;
            if den.norm() < 1e-14 * scale {
                den = Complex::new(1e-14 * scale, 0.0);
            }
            z[i] = -s / den;
        }
        let y = &q * z;
        let nrm = y.norm();
        vecs.set_column(kk, &(y / Complex::new(nrm, 0.0)));
    }
    (vals, vecs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> CsrMatrix<f64> {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        csr_from_triplets(n, n, &t)
    }

    #[test]
    fn spmv_matches_dense() {
        let a = laplacian_1d(7);
        let x = DVector::from_fn(7, |i, _| (i as f64).sin());
        let d = to_dense(&a);
        assert!((spmv(&a, &x) - &d * &x).norm() < 1e-14);
        assert!((spmv_t(&a, &x) - d.transpose() * &x).norm() < 1e-14);
    }

    #[test]
    fn bordered_solve_matches_dense() {
        let n = 12;
        let a = laplacian_1d(n);
        let u = DMatrix::from_fn(n, 3, |i, j| ((i * 3 + j) as f64 * 0.37).cos());
        let v = DMatrix::from_fn(n, 3, |i, j| ((i + 5 * j) as f64 * 0.11).sin());
        let d = DMatrix::from_row_slice(3, 3, &[4.0, 0.0, -1.0, 0.0, 1.0, 0.0, 0.5, 0.0, 2.0]);
        let f = BorderedFactor::new(&a, u.clone(), v.clone(), d.clone()).unwrap();
        let mut full = DMatrix::zeros(n + 3, n + 3);
        full.view_mut((0, 0), (n, n)).copy_from(&to_dense(&a));
        full.view_mut((0, n), (n, 3)).copy_from(&u);
        full.view_mut((n, 0), (3, n)).copy_from(&v.transpose());
        full.view_mut((n, n), (3, 3)).copy_from(&d);
        let rhs = DVector::from_fn(n + 3, |i, _| 1.0 + i as f64);
        let x = f.solve(&rhs);
        assert!((&full * &x - &rhs).norm() < 1e-10 * rhs.norm());
        let xt = f.solve_transpose(&rhs);
        assert!((full.transpose() * &xt - &rhs).norm() < 1e-10 * rhs.norm());
    }

    #[test]
    fn schur_eigenvectors_satisfy_definition() {
        let h = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, -4.0, -0.1, 0.3, 0.2, 0.0, 1.5]);
        let hc = h.map(|x| Complex::new(x, 0.0));
        let (vals, vecs) = eig_with_vectors(&hc);
        for (k, lam) in vals.iter().enumerate() {
            let v = vecs.column(k);
            let r = &hc * v - v * *lam;
            assert!(r.norm() < 1e-10, "residual {}", r.norm());
        }
    }
}
