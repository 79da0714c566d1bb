//! Shift-invert Arnoldi for the pencil `K x = λ M x`.
//!
//! The Krylov operator is `(K − σM)⁻¹ M` with eigenvalues `θ = 1/(λ − σ)`;
//! the largest `|θ|` correspond to the eigenvalues of `L` closest to `σ`.

use nalgebra::{Complex, DMatrix, DVector};

use crate::dynamics::CoupledPencil;
use crate::error::SpectralError;
use crate::linalg::eig_with_vectors;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArnoldiOptions {
    pub n_eigs: usize,
    pub shift: f64,
    /// Initial subspace size; defaults to `max(2k + 20, 40)`.
    pub krylov_dim: Option<usize>,
    /// Relative Ritz-residual tolerance on `θ`.
    pub tol: f64,
    /// Subspace enlargements (×1.5 each) before giving up.
    pub max_attempts: usize,
}

impl Default for ArnoldiOptions {
    fn default() -> Self {
        Self {
            n_eigs: 40,
            shift: -0.05,
            krylov_dim: None,
            tol: 1e-10,
            max_attempts: 4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ArnoldiResult {
    /// Eigenvalues of `L`, ordered by distance to the shift.
    pub eigenvalues: Vec<Complex<f64>>,
    /// Unit right eigenvectors.
    pub vectors: Vec<DVector<Complex<f64>>>,
    /// Ritz residual estimates relative to `|θ|`.
    pub residuals: Vec<f64>,
    pub krylov_dim: usize,
}

struct RitzPairs {
    theta: Vec<Complex<f64>>,
    vectors: Vec<DVector<Complex<f64>>>,
    residuals: Vec<f64>,
}

fn start_vector(n: usize) -> DVector<f64> {
    let v = DVector::from_fn(n, |i, _| {
        1.0 + 0.5 * (0.731 * i as f64).sin() + 0.25 * (0.117 * i as f64).cos()
    });
    let nrm = v.norm();
    v / nrm
}

/// Plain Arnoldi with full (twice-iterated) Gram–Schmidt on a real operator.
fn arnoldi(apply: &dyn Fn(&DVector<f64>) -> DVector<f64>, n: usize, m: usize) -> RitzPairs {
    let m = m.min(n);
    let mut basis: Vec<DVector<f64>> = vec![start_vector(n)];
    let mut h = DMatrix::<f64>::zeros(m + 1, m);
    let mut size = m;
    let mut beta_last = 0.0;
    for j in 0..m {
        let mut w = apply(&basis[j]);
        let w_norm0 = w.norm();
        for _ in 0..2 {
            for (i, b) in basis.iter().enumerate() {
                let c = b.dot(&w);
                h[(i, j)] += c;
                w.axpy(-c, b, 1.0);
            }
        }
        let beta = w.norm();
        h[(j + 1, j)] = beta;
        if beta <= 1e-13 * w_norm0.max(f64::MIN_POSITIVE) {
            size = j + 1;
            beta_last = 0.0;
            break;
        }
        beta_last = beta;
        if j + 1 < m {
            basis.push(w / beta);
        }
    }
    let hm = h.view((0, 0), (size, size)).map(|x| Complex::new(x, 0.0));
    let (vals, vecs) = eig_with_vectors(&hm);
    let mut out = RitzPairs {
        theta: Vec::with_capacity(size),
        vectors: Vec::with_capacity(size),
        residuals: Vec::with_capacity(size),
    };
    for (k, theta) in vals.into_iter().enumerate() {
        let y = vecs.column(k);
        let res = beta_last * y[size - 1].norm() / theta.norm().max(f64::MIN_POSITIVE);
        let mut x = DVector::<Complex<f64>>::zeros(n);
        for (j, b) in basis.iter().take(size).enumerate() {
            let yj = y[j];
            for i in 0..n {
                x[i] += yj * b[i];
            }
        }
        let nrm = x.norm();
        out.theta.push(theta);
        out.vectors.push(x / Complex::new(nrm, 0.0));
        out.residuals.push(res);
    }
    out
}

/// Computes the `n_eigs` eigenvalues of `L = M⁻¹K` closest to the shift.
pub fn shift_invert_arnoldi(
    pen: &CoupledPencil<'_>,
    opts: &ArnoldiOptions,
) -> Result<ArnoldiResult, SpectralError> {
    let n = pen.dim();
    let k = opts.n_eigs.min(n);
    let sigma = opts.shift;
    let fac = pen.factor(-sigma, 1.0)?;
    let apply = |x: &DVector<f64>| fac.solve(&pen.apply_m(x));
    let mut m = opts.krylov_dim.unwrap_or((2 * k + 20).max(40)).min(n);
    let mut converged = 0;
    for _ in 0..=opts.max_attempts {
        let ritz = arnoldi(&apply, n, m);
        let mut order: Vec<usize> = (0..ritz.theta.len()).collect();
        order.sort_by(|&a, &b| ritz.theta[b].norm().total_cmp(&ritz.theta[a].norm()));
        let take: Vec<usize> = order.into_iter().take(k).collect();
        converged = take
            .iter()
            .filter(|&&i| ritz.residuals[i] <= opts.tol)
            .count();
        if converged == k || m == n {
            let mut res = ArnoldiResult {
                eigenvalues: Vec::with_capacity(k),
                vectors: Vec::with_capacity(k),
                residuals: Vec::with_capacity(k),
                krylov_dim: m,
            };
            for i in take {
                res.eigenvalues
                    .push(Complex::new(sigma, 0.0) + Complex::new(1.0, 0.0) / ritz.theta[i]);
                res.vectors.push(ritz.vectors[i].clone());
                res.residuals.push(ritz.residuals[i]);
            }
            if converged == k {
                return Ok(res);
            }
            break;
        }
        m = ((m as f64 * 1.5) as usize).min(n);
    }
    Err(SpectralError::NoConvergence {
        converged,
        wanted: k,
        krylov_dim: m,
    })
}

/// Left null space of `L` by inverse subspace iteration with the transposed
/// pencil: `(K − σM)ᵀ z' = M z`, `l = M z`.
pub(crate) fn left_kernel(
    pen: &CoupledPencil<'_>,
    dim: usize,
    shift: f64,
) -> Result<DMatrix<f64>, SpectralError> {
    let n = pen.dim();
    let fac = pen.factor(-shift, 1.0)?;
    let mut z = DMatrix::from_fn(n, dim, |i, j| {
        1.0 + 0.3 * ((i * (j + 3)) as f64 * 0.37).sin()
    });
    for _ in 0..60 {
        let mut next = DMatrix::zeros(n, dim);
        for j in 0..dim {
            let rhs = pen.apply_m(&z.column(j).into_owned());
            next.set_column(j, &fac.solve_transpose(&rhs));
        }
        z = next.qr().q();
    }
    let mut l = DMatrix::zeros(n, dim);
    for j in 0..dim {
        l.set_column(j, &pen.apply_m(&z.column(j).into_owned()));
    }
    Ok(l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::PendulumSystem;
    use crate::model::{derive_params, CavityGeometry, EquilibriumSign, RawParams};
    use crate::spectral::assemble::dense_l;

    #[test]
    fn arnoldi_matches_dense_eigenvalues() {
        let p = derive_params(&RawParams::default(), &CavityGeometry::unit_square(10)).unwrap();
        let sys = PendulumSystem::new(p, EquilibriumSign::Lower).unwrap();
        let pen = CoupledPencil::new(&sys);
        let dense = dense_l(&pen).unwrap().complex_eigenvalues();
        let res = shift_invert_arnoldi(
            &pen,
            &ArnoldiOptions {
                n_eigs: 8,
                ..ArnoldiOptions::default()
            },
        )
        .unwrap();
        for lam in &res.eigenvalues {
            let best = dense
                .iter()
                .map(|d| (d - lam).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(best < 1e-8 * lam.norm().max(1.0), "{lam} off by {best}");
        }
        // Ritz vectors satisfy K x = λ M x.
        for (lam, x) in res.eigenvalues.iter().zip(&res.vectors) {
            let re = x.map(|z| z.re);
            let im = x.map(|z| z.im);
            let kr = pen.apply_k(&re);
            let ki = pen.apply_k(&im);
            let mr = pen.apply_m(&re);
            let mi = pen.apply_m(&im);
            let rr = &kr - (&mr * lam.re - &mi * lam.im);
            let ri = &ki - (&mr * lam.im + &mi * lam.re);
            let scale = kr.norm() + ki.norm() + lam.norm().max(1.0) * (mr.norm() + mi.norm());
            assert!(
                (rr.norm() + ri.norm()) < 1e-7 * scale.max(1e-300),
                "{lam}: {} / {scale}",
                rr.norm() + ri.norm()
            );
        }
    }
}
