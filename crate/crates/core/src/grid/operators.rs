//! Divergence, gradient, viscous Laplacian, Leray projection and the
//! quadrature functionals on the staggered grid.

use std::sync::OnceLock;

use nalgebra::DVector;
use nalgebra_sparse::CsrMatrix;

use super::StaggeredGrid;
use crate::error::GridError;
use crate::linalg::{csr_from_triplets, spmv, spmv_t, weighted_gram, SpdFactor};
use crate::model::{CavityGeometry, PhysicalParams};

/// Relative divergence tolerance accepted after a projection.
const PROJECTION_TOL: f64 = 1e-10;

/// Assembled grid operators. Immutable after construction; the Poincaré
/// constant is computed lazily once and cached.
pub struct DiscreteOperators {
    pub grid: StaggeredGrid,
    /// Cell divergence of face fields.
    pub div: CsrMatrix<f64>,
    /// Face gradient of cell fields; zero rows on wall faces.
    pub grad: CsrMatrix<f64>,
    /// Edge differences of face fields (no-slip ghosts folded in).
    pub edge_grad: CsrMatrix<f64>,
    pub edge_weights: DVector<f64>,
    /// Viscous Laplacian `−W⁻¹ Dᵀ Ŵ D`, zero rows on wall faces.
    pub lap: CsrMatrix<f64>,
    /// Curl of interior-node stream functions.
    pub curl: CsrMatrix<f64>,
    rigid: DVector<f64>,
    poisson: SpdFactor,
    neumann: CsrMatrix<f64>,
    poincare: OnceLock<f64>,
}

impl DiscreteOperators {
    pub fn new(cavity: &CavityGeometry) -> Result<Self, GridError> {
        let grid = StaggeredGrid::new(cavity);
        let div = build_div(&grid);
        let grad = build_grad(&grid);
        let (edge_grad, edge_weights) = build_edge_grad(&grid);
        let lap = build_lap(&grid, &edge_grad, &edge_weights);
        let curl = build_curl(&grid);
        let neumann = &div * &grad;
        let poisson = SpdFactor::new(&pinned_negated(&neumann))?;
        let rigid = grid.rigid_field();
        Ok(Self {
            grid,
            div,
            grad,
            edge_grad,
            edge_weights,
            lap,
            curl,
            rigid,
            poisson,
            neumann,
            poincare: OnceLock::new(),
        })
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.grid.weights
    }

    /// Discrete Neumann Laplacian on pressure cells (`div ∘ grad`).
    pub fn neumann_laplacian(&self) -> &CsrMatrix<f64> {
        &self.neumann
    }

    pub fn rigid_field(&self) -> &DVector<f64> {
        &self.rigid
    }

    pub fn divergence(&self, v: &DVector<f64>) -> DVector<f64> {
        spmv(&self.div, v)
    }

    pub fn gradient(&self, q: &DVector<f64>) -> DVector<f64> {
        spmv(&self.grad, q)
    }

    pub fn laplacian(&self, v: &DVector<f64>) -> DVector<f64> {
        spmv(&self.lap, v)
    }

    pub fn inner(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        a.iter()
            .zip(b.iter())
            .zip(self.grid.weights.iter())
            .map(|((x, y), w)| x * y * w)
            .sum()
    }

    pub fn norm_sq(&self, v: &DVector<f64>) -> f64 {
        self.inner(v, v)
    }

    /// Solves `div grad q = div v` and returns `(v − grad q, q)` with `q`
    /// normalized to zero mean. Wall components of `v` are zeroed first.
    pub fn project_with_pressure(
        &self,
        v: &DVector<f64>,
    ) -> Result<(DVector<f64>, DVector<f64>), GridError> {
        let mut w = v.clone();
        self.grid.mask_boundary(&mut w);
        let rhs = self.divergence(&w);
        let mut b = -&rhs;
        b[0] = 0.0;
        let mut q = self.poisson.solve(&b);
        let mean = q.mean();
        q.add_scalar_mut(-mean);
        let full_res = (spmv(&self.neumann, &q) - &rhs).amax();
        w -= self.gradient(&q);
        let scale = v.amax().max(f64::MIN_POSITIVE) / self.grid.hx.min(self.grid.hy);
        let div_after = self.divergence(&w).amax();
        if !(div_after <= PROJECTION_TOL * scale) {
            return Err(GridError::PoissonFailed {
                residuals: vec![full_res / scale, div_after / scale],
            });
        }
        Ok((w, q))
    }

    /// Discrete Leray projection.
    pub fn project(&self, v: &DVector<f64>) -> Result<DVector<f64>, GridError> {
        self.project_with_pressure(v).map(|(w, _)| w)
    }

    /// `∫ (e3 × x) · v`.
    pub fn quad_cross_moment(&self, v: &DVector<f64>) -> f64 {
        self.inner(&self.rigid, v)
    }

    /// Coupling scalar `a = −(ρ/C) ∫ (e3 × x) · v`.
    pub fn compute_a(&self, v: &DVector<f64>, params: &PhysicalParams) -> f64 {
        -(params.rho() / params.c_total()) * self.quad_cross_moment(v)
    }

    /// `‖∇v‖²` with no-slip ghost values.
    pub fn grad_norm_sq(&self, v: &DVector<f64>) -> f64 {
        let dv = spmv(&self.edge_grad, v);
        dv.iter()
            .zip(self.edge_weights.iter())
            .map(|(d, w)| d * d * w)
            .sum()
    }

    /// `e3 × v = (−v2, v1)` interpolated to faces with 4-point averages.
    /// The averaging pairs are symmetric, so `⟨e3 × v, v⟩_W = 0` exactly.
    pub fn coriolis(&self, v: &DVector<f64>) -> DVector<f64> {
        let g = &self.grid;
        let (nx, ny) = (g.nx, g.ny);
        let mut out = DVector::zeros(g.n_faces());
        for j in 0..ny {
            for i in 1..nx {
                let avg = 0.25
                    * (v[g.v(i - 1, j)] + v[g.v(i, j)] + v[g.v(i - 1, j + 1)] + v[g.v(i, j + 1)]);
                out[g.u(i, j)] = -avg;
            }
        }
        for j in 1..ny {
            for i in 0..nx {
                let avg = 0.25
                    * (v[g.u(i, j - 1)] + v[g.u(i + 1, j - 1)] + v[g.u(i, j)] + v[g.u(i + 1, j)]);
                out[g.v(i, j)] = avg;
            }
        }
        out
    }

    /// `(v·∇)v` in divergence form `∇·(v ⊗ v)` with centered fluxes.
    pub fn advection(&self, v: &DVector<f64>) -> DVector<f64> {
        let g = &self.grid;
        let (nx, ny, hx, hy) = (g.nx, g.ny, g.hx, g.hy);
        // Corner-node flux ū^y v̄^x; vanishes on walls where either factor is a wall normal.
        let node_flux = |i: usize, j: usize| -> f64 {
            if i == 0 || i == nx || j == 0 || j == ny {
                return 0.0;
            }
            let ub = 0.5 * (v[g.u(i, j - 1)] + v[g.u(i, j)]);
            let vb = 0.5 * (v[g.v(i - 1, j)] + v[g.v(i, j)]);
            ub * vb
        };
        let mut out = DVector::zeros(g.n_faces());
        for j in 0..ny {
            for i in 1..nx {
                let ue = 0.5 * (v[g.u(i, j)] + v[g.u(i + 1, j)]);
                let uw = 0.5 * (v[g.u(i - 1, j)] + v[g.u(i, j)]);
                let ax = (ue * ue - uw * uw) / hx;
                let ay = (node_flux(i, j + 1) - node_flux(i, j)) / hy;
                out[g.u(i, j)] = ax + ay;
            }
        }
        for j in 1..ny {
            for i in 0..nx {
                let vn = 0.5 * (v[g.v(i, j)] + v[g.v(i, j + 1)]);
                let vs = 0.5 * (v[g.v(i, j - 1)] + v[g.v(i, j)]);
                let ay = (vn * vn - vs * vs) / hy;
                let ax = (node_flux(i + 1, j) - node_flux(i, j)) / hx;
                out[g.v(i, j)] = ax + ay;
            }
        }
        out
    }

    /// Smallest constant in `‖∇v‖² ≥ c_P ‖v‖²_W` over no-slip fields,
    /// estimated once by inverse iteration and cached.
    pub fn poincare_constant(&self) -> f64 {
        *self.poincare.get_or_init(|| self.estimate_poincare())
    }

    fn estimate_poincare(&self) -> f64 {
        let g = &self.grid;
        let interior: Vec<usize> = (0..g.n_faces()).filter(|&k| !g.boundary[k]).collect();
        let mut pos = vec![usize::MAX; g.n_faces()];
        for (r, &k) in interior.iter().enumerate() {
            pos[k] = r;
        }
        let trip: Vec<_> = self
            .edge_grad
            .triplet_iter()
            .filter(|(_, c, _)| pos[*c] != usize::MAX)
            .map(|(r, c, v)| (r, pos[c], *v))
            .collect();
        let d = csr_from_triplets(self.edge_grad.nrows(), interior.len(), &trip);
        let k = weighted_gram(&d, &self.edge_weights);
        let fac = match SpdFactor::new(&k) {
            Ok(f) => f,
            Err(_) => return 0.0,
        };
        let w = DVector::from_iterator(interior.len(), interior.iter().map(|&f| g.weights[f]));
        let mut x = DVector::from_fn(interior.len(), |i, _| 1.0 + 0.1 * ((i * 7919) % 13) as f64);
        let mut lambda = 0.0;
        for _ in 0..500 {
            let y = fac.solve(&x.component_mul(&w));
            let nrm = y.component_mul(&w).dot(&y).sqrt();
            x = y / nrm;
            let kx = spmv(&k, &x);
            let new = x.dot(&kx) / x.component_mul(&w).dot(&x);
            if (new - lambda).abs() <= 1e-13 * new {
                lambda = new;
                break;
            }
            lambda = new;
        }
        lambda
    }

    /// `Dᵀ Ŵ D v`, the weak form of `−Δ`.
    pub fn stiffness_apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let dv = spmv(&self.edge_grad, v).component_mul(&self.edge_weights);
        spmv_t(&self.edge_grad, &dv)
    }
}

fn build_div(g: &StaggeredGrid) -> CsrMatrix<f64> {
    let mut t = Vec::with_capacity(4 * g.n_cells());
    for j in 0..g.ny {
        for i in 0..g.nx {
            let c = g.cell(i, j);
            t.push((c, g.u(i + 1, j), 1.0 / g.hx));
            t.push((c, g.u(i, j), -1.0 / g.hx));
            t.push((c, g.v(i, j + 1), 1.0 / g.hy));
            t.push((c, g.v(i, j), -1.0 / g.hy));
        }
    }
    csr_from_triplets(g.n_cells(), g.n_faces(), &t)
}

fn build_grad(g: &StaggeredGrid) -> CsrMatrix<f64> {
    let mut t = Vec::with_capacity(2 * g.n_faces());
    for j in 0..g.ny {
        for i in 1..g.nx {
            let f = g.u(i, j);
            t.push((f, g.cell(i, j), 1.0 / g.hx));
            t.push((f, g.cell(i - 1, j), -1.0 / g.hx));
        }
    }
    for j in 1..g.ny {
        for i in 0..g.nx {
            let f = g.v(i, j);
            t.push((f, g.cell(i, j), 1.0 / g.hy));
            t.push((f, g.cell(i, j - 1), -1.0 / g.hy));
        }
    }
    csr_from_triplets(g.n_faces(), g.n_cells(), &t)
}

/// Edge differences of both velocity components, including the wall edges
/// where the no-slip ghost `u_ghost = −u` gives `2u/h` on a half-weight edge.
fn build_edge_grad(g: &StaggeredGrid) -> (CsrMatrix<f64>, DVector<f64>) {
    let (nx, ny, hx, hy) = (g.nx, g.ny, g.hx, g.hy);
    let area = hx * hy;
    let mut t = Vec::new();
    let mut w = Vec::new();
    let mut push_edge =
        |entries: &[(usize, f64)], weight: f64, t: &mut Vec<(usize, usize, f64)>| {
            let row = w.len();
            for &(c, v) in entries {
                t.push((row, c, v));
            }
            w.push(weight);
        };
    // u-component
    for j in 0..ny {
        for i in 0..nx {
            push_edge(
                &[(g.u(i + 1, j), 1.0 / hx), (g.u(i, j), -1.0 / hx)],
                area,
                &mut t,
            );
        }
    }
    for i in 1..nx {
        for j in 0..ny - 1 {
            push_edge(
                &[(g.u(i, j + 1), 1.0 / hy), (g.u(i, j), -1.0 / hy)],
                area,
                &mut t,
            );
        }
        push_edge(&[(g.u(i, 0), 2.0 / hy)], 0.5 * area, &mut t);
        push_edge(&[(g.u(i, ny - 1), -2.0 / hy)], 0.5 * area, &mut t);
    }
    // v-component
    for j in 0..ny {
        for i in 0..nx {
            push_edge(
                &[(g.v(i, j + 1), 1.0 / hy), (g.v(i, j), -1.0 / hy)],
                area,
                &mut t,
            );
        }
    }
    for j in 1..ny {
        for i in 0..nx - 1 {
            push_edge(
                &[(g.v(i + 1, j), 1.0 / hx), (g.v(i, j), -1.0 / hx)],
                area,
                &mut t,
            );
        }
        push_edge(&[(g.v(0, j), 2.0 / hx)], 0.5 * area, &mut t);
        push_edge(&[(g.v(nx - 1, j), -2.0 / hx)], 0.5 * area, &mut t);
    }
    let n_edges = w.len();
    (
        csr_from_triplets(n_edges, g.n_faces(), &t),
        DVector::from_vec(w),
    )
}

fn build_lap(g: &StaggeredGrid, d: &CsrMatrix<f64>, ew: &DVector<f64>) -> CsrMatrix<f64> {
    let k = weighted_gram(d, ew);
    let trip: Vec<_> = k
        .triplet_iter()
        .filter(|(r, c, _)| !g.boundary[*r] && !g.boundary[*c])
        .map(|(r, c, v)| (r, c, -v / g.weights[r]))
        .collect();
    csr_from_triplets(g.n_faces(), g.n_faces(), &trip)
}

fn build_curl(g: &StaggeredGrid) -> CsrMatrix<f64> {
    let mut t = Vec::new();
    for j in 0..g.ny {
        for i in 1..g.nx {
            let f = g.u(i, j);
            if let Some(n) = g.node(i, j + 1) {
                t.push((f, n, 1.0 / g.hy));
            }
            if let Some(n) = g.node(i, j) {
                t.push((f, n, -1.0 / g.hy));
            }
        }
    }
    for j in 1..g.ny {
        for i in 0..g.nx {
            let f = g.v(i, j);
            if let Some(n) = g.node(i + 1, j) {
                t.push((f, n, -1.0 / g.hx));
            }
            if let Some(n) = g.node(i, j) {
                t.push((f, n, 1.0 / g.hx));
            }
        }
    }
    csr_from_triplets(g.n_faces(), g.n_nodes(), &t)
}

/// `−(div grad)` with the first cell pinned (identity row and column).
fn pinned_negated(neumann: &CsrMatrix<f64>) -> CsrMatrix<f64> {
    let mut trip: Vec<_> = neumann
        .triplet_iter()
        .filter(|(r, c, _)| *r != 0 && *c != 0)
        .map(|(r, c, v)| (r, c, -*v))
        .collect();
    trip.push((0, 0, 1.0));
    csr_from_triplets(neumann.nrows(), neumann.ncols(), &trip)
}
