//! Staggered (MAC) discretization of the rectangular cavity.
//!
//! Layout:
//! - u-faces `(i, j)`, `i ∈ 0..=nx`, `j ∈ 0..ny`, at `(x0 + i hx, y0 + (j+½) hy)`,
//!   flat index `j (nx+1) + i`;
//! - v-faces `(i, j)`, `i ∈ 0..nx`, `j ∈ 0..=ny`, at `(x0 + (i+½) hx, y0 + j hy)`,
//!   flat index `nu + j nx + i`;
//! - pressure cells `(i, j)` at cell centers, flat index `j nx + i`;
//! - stream-function nodes: interior grid vertices `(i, j)`, `i ∈ 1..nx`,
//!   `j ∈ 1..ny`, flat index `(j-1)(nx-1) + (i-1)`.
//!
//! Coordinates are body-frame and measured from the suspension point, so
//! `x0 = cx − half_width`, `y0 = cy − half_height`.

mod operators;
mod reduced;

pub use operators::DiscreteOperators;
pub use reduced::ReducedSpace;

use nalgebra::DVector;

use crate::model::CavityGeometry;

#[derive(Debug, Clone)]
pub struct StaggeredGrid {
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
    pub x0: f64,
    pub y0: f64,
    /// Face coordinates, u-faces then v-faces.
    pub face_x: Vec<f64>,
    pub face_y: Vec<f64>,
    /// Faces lying on the cavity wall (normal velocity components).
    pub boundary: Vec<bool>,
    /// Quadrature weights: `hx hy` on interior faces, half of that on wall faces.
    pub weights: DVector<f64>,
}

impl StaggeredGrid {
    pub fn new(cavity: &CavityGeometry) -> Self {
        let (nx, ny) = (cavity.nx, cavity.ny);
        let (hx, hy) = (cavity.hx(), cavity.hy());
        let x0 = cavity.center_offset[0] - cavity.half_width;
        let y0 = cavity.center_offset[1] - cavity.half_height;
        let nu = (nx + 1) * ny;
        let nv = nx * (ny + 1);
        let mut face_x = Vec::with_capacity(nu + nv);
        let mut face_y = Vec::with_capacity(nu + nv);
        let mut boundary = Vec::with_capacity(nu + nv);
        for j in 0..ny {
            for i in 0..=nx {
                face_x.push(x0 + i as f64 * hx);
                face_y.push(y0 + (j as f64 + 0.5) * hy);
                boundary.push(i == 0 || i == nx);
            }
        }
        for j in 0..=ny {
            for i in 0..nx {
                face_x.push(x0 + (i as f64 + 0.5) * hx);
                face_y.push(y0 + j as f64 * hy);
                boundary.push(j == 0 || j == ny);
            }
        }
        let weights = DVector::from_iterator(
            nu + nv,
            boundary
                .iter()
                .map(|&b| if b { 0.5 * hx * hy } else { hx * hy }),
        );
        Self {
            nx,
            ny,
            hx,
            hy,
            x0,
            y0,
            face_x,
            face_y,
            boundary,
            weights,
        }
    }

    pub fn n_u(&self) -> usize {
        (self.nx + 1) * self.ny
    }

    pub fn n_v(&self) -> usize {
        self.nx * (self.ny + 1)
    }

    pub fn n_faces(&self) -> usize {
        self.n_u() + self.n_v()
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn n_nodes(&self) -> usize {
        (self.nx - 1) * (self.ny - 1)
    }

    pub fn cell_area(&self) -> f64 {
        self.hx * self.hy
    }

    #[inline]
    pub fn u(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    #[inline]
    pub fn v(&self, i: usize, j: usize) -> usize {
        self.n_u() + j * self.nx + i
    }

    #[inline]
    pub fn cell(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Interior node index, `None` on the boundary.
    #[inline]
    pub fn node(&self, i: usize, j: usize) -> Option<usize> {
        if i == 0 || j == 0 || i >= self.nx || j >= self.ny {
            None
        } else {
            Some((j - 1) * (self.nx - 1) + (i - 1))
        }
    }

    pub fn is_u_face(&self, f: usize) -> bool {
        f < self.n_u()
    }

    /// Samples a vector field `(f1, f2)` at the faces (normal components).
    pub fn sample(&self, f: impl Fn(f64, f64) -> [f64; 2]) -> DVector<f64> {
        DVector::from_iterator(
            self.n_faces(),
            (0..self.n_faces()).map(|k| {
                let val = f(self.face_x[k], self.face_y[k]);
                if self.is_u_face(k) {
                    val[0]
                } else {
                    val[1]
                }
            }),
        )
    }

    /// The rigid rotation field `e3 × x = (−y, x)` on all faces.
    pub fn rigid_field(&self) -> DVector<f64> {
        self.sample(|x, y| [-y, x])
    }

    /// Zeroes the wall (normal) components.
    pub fn mask_boundary(&self, v: &mut DVector<f64>) {
        for (k, &b) in self.boundary.iter().enumerate() {
            if b {
                v[k] = 0.0;
            }
        }
    }

    /// Cell-centered components `(u, v)` by face averaging.
    pub fn cell_velocity(&self, v: &DVector<f64>, i: usize, j: usize) -> [f64; 2] {
        [
            0.5 * (v[self.u(i, j)] + v[self.u(i + 1, j)]),
            0.5 * (v[self.v(i, j)] + v[self.v(i, j + 1)]),
        ]
    }

    pub fn max_abs_velocity(&self, v: &DVector<f64>) -> f64 {
        v.amax()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_offsets() {
        let mut cav = CavityGeometry::unit_square(8);
        cav.center_offset = [1.0, -0.25];
        cav.ny = 10;
        let g = StaggeredGrid::new(&cav);
        assert_eq!(g.n_u(), 9 * 10);
        assert_eq!(g.n_v(), 8 * 11);
        assert_eq!(g.n_cells(), 80);
        assert!((g.face_x[g.u(0, 0)] - 0.5).abs() < 1e-15);
        assert!((g.face_y[g.v(0, 0)] + 0.75).abs() < 1e-15);
        assert!((g.face_x[g.u(8, 3)] - 1.5).abs() < 1e-15);
        assert_eq!(g.boundary.iter().filter(|&&b| b).count(), 2 * 10 + 2 * 8);
    }

    #[test]
    fn rigid_field_quadrature_matches_cell_midpoint_moment() {
        let cav = CavityGeometry {
            half_width: 0.6,
            half_height: 0.4,
            center_offset: [0.2, 0.7],
            nx: 12,
            ny: 9,
        };
        let g = StaggeredGrid::new(&cav);
        let r = g.rigid_field();
        let q: f64 = r.iter().zip(g.weights.iter()).map(|(a, w)| a * a * w).sum();
        let exact = crate::model::cavity_second_moment(&cav);
        assert!((q - exact).abs() < 1e-13 * exact);
    }
}
