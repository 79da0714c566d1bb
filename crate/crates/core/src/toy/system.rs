use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::ToyError;
use crate::spectral::{
    projections, spectrum_of_matrix, SpectralProjections, SpectrumOptions, SpectrumReport,
};

/// `coeff · Π u_i^{powers_i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coeff: f64,
    pub powers: Vec<u32>,
}

impl Monomial {
    pub fn new(coeff: f64, powers: &[u32]) -> Self {
        Self {
            coeff,
            powers: powers.to_vec(),
        }
    }

    pub fn eval(&self, u: &DVector<f64>) -> f64 {
        self.powers
            .iter()
            .zip(u.iter())
            .fold(self.coeff, |acc, (&p, &x)| acc * x.powi(p as i32))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToySystem {
    pub name: String,
    pub l: DMatrix<f64>,
    /// Monomials of each output component of `N`.
    pub nonlinearity: Vec<Vec<Monomial>>,
    /// Declared exponents `(κ1, κ2, κ3)`.
    pub kappa: [f64; 3],
    /// Bookkeeping only: all norms are equivalent in finite dimension.
    pub alpha: f64,
}

impl ToySystem {
    pub fn new(
        name: impl Into<String>,
        l: DMatrix<f64>,
        nonlinearity: Vec<Vec<Monomial>>,
        kappa: [f64; 3],
        alpha: f64,
    ) -> Result<Self, ToyError> {
        let n = l.nrows();
        if l.ncols() != n {
            return Err(ToyError::Dimension {
                n,
                what: "L columns",
                got: l.ncols(),
            });
        }
        if nonlinearity.len() != n {
            return Err(ToyError::Dimension {
                n,
                what: "nonlinearity",
                got: nonlinearity.len(),
            });
        }
        for m in nonlinearity.iter().flatten() {
            if m.powers.len() != n {
                return Err(ToyError::Dimension {
                    n,
                    what: "monomial exponents",
                    got: m.powers.len(),
                });
            }
        }
        Ok(Self {
            name: name.into(),
            l,
            nonlinearity,
            kappa,
            alpha,
        })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn nonlinear(&self, u: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            self.nonlinearity
                .iter()
                .map(|terms| terms.iter().map(|m| m.eval(u)).sum::<f64>()),
        )
    }

    /// `−L u − N(u)`.
    pub fn rhs(&self, u: &DVector<f64>) -> DVector<f64> {
        -(&self.l * u) - self.nonlinear(u)
    }

    pub fn has_nonlinearity(&self) -> bool {
        self.nonlinearity.iter().flatten().any(|m| m.coeff != 0.0)
    }

    /// `‖(I + LᵀL)^α u‖`.
    pub fn alpha_norm(&self, u: &DVector<f64>) -> f64 {
        if self.alpha == 0.0 {
            return u.norm();
        }
        let a = DMatrix::identity(self.dim(), self.dim()) + self.l.transpose() * &self.l;
        let eig = a.symmetric_eigen();
        let c = eig.eigenvectors.transpose() * u;
        c.iter()
            .zip(eig.eigenvalues.iter())
            .map(|(ci, &lam)| (lam.powf(self.alpha) * ci).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn spectrum(&self) -> SpectrumReport {
        spectrum_of_matrix(
            &self.l,
            None,
            &SpectrumOptions {
                n_eigs: self.dim(),
                ..SpectrumOptions::default()
            },
        )
    }

    pub fn projections(&self) -> Result<SpectralProjections, ToyError> {
        Ok(projections(&self.l)?)
    }

    /// Checks that `N` vanishes on the kernel, sampling each kernel basis
    /// vector and their sum at a few scales.
    pub fn check_equilibria(&self, proj: &SpectralProjections) -> Result<(), ToyError> {
        let q = proj.q();
        let mut worst: f64 = 0.0;
        for s in [1e-2, 0.3, 1.0, 3.0] {
            for j in 0..self.dim() {
                let mut e = DVector::zeros(self.dim());
                e[j] = s;
                let u0 = &q * e;
                worst = worst.max(self.nonlinear(&u0).norm());
            }
        }
        if worst > 1e-12 {
            return Err(ToyError::NotEquilibrium { residual: worst });
        }
        Ok(())
    }
}

/// Shipped systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// `L = diag(0, 1, 2)`, `N = (u2 u3, u1 u2², u2³)`.
    Cubic3,
    /// Kernel, a stable spiral pair `0.6 ± 2i` and a real mode `1.5`.
    Spiral4,
    /// `L = diag(0, −0.5, 1)` with a destabilizing cubic term.
    Unstable3,
    /// Nilpotent `[[0, 1], [0, 0]]`: kernel equals range.
    Jordan2,
}

impl Preset {
    pub const ALL: [Preset; 4] = [
        Preset::Cubic3,
        Preset::Spiral4,
        Preset::Unstable3,
        Preset::Jordan2,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Cubic3 => "cubic3",
            Preset::Spiral4 => "spiral4",
            Preset::Unstable3 => "unstable3",
            Preset::Jordan2 => "jordan2",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s)
    }

    pub fn system(&self) -> ToySystem {
        let m = Monomial::new;
        let (l, n, kappa) = match self {
            Preset::Cubic3 => (
                DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0, 2.0])),
                vec![
                    vec![m(1.0, &[0, 1, 1])],
                    vec![m(1.0, &[1, 2, 0])],
                    vec![m(1.0, &[0, 3, 0])],
                ],
                [1.0, 2.0, 2.0],
            ),
            Preset::Spiral4 => {
                let mut l = DMatrix::zeros(4, 4);
                l[(1, 1)] = 0.6;
                l[(1, 2)] = -2.0;
                l[(2, 1)] = 2.0;
                l[(2, 2)] = 0.6;
                l[(3, 3)] = 1.5;
                (
                    l,
                    vec![
                        vec![m(1.0, &[0, 1, 0, 1])],
                        vec![m(1.0, &[1, 1, 1, 0])],
                        vec![m(-1.0, &[1, 2, 0, 0])],
                        vec![m(1.0, &[0, 0, 3, 0])],
                    ],
                    [1.0, 2.0, 2.0],
                )
            }
            Preset::Unstable3 => (
                DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, -0.5, 1.0])),
                vec![
                    vec![m(1.0, &[0, 1, 1])],
                    vec![m(-1.0, &[0, 3, 0])],
                    vec![m(1.0, &[0, 0, 2])],
                ],
                [1.0, 2.0, 2.0],
            ),
            Preset::Jordan2 => (
                DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
                vec![vec![], vec![]],
                [1.0, 1.0, 2.0],
            ),
        };
        ToySystem::new(self.name(), l, n, kappa, 0.5).expect("preset dimensions are consistent")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::SpectralError;

    #[test]
    fn presets_satisfy_kernel_hypotheses() {
        for p in [Preset::Cubic3, Preset::Spiral4, Preset::Unstable3] {
            let sys = p.system();
            let rep = sys.spectrum();
            assert_eq!(rep.kernel_dim, 1, "{}", p.name());
            assert!(rep.verdicts.h2 && rep.verdicts.h3);
            let proj = sys.projections().unwrap();
            sys.check_equilibria(&proj).unwrap();
        }
        let gap = Preset::Spiral4.system().spectrum().gamma_gap.unwrap();
        assert!((gap - 0.6).abs() < 1e-12);
        assert_eq!(Preset::Unstable3.system().spectrum().unstable_count, 1);
    }

    #[test]
    fn jordan_preset_is_refused() {
        let sys = Preset::Jordan2.system();
        assert!(matches!(
            sys.projections(),
            Err(ToyError::Spectral(
                SpectralError::KernelRangeIntersect { .. }
            ))
        ));
    }

    #[test]
    fn linear_nonlinearity_is_not_an_equilibrium_map() {
        let id = |i: usize| {
            let mut p = vec![0; 3];
            p[i] = 1;
            vec![Monomial::new(1.0, &p)]
        };
        let sys = ToySystem::new(
            "identity",
            DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0, 2.0])),
            vec![id(0), id(1), id(2)],
            [1.0, 1.0, 2.0],
            0.5,
        )
        .unwrap();
        let proj = sys.projections().unwrap();
        assert!(matches!(
            sys.check_equilibria(&proj),
            Err(ToyError::NotEquilibrium { .. })
        ));
    }

    #[test]
    fn alpha_norm_endpoints() {
        let mut sys = Preset::Cubic3.system();
        let u = DVector::from_vec(vec![0.3, -0.2, 0.5]);
        sys.alpha = 0.0;
        assert!((sys.alpha_norm(&u) - u.norm()).abs() < 1e-15);
        sys.alpha = 1.0;
        let a = DMatrix::identity(3, 3) + sys.l.transpose() * &sys.l;
        assert!((sys.alpha_norm(&u) - (a * &u).norm()).abs() < 1e-12);
        // Kernel vectors are unweighted.
        let k = DVector::from_vec(vec![0.7, 0.0, 0.0]);
        sys.alpha = 0.5;
        assert!((sys.alpha_norm(&k) - 0.7).abs() < 1e-14);
    }
}
