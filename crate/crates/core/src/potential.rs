//! Real scattering potentials represented in a finite basis on (0, 1).

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;

/// Shape of one Gaussian bump. Its amplitude lives in the coefficient vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub center: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Basis {
    /// Indicator functions of `cells` equal cells tiling `support`.
    PiecewiseConstant { cells: usize },
    /// Gaussians `exp(-(x - c)^2 / (2 w^2))`, truncated to `support`.
    GaussianBumps { bumps: Vec<Bump> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialModel {
    basis: Basis,
    support: (f64, f64),
    coefficients: Vec<f64>,
}

impl PotentialModel {
    pub fn piecewise_constant(support: (f64, f64), coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::Invalid("piecewise-constant basis needs at least one cell".into()));
        }
        let cells = coefficients.len();
        Self::checked(Basis::PiecewiseConstant { cells }, support, coefficients)
    }

    pub fn gaussian_bumps(support: (f64, f64), bumps: Vec<Bump>, amplitudes: Vec<f64>) -> Result<Self> {
        if bumps.len() != amplitudes.len() {
            return Err(Error::Invalid(format!(
                "{} bumps but {} amplitudes",
                bumps.len(),
                amplitudes.len()
            )));
        }
        if let Some(b) = bumps.iter().find(|b| !(b.width > 0.0) || !b.center.is_finite()) {
            return Err(Error::Invalid(format!("bad bump shape {b:?}")));
        }
        Self::checked(Basis::GaussianBumps { bumps }, support, amplitudes)
    }

    /// The zero potential (free space).
    pub fn zero() -> Self {
        Self {
            basis: Basis::GaussianBumps { bumps: vec![] },
            support: (0.0, 1.0),
            coefficients: vec![],
        }
    }

    /// Default test potential: a single bump of height 4 centred at 0.5 with
    /// width 0.08, truncated outside [0.1, 0.9].
    pub fn default_truth() -> Self {
        Self::gaussian_bumps(
            (0.1, 0.9),
            vec![Bump {
                center: 0.5,
                width: 0.08,
            }],
            vec![4.0],
        )
        .expect("default potential is valid")
    }

    fn checked(basis: Basis, support: (f64, f64), coefficients: Vec<f64>) -> Result<Self> {
        let (a, b) = support;
        if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) || a >= b {
            return Err(Error::Invalid(format!("support ({a}, {b}) must lie in [0, 1] with a < b")));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::Invalid("potential coefficients must be finite".into()));
        }
        Ok(Self {
            basis,
            support,
            coefficients,
        })
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn n_basis(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients.iter().all(|&c| c == 0.0)
    }

    /// Same basis, new coefficients.
    pub fn with_coefficients(&self, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != self.coefficients.len() {
            return Err(Error::Invalid(format!(
                "expected {} coefficients, got {}",
                self.coefficients.len(),
                coefficients.len()
            )));
        }
        Self::checked(self.basis.clone(), self.support, coefficients)
    }

    /// Value of basis function `j` at `x`.
    ///
    /// Piecewise-constant cells take the value 1/2 on end points shared with a
    /// neighbouring cell, so the cells sum to one everywhere on the support.
    pub fn basis_value(&self, j: usize, x: f64) -> f64 {
        let (a, b) = self.support;
        match &self.basis {
            Basis::PiecewiseConstant { cells } => {
                let w = (b - a) / *cells as f64;
                let lo = a + j as f64 * w;
                let hi = if j + 1 == *cells { b } else { a + (j + 1) as f64 * w };
                let tol = 1e-12 * w;
                if (x - lo).abs() <= tol {
                    if j == 0 { 1.0 } else { 0.5 }
                } else if (x - hi).abs() <= tol {
                    if j + 1 == *cells { 1.0 } else { 0.5 }
                } else if x > lo && x < hi {
                    1.0
                } else {
                    0.0
                }
            }
            Basis::GaussianBumps { bumps } => {
                if x < a || x > b {
                    return 0.0;
                }
                let Bump { center, width } = bumps[j];
                let d = (x - center) / width;
                (-0.5 * d * d).exp()
            }
        }
    }

    pub fn value_at(&self, x: f64) -> f64 {
        self.coefficients
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(j, c)| c * self.basis_value(j, x))
            .sum()
    }

    pub fn evaluate(&self, grid: &SpatialGrid) -> Vec<f64> {
        grid.nodes().iter().map(|&x| self.value_at(x)).collect()
    }

    /// Node-by-basis matrix `Phi[(n, j)] = phi_j(x_n)`.
    pub fn basis_matrix(&self, grid: &SpatialGrid) -> DMatrix<f64> {
        DMatrix::from_fn(grid.len(), self.n_basis(), |n, j| {
            self.basis_value(j, grid.nodes()[n])
        })
    }
}
