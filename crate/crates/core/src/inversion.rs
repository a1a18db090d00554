//! Potential recovery from estimated states through the Lippmann-Schwinger
//! identity
//!
//! ```text
//! f(k) - f0(k) = 1/(2 i k) * int u0(x; k) u(x; k) (q(x) - q0(x)) dx
//! ```
//!
//! with Tikhonov regularization on the basis coefficients of `q - q0`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::estimation::StateEstimate;
use crate::forward::{BoundarySpectrum, StateField};
use crate::grid::SpatialGrid;
use crate::linalg::{c, CMat, CVec};
use crate::potential::PotentialModel;

/// Singular values below this fraction of the largest are dropped when `alpha = 0`.
pub const MIN_NORM_RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct LSKernel {
    /// m x n_q
    pub k: CMat,
    /// `f - f0`
    pub rhs: CVec,
    /// Basis of the perturbation (coefficients ignored).
    pub basis: PotentialModel,
    pub wavenumbers: Vec<f64>,
}

impl LSKernel {
    /// The real system `[Re K; Im K] x = [Re rhs; Im rhs]`.
    pub fn stacked_real(&self) -> (DMatrix<f64>, DVector<f64>) {
        let (m, nq) = self.k.shape();
        let a = DMatrix::from_fn(2 * m, nq, |i, j| {
            if i < m {
                self.k[(i, j)].re
            } else {
                self.k[(i - m, j)].im
            }
        });
        let b = DVector::from_fn(2 * m, |i, _| if i < m { self.rhs[i].re } else { self.rhs[i - m].im });
        (a, b)
    }

    /// `|K x - rhs|` for real coefficients `x`.
    pub fn misfit(&self, x: &[f64]) -> f64 {
        let xv = CVec::from_iterator(x.len(), x.iter().map(|&v| c(v, 0.0)));
        (&self.k * xv - &self.rhs).norm()
    }
}

/// Build the kernel `K_ij = 1/(2 i k_i) sum_n w_n u0_i(x_n) u_i(x_n) phi_j(x_n)`.
pub fn assemble_kernel(
    ref_states: &[StateField],
    estimates: &[StateEstimate],
    spectrum: &BoundarySpectrum,
    ref_spectrum: &BoundarySpectrum,
    basis: &PotentialModel,
    grid: &SpatialGrid,
) -> Result<LSKernel> {
    let m = spectrum.len();
    if ref_states.len() != m || estimates.len() != m || ref_spectrum.len() != m {
        return Err(Error::Invalid(format!(
            "kernel needs {m} reference states and estimates, got {} and {}",
            ref_states.len(),
            estimates.len()
        )));
    }
    if ref_spectrum.wavenumbers != spectrum.wavenumbers {
        return Err(Error::Invalid("reference spectrum uses different wavenumbers".into()));
    }
    for (u0, est) in ref_states.iter().zip(estimates) {
        u0.check_grid(grid)?;
        if est.values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "estimate at k = {} has {} samples, grid has {} nodes",
                est.k,
                est.values.len(),
                grid.len()
            )));
        }
    }
    let w = grid.trapezoid_weights();
    let phi = basis.basis_matrix(grid);
    let nq = basis.n_basis();
    let mut kmat = CMat::zeros(m, nq);
    for i in 0..m {
        let ki = spectrum.wavenumbers[i];
        let pref = 1.0 / (2.0 * Complex64::new(0.0, ki));
        let prod: Vec<Complex64> = (0..grid.len())
            .map(|n| ref_states[i].values[n] * estimates[i].values[n] * w[n])
            .collect();
        for j in 0..nq {
            let col = phi.column(j);
            let s: Complex64 = prod
                .iter()
                .zip(col.iter())
                .filter(|(_, p)| **p != 0.0)
                .map(|(z, p)| z * *p)
                .sum();
            kmat[(i, j)] = pref * s;
        }
    }
    let rhs = CVec::from_iterator(m, spectrum.f.iter().zip(&ref_spectrum.f).map(|(a, b)| a - b));
    Ok(LSKernel {
        k: kmat,
        rhs,
        basis: basis.clone(),
        wavenumbers: spectrum.wavenumbers.clone(),
    })
}

/// `q0 + delta_q`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveredPotential {
    pub reference: PotentialModel,
    pub perturbation: PotentialModel,
}

impl RecoveredPotential {
    pub fn evaluate(&self, grid: &SpatialGrid) -> Vec<f64> {
        self.reference
            .evaluate(grid)
            .into_iter()
            .zip(self.perturbation.evaluate(grid))
            .map(|(a, b)| a + b)
            .collect()
    }
}

/// Tikhonov solves for one kernel at any number of `alpha` values from a
/// single SVD of the stacked real system.
#[derive(Debug, Clone)]
pub struct TikhonovSolver {
    basis: PotentialModel,
    singular_values: Vec<f64>,
    /// `V` columns, n_q x p
    v: DMatrix<f64>,
    /// `U^T b`
    projected: Vec<f64>,
}

impl TikhonovSolver {
    pub fn new(kernel: &LSKernel) -> Self {
        let (a, b) = kernel.stacked_real();
        let svd = a.svd(true, true);
        let u = svd.u.expect("u requested");
        let v = svd.v_t.expect("v_t requested").transpose();
        let projected = (0..svd.singular_values.len()).map(|i| u.column(i).dot(&b)).collect();
        Self {
            basis: kernel.basis.clone(),
            singular_values: svd.singular_values.iter().cloned().collect(),
            v,
            projected,
        }
    }

    /// Minimizer of `|K x - rhs|^2 + alpha |x|^2` over real `x`.
    pub fn coefficients(&self, alpha: f64) -> Result<Vec<f64>> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::Invalid(format!("alpha must be nonnegative, got {alpha}")));
        }
        let smax = self.singular_values.iter().cloned().fold(0.0, f64::max);
        let mut x = DVector::zeros(self.v.nrows());
        let mut dropped = 0;
        for (i, &s) in self.singular_values.iter().enumerate() {
            let gain = if alpha > 0.0 {
                s / (s * s + alpha)
            } else if s > MIN_NORM_RANK_TOL * smax {
                1.0 / s
            } else {
                dropped += 1;
                0.0
            };
            if gain != 0.0 {
                x += self.v.column(i) * (gain * self.projected[i]);
            }
        }
        if dropped > 0 {
            log::warn!("unregularized kernel is rank deficient; using the minimum-norm solution");
        }
        Ok(x.iter().cloned().collect())
    }

    pub fn solve(&self, alpha: f64) -> Result<PotentialModel> {
        self.basis.with_coefficients(self.coefficients(alpha)?)
    }
}

/// Regularized perturbation `delta_q` in the kernel's basis.
pub fn tikhonov_solve(kernel: &LSKernel, alpha: f64) -> Result<PotentialModel> {
    TikhonovSolver::new(kernel).solve(alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::{born_estimate, true_estimate};
    use crate::forward::{generate_spectrum_with_states, interior_wavenumbers};

    struct Case {
        grid: SpatialGrid,
        spec: BoundarySpectrum,
        states: Vec<StateField>,
        ref_spec: BoundarySpectrum,
        ref_states: Vec<StateField>,
    }

    fn case(q: &PotentialModel, q0: &PotentialModel, m: usize) -> Case {
        let grid = SpatialGrid::new(1000).unwrap();
        let ks = interior_wavenumbers(m, 10.0);
        let (spec, states) = generate_spectrum_with_states(q, &ks, &grid).unwrap();
        let (ref_spec, ref_states) = generate_spectrum_with_states(q0, &ks, &grid).unwrap();
        Case {
            grid,
            spec,
            states,
            ref_spec,
            ref_states,
        }
    }

    fn cells(n: usize) -> PotentialModel {
        PotentialModel::piecewise_constant((0.0, 1.0), vec![0.0; n]).unwrap()
    }

    fn true_estimates(c: &Case) -> Vec<StateEstimate> {
        (0..c.states.len()).map(|i| true_estimate(&c.states, i).unwrap()).collect()
    }

    #[test]
    fn self_reference_gives_zero_rhs() {
        let q = PotentialModel::default_truth();
        let c = case(&q, &q, 10);
        let k = assemble_kernel(&c.ref_states, &true_estimates(&c), &c.spec, &c.ref_spec, &cells(100), &c.grid).unwrap();
        assert!(k.rhs.iter().all(|z| z.norm() == 0.0));
        let dq = tikhonov_solve(&k, 1e-3).unwrap();
        assert!(dq.coefficients().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn kernel_shape_and_rank() {
        let c = case(&PotentialModel::default_truth(), &PotentialModel::zero(), 10);
        let k = assemble_kernel(&c.ref_states, &true_estimates(&c), &c.spec, &c.ref_spec, &cells(100), &c.grid).unwrap();
        assert_eq!(k.k.shape(), (10, 100));
        let rank = k.k.clone().rank(1e-10 * k.k.norm());
        assert!(rank <= 10);
    }

    #[test]
    fn single_constant_basis_matches_direct_quadrature() {
        // q0 = 0 and phi = 1 on (0, 1): K_i = 1/(2 i k) int exp(i k x) u(x) dx
        let q = PotentialModel::gaussian_bumps(
            (0.1, 0.9),
            vec![crate::potential::Bump { center: 0.5, width: 0.1 }],
            vec![0.5],
        )
        .unwrap();
        let c = case(&q, &PotentialModel::zero(), 3);
        let one = PotentialModel::piecewise_constant((0.0, 1.0), vec![0.0]).unwrap();
        let k = assemble_kernel(&c.ref_states, &true_estimates(&c), &c.spec, &c.ref_spec, &one, &c.grid).unwrap();
        let x = c.grid.nodes();
        let h = c.grid.spacing();
        for i in 0..3 {
            let ki = c.spec.wavenumbers[i];
            // Simpson's rule on the analytic plane wave times the solved state
            let f = |n: usize| Complex64::new(0.0, ki * x[n]).exp() * c.states[i].values[n];
            let mut s = f(0) + f(1000);
            for n in 1..1000 {
                s += f(n) * if n % 2 == 1 { 4.0 } else { 2.0 };
            }
            let integral = s * (h / 3.0);
            let expected = integral / Complex64::new(0.0, 2.0 * ki);
            assert!((k.k[(i, 0)] - expected).norm() < 1e-4 * expected.norm(), "i={i}");
        }
    }

    #[test]
    fn true_perturbation_nearly_explains_the_data() {
        let q = PotentialModel::default_truth();
        let c = case(&q, &PotentialModel::zero(), 10);
        let basis = cells(100);
        let k = assemble_kernel(&c.ref_states, &true_estimates(&c), &c.spec, &c.ref_spec, &basis, &c.grid).unwrap();
        // cell averages of the true potential
        let x = c.grid.nodes();
        let dq: Vec<f64> = (0..100)
            .map(|j| {
                let pts: Vec<f64> = (10 * j..=10 * j + 10).map(|n| q.value_at(x[n])).collect();
                pts.iter().sum::<f64>() / pts.len() as f64
            })
            .collect();
        let misfit = k.misfit(&dq);
        assert!(misfit < 1e-2 * k.rhs.norm(), "{misfit} vs {}", k.rhs.norm());
        // the opposite sign convention would not explain the data at all
        let flipped: Vec<f64> = dq.iter().map(|v| -v).collect();
        assert!(k.misfit(&flipped) > k.rhs.norm());
    }

    #[test]
    fn tikhonov_monotone_in_alpha() {
        let c = case(&PotentialModel::default_truth(), &PotentialModel::zero(), 10);
        let k = assemble_kernel(&c.ref_states, &true_estimates(&c), &c.spec, &c.ref_spec, &cells(100), &c.grid).unwrap();
        let solver = TikhonovSolver::new(&k);
        let mut last_norm = f64::INFINITY;
        let mut last_misfit = 0.0;
        for e in -4..=2 {
            let x = solver.coefficients(10f64.powi(e)).unwrap();
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let misfit = k.misfit(&x);
            assert!(norm <= last_norm * (1.0 + 1e-12));
            assert!(misfit >= last_misfit * (1.0 - 1e-12));
            last_norm = norm;
            last_misfit = misfit;
        }
    }

    #[test]
    fn tikhonov_matches_normal_equations() {
        let c = case(&PotentialModel::default_truth(), &PotentialModel::zero(), 10);
        let k = assemble_kernel(&c.ref_states, &true_estimates(&c), &c.spec, &c.ref_spec, &cells(20), &c.grid).unwrap();
        let alpha = 1e-3;
        let x = TikhonovSolver::new(&k).coefficients(alpha).unwrap();
        let (a, b) = k.stacked_real();
        let lhs = a.transpose() * &a + DMatrix::identity(20, 20) * alpha;
        let direct = lhs.lu().solve(&(a.transpose() * b)).unwrap();
        for (u, v) in x.iter().zip(direct.iter()) {
            assert!((u - v).abs() < 1e-8 * direct.norm());
        }
    }

    #[test]
    fn born_states_recover_worse_than_true_states() {
        let q = PotentialModel::default_truth();
        let c = case(&q, &PotentialModel::zero(), 10);
        let basis = cells(100);
        let truth = q.evaluate(&c.grid);
        let err = |est: &[StateEstimate]| {
            let k = assemble_kernel(&c.ref_states, est, &c.spec, &c.ref_spec, &basis, &c.grid).unwrap();
            let solver = TikhonovSolver::new(&k);
            (-6..=1)
                .map(|e| {
                    let dq = solver.solve(10f64.powi(e)).unwrap();
                    let rec = RecoveredPotential { reference: PotentialModel::zero(), perturbation: dq }.evaluate(&c.grid);
                    let num: f64 = rec.iter().zip(&truth).map(|(a, b)| (a - b).powi(2)).sum();
                    let den: f64 = truth.iter().map(|b| b * b).sum();
                    (num / den).sqrt()
                })
                .fold(f64::INFINITY, f64::min)
        };
        let born: Vec<_> = (0..10).map(|i| born_estimate(&c.ref_states, i).unwrap()).collect();
        let e_true = err(&true_estimates(&c));
        let e_born = err(&born);
        assert!(e_true < e_born, "{e_true} vs {e_born}");
    }

    #[test]
    fn negative_alpha_rejected() {
        let c = case(&PotentialModel::zero(), &PotentialModel::zero(), 2);
        let k = assemble_kernel(&c.ref_states, &true_estimates(&c), &c.spec, &c.ref_spec, &cells(4), &c.grid).unwrap();
        assert!(tikhonov_solve(&k, -1.0).is_err());
    }

    #[test]
    fn misaligned_inputs_rejected() {
        let c = case(&PotentialModel::zero(), &PotentialModel::zero(), 3);
        let est = true_estimates(&c);
        assert!(assemble_kernel(&c.ref_states[..2], &est, &c.spec, &c.ref_spec, &cells(4), &c.grid).is_err());
        let other = SpatialGrid::new(500).unwrap();
        assert!(assemble_kernel(&c.ref_states, &est, &c.spec, &c.ref_spec, &cells(4), &other).is_err());
    }
}
