//! Small dense complex helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Reciprocal condition numbers below this are reported as singular.
pub const RCOND_TOL: f64 = 1e-15;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// 2-norm condition number from the singular values.
pub fn condition_number(a: &CMat) -> f64 {
    let sv = a.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solve a square system by partially pivoted LU. `k` only labels the error.
pub fn solve_square(a: &CMat, b: &CVec, k: f64) -> Result<CVec> {
    let cond = condition_number(a);
    if !(cond.is_finite() && 1.0 / cond >= RCOND_TOL) {
        return Err(Error::SingularSystem { k, condition: cond });
    }
    a.clone()
        .lu()
        .solve(b)
        .ok_or(Error::SingularSystem { k, condition: cond })
}

/// Minimum-norm least-squares solution with singular values below
/// `rel_tol * sigma_max` discarded. Returns the solution and the numerical rank.
pub fn lstsq_min_norm(a: &CMat, b: &CVec, rel_tol: f64) -> (CVec, usize) {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cut = rel_tol * smax;
    let rank = svd.singular_values.iter().filter(|&&s| s > cut).count();
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let mut x = CVec::zeros(a.ncols());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > cut {
            let coef = u.column(i).dotc(b) / s;
            x += v_t.row(i).adjoint() * coef;
        }
    }
    (x, rank)
}

/// Largest entrywise deviation from Hermitian symmetry relative to the largest entry.
pub fn hermitian_defect(a: &CMat) -> f64 {
    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    let mut worst: f64 = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst / scale
}

/// `(A + A^*) / 2`.
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()) * c(0.5, 0.0)
}

pub fn frobenius(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
