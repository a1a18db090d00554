//! Complex tridiagonal LU with partial (row) pivoting.

use num_complex::Complex64;

/// Pivots whose magnitude relative to the largest absolute row sum falls
/// below this are treated as singular.
pub const SCALED_PIVOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct TridiagLu {
    u0: Vec<Complex64>,
    u1: Vec<Complex64>,
    u2: Vec<Complex64>,
    mult: Vec<Complex64>,
    swapped: Vec<bool>,
}

/// Singular factorization; carries the smallest scaled pivot found.
#[derive(Debug, Clone, Copy)]
pub struct SingularPivot(pub f64);

impl TridiagLu {
    /// Factor the matrix with sub-diagonal `lower` (entry `(i, i-1)` stored at
    /// `lower[i]`, `lower[0]` unused), diagonal `diag`, and super-diagonal
    /// `upper` (entry `(i, i+1)` at `upper[i]`).
    pub fn factor(
        lower: &[Complex64],
        diag: &[Complex64],
        upper: &[Complex64],
    ) -> Result<Self, SingularPivot> {
        let n = diag.len();
        assert!(n >= 1 && lower.len() == n && upper.len() == n);
        let scale = (0..n)
            .map(|i| {
                let l = if i > 0 { lower[i].norm() } else { 0.0 };
                let u = if i + 1 < n { upper[i].norm() } else { 0.0 };
                l + diag[i].norm() + u
            })
            .fold(0.0, f64::max);

        let mut u0 = diag.to_vec();
        let mut u1 = upper.to_vec();
        let mut u2 = vec![Complex64::new(0.0, 0.0); n];
        let mut mult = vec![Complex64::new(0.0, 0.0); n];
        let mut swapped = vec![false; n];

        for i in 0..n.saturating_sub(1) {
            let l = lower[i + 1];
            let d = u0[i + 1];
            let e = if i + 2 < n { u1[i + 1] } else { Complex64::new(0.0, 0.0) };
            if u0[i].norm() >= l.norm() {
                if u0[i].norm() == 0.0 {
                    return Err(SingularPivot(0.0));
                }
                let m = l / u0[i];
                mult[i] = m;
                u0[i + 1] = d - m * u1[i];
                if i + 2 < n {
                    u1[i + 1] = e - m * u2[i];
                }
            } else {
                let (p0, p1, p2) = (u0[i], u1[i], u2[i]);
                let m = p0 / l;
                u0[i] = l;
                u1[i] = d;
                u2[i] = e;
                u0[i + 1] = p1 - m * d;
                if i + 2 < n {
                    u1[i + 1] = p2 - m * e;
                }
                mult[i] = m;
                swapped[i] = true;
            }
        }

        let smallest = u0.iter().map(|p| p.norm()).fold(f64::INFINITY, f64::min);
        let scaled = if scale > 0.0 { smallest / scale } else { 0.0 };
        if !(scaled >= SCALED_PIVOT_TOL) {
            return Err(SingularPivot(scaled));
        }
        Ok(Self {
            u0,
            u1,
            u2,
            mult,
            swapped,
        })
    }

    pub fn solve(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        let n = self.u0.len();
        assert_eq!(rhs.len(), n);
        let mut r = rhs.to_vec();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                r.swap(i, i + 1);
            }
            let t = r[i];
            r[i + 1] -= self.mult[i] * t;
        }
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        for i in (0..n).rev() {
            let mut s = r[i];
            if i + 1 < n {
                s -= self.u1[i] * x[i + 1];
            }
            if i + 2 < n {
                s -= self.u2[i] * x[i + 2];
            }
            x[i] = s / self.u0[i];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn dense(lower: &[Complex64], diag: &[Complex64], upper: &[Complex64]) -> DMatrix<Complex64> {
        let n = diag.len();
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                diag[i]
            } else if i == j + 1 {
                lower[i]
            } else if j == i + 1 {
                upper[i]
            } else {
                c(0.0, 0.0)
            }
        })
    }

    #[test]
    fn needs_pivoting_zero_leading_diagonal() {
        let lower = [c(0.0, 0.0), c(1.0, 0.0), c(2.0, 1.0)];
        let diag = [c(0.0, 0.0), c(3.0, 0.0), c(1.0, -1.0)];
        let upper = [c(1.0, 0.0), c(1.0, 2.0), c(0.0, 0.0)];
        let lu = TridiagLu::factor(&lower, &diag, &upper).unwrap();
        let b = [c(1.0, 0.0), c(0.0, 1.0), c(2.0, 0.0)];
        let x = lu.solve(&b);
        let a = dense(&lower, &diag, &upper);
        let r = &a * DVector::from_column_slice(&x) - DVector::from_column_slice(&b);
        assert!(r.norm() < 1e-13, "{}", r.norm());
    }

    #[test]
    fn singular_matrix_is_flagged() {
        let one = c(1.0, 0.0);
        let lower = [one; 3];
        let diag = [one; 3];
        let upper = [one; 3];
        // [[1,1,0],[1,1,0],[0,1,1]]: first two rows coincide
        let diag2 = [one, one, one];
        let lower2 = [one, one, one];
        let upper2 = [one, c(0.0, 0.0), one];
        assert!(TridiagLu::factor(&lower, &diag, &upper).is_ok());
        assert!(TridiagLu::factor(&lower2, &diag2, &upper2).is_err());
    }

    proptest! {
        #[test]
        fn matches_dense_solve(vals in prop::collection::vec(-5.0f64..5.0, 48)) {
            let n = 8;
            let lower: Vec<_> = (0..n).map(|i| c(vals[i], vals[i + n])).collect();
            let diag: Vec<_> = (0..n).map(|i| c(vals[i + 2 * n], vals[i + 3 * n])).collect();
            let upper: Vec<_> = (0..n).map(|i| c(vals[i + 4 * n], vals[i + 5 * n])).collect();
            let a = dense(&lower, &diag, &upper);
            let b: Vec<_> = (0..n).map(|i| c(i as f64, 1.0)).collect();
            if let Ok(lu) = TridiagLu::factor(&lower, &diag, &upper) {
                let x = lu.solve(&b);
                let r = &a * DVector::from_column_slice(&x) - DVector::from_column_slice(&b);
                let xn = DVector::from_column_slice(&x).norm();
                prop_assert!(r.norm() <= 1e-9 * (1.0 + a.norm() * xn));
            }
        }
    }
}
