//! M-orthogonal Lanczos tridiagonalization of `M^{-1} S`.

use nalgebra::Cholesky;

use crate::error::{Error, Result};
use crate::linalg::{c, CMat, CVec};

/// A new Lanczos vector whose norm drops below this fraction of its norm
/// before orthogonalization ends the iteration.
pub const BREAKDOWN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct LanczosFactor {
    /// m x r, columns orthonormal in the `(M + eps I)` inner product.
    pub q: CMat,
    /// r x r real symmetric tridiagonal (stored complex).
    pub t: CMat,
    pub epsilon: f64,
}

impl LanczosFactor {
    pub fn rank(&self) -> usize {
        self.q.ncols()
    }

    /// Keep the first `r` Lanczos vectors.
    pub fn truncated(&self, r: usize) -> Self {
        let r = r.min(self.rank());
        Self {
            q: self.q.columns(0, r).into_owned(),
            t: self.t.view((0, 0), (r, r)).into_owned(),
            epsilon: self.epsilon,
        }
    }
}

/// Run the M-orthogonal Lanczos process on `(M + epsilon I)^{-1} S` from
/// `start`, with full reorthogonalization.
///
/// With `M + epsilon I = L L^*` the iteration runs as a standard Hermitian
/// Lanczos on `L^{-1} S L^{-*}` from `L^* start`; `Q = L^{-*} P` maps the
/// orthonormal vectors `P` back.
pub fn lanczos_m_orthogonal(s: &CMat, m: &CMat, epsilon: f64, start: &CVec) -> Result<LanczosFactor> {
    let n = s.nrows();
    if s.ncols() != n || m.nrows() != n || m.ncols() != n || start.len() != n {
        return Err(Error::Invalid("Lanczos: dimension mismatch".into()));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::Invalid(format!("epsilon must be nonnegative, got {epsilon}")));
    }
    let mass = m + CMat::identity(n, n) * c(epsilon, 0.0);
    let smallest = mass
        .clone()
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if !(smallest > 0.0) {
        return Err(Error::NotPositiveDefinite { epsilon });
    }
    let chol = Cholesky::new(mass).ok_or(Error::NotPositiveDefinite { epsilon })?;
    let l = chol.l();
    let l_adj = l.adjoint();

    // S_hat = L^{-1} S L^{-*}
    let left = l
        .solve_lower_triangular(s)
        .ok_or(Error::NotPositiveDefinite { epsilon })?;
    let s_hat = l
        .solve_lower_triangular(&left.adjoint())
        .ok_or(Error::NotPositiveDefinite { epsilon })?
        .adjoint();
    let s_hat = crate::linalg::hermitian_part(&s_hat);

    let p0 = &l_adj * start;
    let p0_norm = p0.norm();
    if !(p0_norm > 0.0) {
        return Err(Error::Invalid("Lanczos start vector is zero".into()));
    }

    let mut basis: Vec<CVec> = vec![p0 / c(p0_norm, 0.0)];
    let mut alpha: Vec<f64> = Vec::with_capacity(n);
    let mut beta: Vec<f64> = Vec::with_capacity(n);

    loop {
        let j = basis.len() - 1;
        let mut z = &s_hat * &basis[j];
        alpha.push(basis[j].dotc(&z).re);
        if basis.len() == n {
            break;
        }
        let before = z.norm();
        // two passes of classical Gram-Schmidt against every previous vector
        for _ in 0..2 {
            for p in &basis {
                let proj = p.dotc(&z);
                z -= p * proj;
            }
        }
        let b = z.norm();
        if !(b > BREAKDOWN_TOL * before) {
            break;
        }
        beta.push(b);
        basis.push(z / c(b, 0.0));
    }

    let r = basis.len();
    let p = CMat::from_columns(&basis);
    let q = l_adj
        .solve_upper_triangular(&p)
        .ok_or(Error::NotPositiveDefinite { epsilon })?;
    let mut t = CMat::zeros(r, r);
    for i in 0..r {
        t[(i, i)] = c(alpha[i], 0.0);
        if i + 1 < r {
            t[(i, i + 1)] = c(beta[i], 0.0);
            t[(i + 1, i)] = c(beta[i], 0.0);
        }
    }
    Ok(LanczosFactor { q, t, epsilon })
}

/// Largest entry of `Q^*(M + eps I)Q - I`.
pub fn orthonormality_defect(factor: &LanczosFactor, m: &CMat) -> f64 {
    let n = m.nrows();
    let mass = m + CMat::identity(n, n) * c(factor.epsilon, 0.0);
    let g = factor.q.adjoint() * mass * &factor.q;
    let r = g.nrows();
    (g - CMat::identity(r, r)).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest entry of `Q^* S Q` outside the tridiagonal band relative to `|T|`,
/// and the largest in-band deviation from `T` relative to `|T|`.
pub fn tridiagonality_defect(factor: &LanczosFactor, s: &CMat) -> (f64, f64) {
    let p = factor.q.adjoint() * s * &factor.q;
    let scale = crate::linalg::frobenius(&factor.t).max(f64::MIN_POSITIVE);
    let mut off: f64 = 0.0;
    let mut band: f64 = 0.0;
    for i in 0..p.nrows() {
        for j in 0..p.ncols() {
            let d = if i.abs_diff(j) > 1 {
                off = off.max(p[(i, j)].norm());
                continue;
            } else {
                (p[(i, j)] - factor.t[(i, j)]).norm()
            };
            band = band.max(d);
        }
    }
    (off / scale, band / scale)
}
