//! Finite-difference solver for
//!
//! ```text
//! -u'' + q u - k^2 u = 0   on (0, 1)
//! u'(0) + i k u(0) = 2 i k,   u'(1) - i k u(1) = 0
//! ```
//!
//! Robin conditions are closed with ghost nodes, which makes every row of the
//! tridiagonal system the weak form tested against one hat function, with the
//! stiffness integral taken cell-wise and the mass integral by the trapezoid
//! rule. The ROM inner products in [`crate::rom`] use the same discrete forms.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::potential::PotentialModel;
use crate::tridiag::TridiagLu;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// A complex function sampled on the grid nodes at wavenumber `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateField {
    pub k: f64,
    pub values: Vec<Complex64>,
}

impl StateField {
    pub fn new(k: f64, values: Vec<Complex64>) -> Result<Self> {
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Invalid(format!("non-finite state values at k = {k}")));
        }
        Ok(Self { k, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn check_grid(&self, grid: &SpatialGrid) -> Result<()> {
        if self.values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "state at k = {} has {} samples, grid has {} nodes",
                self.k,
                self.values.len(),
                grid.len()
            )));
        }
        Ok(())
    }
}

/// Reflection-side and transmission-side traces `(u(0), u(1))`.
pub fn boundary_trace(u: &StateField) -> (Complex64, Complex64) {
    (u.values[0], u.values[u.values.len() - 1])
}

/// Boundary data and their k-derivatives at a set of wavenumbers.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySpectrum {
    pub wavenumbers: Vec<f64>,
    pub f: Vec<Complex64>,
    pub g: Vec<Complex64>,
    pub fprime: Vec<Complex64>,
    pub gprime: Vec<Complex64>,
}

impl BoundarySpectrum {
    pub fn new(
        wavenumbers: Vec<f64>,
        f: Vec<Complex64>,
        g: Vec<Complex64>,
        fprime: Vec<Complex64>,
        gprime: Vec<Complex64>,
    ) -> Result<Self> {
        let s = Self {
            wavenumbers,
            f,
            g,
            fprime,
            gprime,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.wavenumbers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wavenumbers.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.wavenumbers.len();
        if m == 0 {
            return Err(Error::Invalid("spectrum has no wavenumbers".into()));
        }
        for (name, v) in [("f", &self.f), ("g", &self.g), ("f'", &self.fprime), ("g'", &self.gprime)] {
            if v.len() != m {
                return Err(Error::Invalid(format!(
                    "spectrum column {name} has {} entries, expected {m}",
                    v.len()
                )));
            }
            if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::Invalid(format!("spectrum column {name} has non-finite data")));
            }
        }
        check_wavenumbers(&self.wavenumbers)
    }
}

/// Wavenumbers must be positive, finite, and strictly increasing.
pub fn check_wavenumbers(ks: &[f64]) -> Result<()> {
    if ks.is_empty() {
        return Err(Error::Invalid("empty wavenumber list".into()));
    }
    if let Some(k) = ks.iter().find(|k| !(k.is_finite() && **k > 0.0)) {
        return Err(Error::Invalid(format!("wavenumber {k} is not a positive finite number")));
    }
    if let Some(w) = ks.windows(2).find(|w| w[1] <= w[0]) {
        return Err(Error::Invalid(format!(
            "wavenumbers must be strictly increasing ({} then {})",
            w[0], w[1]
        )));
    }
    Ok(())
}

/// `m` equispaced wavenumbers strictly inside `(0, kmax)`: `k_i = (i+1) kmax / (m+1)`.
pub fn interior_wavenumbers(m: usize, kmax: f64) -> Vec<f64> {
    (0..m).map(|i| (i + 1) as f64 * kmax / (m + 1) as f64).collect()
}

/// `m` equispaced wavenumbers in `(0, kmax]`: `k_i = (i+1) kmax / m`.
pub fn right_closed_wavenumbers(m: usize, kmax: f64) -> Vec<f64> {
    (0..m).map(|i| (i + 1) as f64 * kmax / m as f64).collect()
}

/// The discretized operator for one potential on one grid.
#[derive(Debug, Clone)]
pub struct Discretization<'g> {
    grid: &'g SpatialGrid,
    q: Vec<f64>,
}

/// One factored solve at a given wavenumber, reusable for the sensitivity.
struct Factored {
    k: f64,
    lu: TridiagLu,
}

impl<'g> Discretization<'g> {
    pub fn new(q: &PotentialModel, grid: &'g SpatialGrid) -> Self {
        Self {
            grid,
            q: q.evaluate(grid),
        }
    }

    pub fn grid(&self) -> &SpatialGrid {
        self.grid
    }

    pub fn potential_samples(&self) -> &[f64] {
        &self.q
    }

    /// Bands of the system at `k` (rows are weak-form residuals per hat function).
    pub fn bands(&self, k: f64) -> (Vec<Complex64>, Vec<Complex64>, Vec<Complex64>) {
        let n = self.grid.len();
        let h = self.grid.spacing();
        let off = Complex64::new(-1.0 / h, 0.0);
        let lower = vec![off; n];
        let upper = vec![off; n];
        let mut diag: Vec<Complex64> = self
            .q
            .iter()
            .map(|&qj| Complex64::new(2.0 / h + h * (qj - k * k), 0.0))
            .collect();
        diag[0] = Complex64::new(1.0 / h + 0.5 * h * (self.q[0] - k * k), -k);
        diag[n - 1] = Complex64::new(1.0 / h + 0.5 * h * (self.q[n - 1] - k * k), -k);
        (lower, diag, upper)
    }

    /// Right-hand side of the state system at `k`.
    pub fn source(&self, k: f64) -> Vec<Complex64> {
        let mut b = vec![Complex64::new(0.0, 0.0); self.grid.len()];
        b[0] = -2.0 * I * k;
        b
    }

    /// `A(k) u - b(k)` with `A` and `b` as above.
    pub fn residual(&self, u: &StateField) -> Vec<Complex64> {
        let (lower, diag, upper) = self.bands(u.k);
        let b = self.source(u.k);
        let v = &u.values;
        let n = v.len();
        (0..n)
            .map(|i| {
                let mut r = diag[i] * v[i] - b[i];
                if i > 0 {
                    r += lower[i] * v[i - 1];
                }
                if i + 1 < n {
                    r += upper[i] * v[i + 1];
                }
                r
            })
            .collect()
    }

    fn factor(&self, k: f64) -> Result<Factored> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::Invalid(format!("wavenumber must be positive, got {k}")));
        }
        let (lower, diag, upper) = self.bands(k);
        let lu = TridiagLu::factor(&lower, &diag, &upper)
            .map_err(|p| Error::Resonant { k, pivot: p.0 })?;
        Ok(Factored { k, lu })
    }

    pub fn solve(&self, k: f64) -> Result<StateField> {
        let f = self.factor(k)?;
        StateField::new(k, f.lu.solve(&self.source(k)))
    }

    /// `w = du/dk`, the exact k-derivative of the discrete state.
    pub fn sensitivity(&self, u: &StateField) -> Result<StateField> {
        u.check_grid(self.grid)?;
        let f = self.factor(u.k)?;
        self.sensitivity_with(&f, u)
    }

    fn sensitivity_with(&self, f: &Factored, u: &StateField) -> Result<StateField> {
        let k = f.k;
        let h = self.grid.spacing();
        let n = self.grid.len();
        // A(k) w = b'(k) - A'(k) u
        let mut rhs: Vec<Complex64> = u.values.iter().map(|&uj| 2.0 * k * h * uj).collect();
        rhs[0] = (k * h + I) * u.values[0] - 2.0 * I;
        rhs[n - 1] = (k * h + I) * u.values[n - 1];
        StateField::new(k, f.lu.solve(&rhs))
    }

    /// State and its k-derivative from a single factorization.
    pub fn solve_with_sensitivity(&self, k: f64) -> Result<(StateField, StateField)> {
        let f = self.factor(k)?;
        let u = StateField::new(k, f.lu.solve(&self.source(k)))?;
        let w = self.sensitivity_with(&f, &u)?;
        Ok((u, w))
    }
}

pub fn solve_bvp(q: &PotentialModel, k: f64, grid: &SpatialGrid) -> Result<StateField> {
    Discretization::new(q, grid).solve(k)
}

pub fn solve_sensitivity(
    q: &PotentialModel,
    k: f64,
    u: &StateField,
    grid: &SpatialGrid,
) -> Result<StateField> {
    if (u.k - k).abs() > 0.0 {
        return Err(Error::Invalid(format!(
            "state was solved at k = {} but sensitivity requested at k = {k}",
            u.k
        )));
    }
    Discretization::new(q, grid).sensitivity(u)
}

/// Boundary data at every wavenumber together with the solved states.
pub fn generate_spectrum_with_states(
    q: &PotentialModel,
    ks: &[f64],
    grid: &SpatialGrid,
) -> Result<(BoundarySpectrum, Vec<StateField>)> {
    check_wavenumbers(ks)?;
    let disc = Discretization::new(q, grid);
    let m = ks.len();
    let mut f = Vec::with_capacity(m);
    let mut g = Vec::with_capacity(m);
    let mut fp = Vec::with_capacity(m);
    let mut gp = Vec::with_capacity(m);
    let mut states = Vec::with_capacity(m);
    for &k in ks {
        let (u, w) = disc.solve_with_sensitivity(k).map_err(|e| e.at_k(k))?;
        let (f0, g0) = boundary_trace(&u);
        let (f1, g1) = boundary_trace(&w);
        f.push(f0);
        g.push(g0);
        fp.push(f1);
        gp.push(g1);
        states.push(u);
    }
    let spec = BoundarySpectrum::new(ks.to_vec(), f, g, fp, gp)?;
    Ok((spec, states))
}

pub fn generate_spectrum(q: &PotentialModel, ks: &[f64], grid: &SpatialGrid) -> Result<BoundarySpectrum> {
    generate_spectrum_with_states(q, ks, grid).map(|(s, _)| s)
}
