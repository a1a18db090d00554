//! Internal state reconstruction from the data-driven ROM.
//!
//! The ROM coefficients are known from data, but the snapshot basis is not;
//! both estimators synthesize states from snapshots of a reference potential.
//! LO goes through the Lanczos-orthogonalized basis of each ROM; DA solves a
//! least-squares problem that also fits the boundary data.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::forward::{BoundarySpectrum, StateField};
use crate::lanczos::{lanczos_m_orthogonal, LanczosFactor};
use crate::linalg::{self, c, CMat, CVec};
use crate::rom::RomSystem;

/// Singular values of the DA system below this fraction of the largest are dropped.
pub const DA_RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Lo,
    Da,
    Born,
    True,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Lo, Method::Da, Method::Born, Method::True];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Lo => "LO",
            Method::Da => "DA",
            Method::Born => "BORN",
            Method::True => "TRUE",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "LO" => Ok(Method::Lo),
            "DA" => Ok(Method::Da),
            "BORN" => Ok(Method::Born),
            "TRUE" => Ok(Method::True),
            other => Err(Error::Config(format!(
                "unknown method `{other}` (expected LO, DA, BORN or TRUE)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateEstimate {
    pub k: f64,
    pub values: Vec<Complex64>,
    pub method: Method,
    pub coefficients: CVec,
}

impl StateEstimate {
    pub fn as_field(&self) -> StateField {
        StateField {
            k: self.k,
            values: self.values.clone(),
        }
    }
}

/// `sum_i coef_i * basis_i` on the grid.
fn synthesize(basis: &[StateField], coef: &CVec) -> Vec<Complex64> {
    let n = basis[0].values.len();
    let mut out = vec![c(0.0, 0.0); n];
    for (b, &ci) in basis.iter().zip(coef.iter()) {
        for (o, v) in out.iter_mut().zip(&b.values) {
            *o += ci * v;
        }
    }
    out
}

fn check_states(states: &[StateField], m: usize) -> Result<()> {
    if states.len() != m {
        return Err(Error::Invalid(format!(
            "{} reference states for a ROM of dimension {m}",
            states.len()
        )));
    }
    let n = states[0].values.len();
    if states.iter().any(|s| s.values.len() != n) {
        return Err(Error::GridMismatch("reference states differ in length".into()));
    }
    Ok(())
}

/// Lanczos factor of a ROM from the normalized start vector `conj(f)`.
pub fn rom_lanczos(rom: &RomSystem, epsilon: f64) -> Result<LanczosFactor> {
    let start = rom.f.map(|z| z.conj());
    lanczos_m_orthogonal(&rom.s, &rom.m, epsilon, &start)
}

/// LO estimator: data-side Lanczos factor for the coefficients, reference-side
/// factor for the orthogonalized basis.
#[derive(Debug, Clone)]
pub struct LoEstimator {
    factor: LanczosFactor,
    /// `Q^* B Q`
    reduced_b: CMat,
    /// `Q^* conj(f)`
    reduced_f: CVec,
    /// `v_j = sum_i Q0_ij u0_i`
    basis: Vec<StateField>,
}

impl LoEstimator {
    pub fn new(
        data: &RomSystem,
        reference: &RomSystem,
        ref_states: &[StateField],
        epsilon: f64,
    ) -> Result<Self> {
        if data.wavenumbers != reference.wavenumbers {
            return Err(Error::Invalid("data and reference ROMs use different wavenumbers".into()));
        }
        check_states(ref_states, data.dim())?;
        let data_factor = rom_lanczos(data, epsilon)?;
        let ref_factor = rom_lanczos(reference, epsilon)?;
        let r = data_factor.rank().min(ref_factor.rank());
        if data_factor.rank() != ref_factor.rank() {
            log::info!(
                "Lanczos ranks differ (data {}, reference {}); truncating to {r}",
                data_factor.rank(),
                ref_factor.rank()
            );
        }
        let factor = data_factor.truncated(r);
        let ref_factor = ref_factor.truncated(r);

        let qa = factor.q.adjoint();
        let reduced_b = &qa * &data.b * &factor.q;
        let reduced_f = &qa * data.f.map(|z| z.conj());
        let basis = (0..r)
            .map(|j| StateField {
                k: f64::NAN,
                values: synthesize(ref_states, &ref_factor.q.column(j).into_owned()),
            })
            .collect();
        Ok(Self {
            factor,
            reduced_b,
            reduced_f,
            basis,
        })
    }

    pub fn rank(&self) -> usize {
        self.factor.rank()
    }

    pub fn factor(&self) -> &LanczosFactor {
        &self.factor
    }

    /// Solve `(T - k^2 I - i k Q^*BQ) c = Q^* b(k)` and synthesize in the reference basis.
    pub fn estimate(&self, k: f64) -> Result<StateEstimate> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::Invalid(format!("wavenumber must be positive, got {k}")));
        }
        let r = self.rank();
        let a = &self.factor.t - CMat::identity(r, r) * c(k * k, 0.0) - &self.reduced_b * c(0.0, k);
        let rhs = &self.reduced_f * c(0.0, -2.0 * k);
        let coef = linalg::solve_square(&a, &rhs, k)?;
        Ok(StateEstimate {
            k,
            values: synthesize(&self.basis, &coef),
            method: Method::Lo,
            coefficients: coef,
        })
    }
}

pub fn lo_estimate(
    data: &RomSystem,
    reference: &RomSystem,
    ref_states: &[StateField],
    epsilon: f64,
    k: f64,
) -> Result<StateEstimate> {
    LoEstimator::new(data, reference, ref_states, epsilon)?.estimate(k)
}

/// DA estimator: least squares on the ROM rows stacked with the weighted
/// boundary-data rows, synthesized in the reference snapshots.
#[derive(Debug, Clone)]
pub struct DaEstimator<'a> {
    data: &'a RomSystem,
    ref_f: Vec<Complex64>,
    ref_g: Vec<Complex64>,
    ref_states: &'a [StateField],
    rho: f64,
}

impl<'a> DaEstimator<'a> {
    pub fn new(
        data: &'a RomSystem,
        ref_spectrum: &BoundarySpectrum,
        ref_states: &'a [StateField],
        rho: f64,
    ) -> Result<Self> {
        if !(rho >= 0.0 && rho.is_finite()) {
            return Err(Error::Invalid(format!("rho must be nonnegative, got {rho}")));
        }
        if ref_spectrum.wavenumbers != data.wavenumbers {
            return Err(Error::Invalid("reference spectrum uses different wavenumbers".into()));
        }
        check_states(ref_states, data.dim())?;
        Ok(Self {
            data,
            ref_f: ref_spectrum.f.clone(),
            ref_g: ref_spectrum.g.clone(),
            ref_states,
            rho,
        })
    }

    /// The stacked `(m + 2) x m` system and right-hand side at `k`.
    pub fn stacked_system(&self, k: f64, fk: Complex64, gk: Complex64) -> (CMat, CVec) {
        let m = self.data.dim();
        let top = self.data.system_matrix(k);
        let rho = c(self.rho, 0.0);
        let mut a = CMat::zeros(m + 2, m);
        a.view_mut((0, 0), (m, m)).copy_from(&top);
        for i in 0..m {
            a[(m, i)] = rho * self.ref_f[i];
            a[(m + 1, i)] = rho * self.ref_g[i];
        }
        let mut b = CVec::zeros(m + 2);
        b.rows_mut(0, m).copy_from(&self.data.rhs(k));
        b[m] = rho * fk;
        b[m + 1] = rho * gk;
        (a, b)
    }

    pub fn estimate(&self, k: f64, fk: Complex64, gk: Complex64) -> Result<StateEstimate> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::Invalid(format!("wavenumber must be positive, got {k}")));
        }
        let (a, b) = self.stacked_system(k, fk, gk);
        let (coef, rank) = linalg::lstsq_min_norm(&a, &b, DA_RANK_TOL);
        if rank < a.ncols() {
            log::warn!("DA system at k = {k} is rank deficient ({rank} < {}); using minimum-norm solution", a.ncols());
        }
        Ok(StateEstimate {
            k,
            values: synthesize(self.ref_states, &coef),
            method: Method::Da,
            coefficients: coef,
        })
    }
}

#[allow(clippy::too_many_arguments)]
pub fn da_estimate(
    data: &RomSystem,
    ref_spectrum: &BoundarySpectrum,
    ref_states: &[StateField],
    rho: f64,
    k: f64,
    fk: Complex64,
    gk: Complex64,
) -> Result<StateEstimate> {
    DaEstimator::new(data, ref_spectrum, ref_states, rho)?.estimate(k, fk, gk)
}

/// The reference state itself.
pub fn born_estimate(ref_states: &[StateField], index: usize) -> Result<StateEstimate> {
    tagged(ref_states, index, Method::Born)
}

/// The true state, for the ideal benchmark.
pub fn true_estimate(states: &[StateField], index: usize) -> Result<StateEstimate> {
    tagged(states, index, Method::True)
}

fn tagged(states: &[StateField], index: usize, method: Method) -> Result<StateEstimate> {
    let s = states
        .get(index)
        .ok_or_else(|| Error::Invalid(format!("no state with index {index}")))?;
    let mut coef = CVec::zeros(states.len());
    coef[index] = c(1.0, 0.0);
    Ok(StateEstimate {
        k: s.k,
        values: s.values.clone(),
        method,
        coefficients: coef,
    })
}
