//! Galerkin reduced-order model on the span of the solution snapshots.
//!
//! The Gram matrices
//!
//! ```text
//! S_ij = <u_j', u_i'> + <q u_j, u_i>,   M_ij = <u_j, u_i>,
//! B_ij = f_j conj(f_i) + g_j conj(g_i)
//! ```
//!
//! are computable from the boundary data alone ([`assemble_from_data`]); the
//! quadrature route ([`assemble_direct`]) needs the states and serves as the
//! check.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::forward::{boundary_trace, BoundarySpectrum, StateField};
use crate::grid::SpatialGrid;
use crate::linalg::{self, c, CMat, CVec};
use crate::potential::PotentialModel;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Relative spacing below which two wavenumbers count as coincident.
pub const COINCIDENT_TOL: f64 = 1e-8;

/// Quadrature Gram matrices may be asymmetric by at most this much before
/// being symmetrized.
pub const DIRECT_ASYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct RomSystem {
    pub s: CMat,
    pub m: CMat,
    pub b: CMat,
    pub f: CVec,
    pub g: CVec,
    pub wavenumbers: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RomCoefficients {
    pub k: f64,
    pub c: CVec,
}

/// `B_ij = f_j conj(f_i) + g_j conj(g_i)`.
pub fn boundary_gram(f: &CVec, g: &CVec) -> CMat {
    let m = f.len();
    CMat::from_fn(m, m, |i, j| f[j] * f[i].conj() + g[j] * g[i].conj())
}

impl RomSystem {
    pub fn dim(&self) -> usize {
        self.wavenumbers.len()
    }

    /// `b(k) = -2 i k conj(f)`.
    pub fn rhs(&self, k: f64) -> CVec {
        self.f.map(|fi| -2.0 * I * k * fi.conj())
    }

    /// `S - k^2 M - i k B`.
    pub fn system_matrix(&self, k: f64) -> CMat {
        &self.s - &self.m * c(k * k, 0.0) - &self.b * c(0.0, k)
    }

    /// Invariant report: Hermitian defects of S and M, and B's structure.
    pub fn check_invariants(&self, tol: f64) -> Result<()> {
        for (name, mat) in [("S", &self.s), ("M", &self.m), ("B", &self.b)] {
            let d = linalg::hermitian_defect(mat);
            if d > tol {
                return Err(Error::Invalid(format!("{name} is not Hermitian (defect {d:e})")));
            }
        }
        Ok(())
    }
}

/// Data-driven assembly from boundary data and their k-derivatives.
///
/// Off-diagonal entries come from pairing the weak forms at `k_i` and `k_j`;
/// diagonal entries are the limits `k_i -> k_j`:
///
/// ```text
/// M_jj = W_j - Im f_j' + Im f_j / k_j
/// S_jj = k_j^2 M_jj - 2 k_j Im f_j
/// W_j  = Re f Im f' - Im f Re f' + Re g Im g' - Im g Re g'   (at k_j)
/// ```
pub fn assemble_from_data(spec: &BoundarySpectrum) -> Result<RomSystem> {
    spec.validate()?;
    let ks = &spec.wavenumbers;
    let m = ks.len();
    let kmax = ks.iter().cloned().fold(0.0, f64::max);
    for i in 0..m {
        for j in (i + 1)..m {
            if (ks[i] - ks[j]).abs() < COINCIDENT_TOL * kmax {
                return Err(Error::Invalid(format!(
                    "wavenumbers {} and {} are too close to separate",
                    ks[i], ks[j]
                )));
            }
        }
    }
    let f = CVec::from_column_slice(&spec.f);
    let g = CVec::from_column_slice(&spec.g);
    let b = boundary_gram(&f, &g);

    let mut s_mat = CMat::zeros(m, m);
    let mut m_mat = CMat::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            let (ki, kj) = (ks[i], ks[j]);
            if i == j {
                let (fj, gj) = (spec.f[j], spec.g[j]);
                let (fp, gp) = (spec.fprime[j], spec.gprime[j]);
                let w = fj.re * fp.im - fj.im * fp.re + gj.re * gp.im - gj.im * gp.re;
                let mjj = w - fp.im + fj.im / kj;
                m_mat[(j, j)] = c(mjj, 0.0);
                s_mat[(j, j)] = c(kj * kj * mjj - 2.0 * kj * fj.im, 0.0);
            } else {
                let dk = ki - kj;
                let dk2 = ki * ki - kj * kj;
                let fj = f[j];
                let fi_bar = f[i].conj();
                m_mat[(i, j)] = I * (b[(i, j)] / dk - 2.0 * (ki * fj + kj * fi_bar) / dk2);
                s_mat[(i, j)] = I
                    * (ki * kj * b[(i, j)] / dk
                        - 2.0 * (kj * kj * ki * fj + ki * ki * kj * fi_bar) / dk2);
            }
        }
    }
    Ok(RomSystem {
        s: s_mat,
        m: m_mat,
        b,
        f,
        g,
        wavenumbers: ks.clone(),
    })
}

/// Gram matrices by quadrature of the solved states: cell-wise differences
/// for `<u_j', u_i'>`, trapezoid rule for the mass and potential terms.
pub fn assemble_direct(
    states: &[StateField],
    q: &PotentialModel,
    grid: &SpatialGrid,
) -> Result<RomSystem> {
    if states.is_empty() {
        return Err(Error::Invalid("no states to assemble".into()));
    }
    for u in states {
        u.check_grid(grid)?;
    }
    let m = states.len();
    let h = grid.spacing();
    let w = grid.trapezoid_weights();
    let qv = q.evaluate(grid);
    let diffs: Vec<Vec<Complex64>> = states
        .iter()
        .map(|u| u.values.windows(2).map(|p| p[1] - p[0]).collect())
        .collect();

    let mut s_mat = CMat::zeros(m, m);
    let mut m_mat = CMat::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            let (ui, uj) = (&states[i].values, &states[j].values);
            let mut mass = c(0.0, 0.0);
            let mut pot = c(0.0, 0.0);
            for n in 0..ui.len() {
                let p = uj[n] * ui[n].conj();
                mass += p * w[n];
                pot += p * (w[n] * qv[n]);
            }
            let stiff: Complex64 = diffs[j]
                .iter()
                .zip(&diffs[i])
                .map(|(dj, di)| dj * di.conj())
                .sum::<Complex64>()
                / h;
            m_mat[(i, j)] = mass;
            s_mat[(i, j)] = stiff + pot;
        }
    }
    for (name, mat) in [("S", &s_mat), ("M", &m_mat)] {
        let d = linalg::hermitian_defect(mat);
        if d >= DIRECT_ASYMMETRY_TOL {
            return Err(Error::Invalid(format!("quadrature {name} asymmetric by {d:e}")));
        }
    }
    let s_mat = linalg::hermitian_part(&s_mat);
    let m_mat = linalg::hermitian_part(&m_mat);
    let (f, g): (Vec<_>, Vec<_>) = states.iter().map(boundary_trace).unzip();
    let f = CVec::from_vec(f);
    let g = CVec::from_vec(g);
    Ok(RomSystem {
        s: s_mat,
        m: m_mat,
        b: boundary_gram(&f, &g),
        f,
        g,
        wavenumbers: states.iter().map(|u| u.k).collect(),
    })
}

/// Solve `(S - k^2 M - i k B) c = b(k)`.
pub fn rom_solve(rom: &RomSystem, k: f64) -> Result<RomCoefficients> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::Invalid(format!("wavenumber must be positive, got {k}")));
    }
    let a = rom.system_matrix(k);
    let b = rom.rhs(k);
    let coef = linalg::solve_square(&a, &b, k)?;
    let resid = (&a * &coef - &b).norm();
    if !(resid <= 1e-10 * b.norm().max(f64::MIN_POSITIVE)) {
        log::warn!("ROM solve at k = {k}: residual {resid:e} relative to |b| = {:e}", b.norm());
    }
    Ok(RomCoefficients { k, c: coef })
}

/// Boundary data at `k` interpolated through the ROM coefficients.
pub fn interpolate_data(rom: &RomSystem, k: f64) -> Result<(Complex64, Complex64)> {
    let coef = rom_solve(rom, k)?;
    Ok((coef.c.dot(&rom.f), coef.c.dot(&rom.g)))
}

/// Relative Frobenius deviation `|A - B|_F / |B|_F`.
pub fn relative_deviation(a: &CMat, reference: &CMat) -> f64 {
    linalg::frobenius(&(a - reference)) / linalg::frobenius(reference)
}

/// Largest entrywise deviation relative to the largest reference entry.
pub fn max_entry_deviation(a: &CMat, reference: &CMat) -> f64 {
    let scale = reference.iter().map(|z| z.norm()).fold(0.0, f64::max);
    (a - reference).iter().map(|z| z.norm()).fold(0.0, f64::max) / scale
}

/// Data-driven ROM measured against the quadrature ROM, plus its structural
/// and interpolation properties.
#[derive(Debug, Clone, PartialEq)]
pub struct RomCheck {
    pub s_deviation: f64,
    pub m_deviation: f64,
    pub b_deviation: f64,
    pub s_max_entry_deviation: f64,
    pub m_max_entry_deviation: f64,
    pub s_hermitian_defect: f64,
    pub m_hermitian_defect: f64,
    pub b_hermitian_defect: f64,
    /// Third singular value of B over the first (0 when m < 3).
    pub b_singular_ratio: f64,
    /// Smallest eigenvalue of M over the largest.
    pub m_eigen_ratio: f64,
    /// `max_j |c(k_j) - e_j|_inf`
    pub interpolation_deviation: f64,
    /// `max_j |A(k_j) e_j - b(k_j)| / |b(k_j)|`
    pub interpolation_residual: f64,
}

impl RomCheck {
    pub fn new(data: &RomSystem, direct: &RomSystem) -> Result<Self> {
        if data.wavenumbers != direct.wavenumbers {
            return Err(Error::Invalid("ROMs use different wavenumbers".into()));
        }
        let m = data.dim();
        let sv = data.b.clone().svd(false, false).singular_values;
        let mut sv: Vec<f64> = sv.iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        let eig = linalg::hermitian_part(&data.m).symmetric_eigenvalues();
        let (lo, hi) = eig
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let mut interp_dev: f64 = 0.0;
        let mut interp_res: f64 = 0.0;
        for (j, &k) in data.wavenumbers.iter().enumerate() {
            let mut e = CVec::zeros(m);
            e[j] = c(1.0, 0.0);
            let rhs = data.rhs(k);
            interp_res = interp_res.max((data.system_matrix(k) * &e - &rhs).norm() / rhs.norm());
            let coef = rom_solve(data, k)?;
            interp_dev = interp_dev.max((coef.c - e).iter().map(|z| z.norm()).fold(0.0, f64::max));
        }
        Ok(Self {
            s_deviation: relative_deviation(&data.s, &direct.s),
            m_deviation: relative_deviation(&data.m, &direct.m),
            b_deviation: relative_deviation(&data.b, &direct.b),
            s_max_entry_deviation: max_entry_deviation(&data.s, &direct.s),
            m_max_entry_deviation: max_entry_deviation(&data.m, &direct.m),
            s_hermitian_defect: linalg::hermitian_defect(&data.s),
            m_hermitian_defect: linalg::hermitian_defect(&data.m),
            b_hermitian_defect: linalg::hermitian_defect(&data.b),
            b_singular_ratio: if sv.len() >= 3 { sv[2] / sv[0] } else { 0.0 },
            m_eigen_ratio: lo / hi,
            interpolation_deviation: interp_dev,
            interpolation_residual: interp_res,
        })
    }

    /// `(name, value)` pairs in report order.
    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("s_rel_frobenius", self.s_deviation),
            ("m_rel_frobenius", self.m_deviation),
            ("b_rel_frobenius", self.b_deviation),
            ("s_max_entry", self.s_max_entry_deviation),
            ("m_max_entry", self.m_max_entry_deviation),
            ("s_hermitian_defect", self.s_hermitian_defect),
            ("m_hermitian_defect", self.m_hermitian_defect),
            ("b_hermitian_defect", self.b_hermitian_defect),
            ("b_singular_ratio_3_1", self.b_singular_ratio),
            ("m_eigen_ratio_min_max", self.m_eigen_ratio),
            ("interpolation_max_deviation", self.interpolation_deviation),
            ("interpolation_column_residual", self.interpolation_residual),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{generate_spectrum_with_states, interior_wavenumbers};

    fn default_setup(m: usize) -> (SpatialGrid, PotentialModel, BoundarySpectrum, Vec<StateField>) {
        let grid = SpatialGrid::new(1000).unwrap();
        let q = PotentialModel::default_truth();
        let ks = interior_wavenumbers(m, 10.0);
        let (spec, states) = generate_spectrum_with_states(&q, &ks, &grid).unwrap();
        (grid, q, spec, states)
    }

    /// Free-space mass Gram entry by closed form: int_0^1 exp(i (kj - ki) x) dx.
    fn free_mass(ki: f64, kj: f64) -> Complex64 {
        let d = kj - ki;
        if d == 0.0 {
            c(1.0, 0.0)
        } else {
            ((I * d).exp() - 1.0) / (I * d)
        }
    }

    #[test]
    fn free_space_gram_matches_closed_form() {
        let grid = SpatialGrid::new(1000).unwrap();
        let q = PotentialModel::zero();
        let ks = [1.0, 2.0];
        let (spec, states) = generate_spectrum_with_states(&q, &ks, &grid).unwrap();
        let data = assemble_from_data(&spec).unwrap();
        let direct = assemble_direct(&states, &q, &grid).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let exact = free_mass(ks[i], ks[j]);
                assert!((data.m[(i, j)] - exact).norm() < 1e-5, "data M{i}{j}");
                assert!((direct.m[(i, j)] - exact).norm() < 1e-5, "direct M{i}{j}");
                // <u_j', u_i'> = ki kj <u_j, u_i> in free space
                let s_exact = exact * (ks[i] * ks[j]);
                assert!((data.s[(i, j)] - s_exact).norm() < 1e-4, "data S{i}{j}");
            }
        }
        assert!((data.m[(0, 0)] - 1.0).norm() < 1e-5);
    }

    #[test]
    fn single_free_state_direct_gram() {
        let grid = SpatialGrid::new(1000).unwrap();
        let q = PotentialModel::zero();
        let (_, states) = generate_spectrum_with_states(&q, &[1.0], &grid).unwrap();
        let rom = assemble_direct(&states, &q, &grid).unwrap();
        assert!((rom.m[(0, 0)] - 1.0).norm() < 1e-6);
        assert!((rom.s[(0, 0)] - 1.0).norm() < 1e-6);
    }

    #[test]
    fn data_assembly_matches_quadrature_oracle() {
        let (grid, q, spec, states) = default_setup(10);
        let data = assemble_from_data(&spec).unwrap();
        let direct = assemble_direct(&states, &q, &grid).unwrap();
        let ds = relative_deviation(&data.s, &direct.s);
        let dm = relative_deviation(&data.m, &direct.m);
        assert!(ds < 1e-6, "S deviation {ds:e}");
        assert!(dm < 1e-6, "M deviation {dm:e}");
        assert!(max_entry_deviation(&data.s, &direct.s) < 1e-6);
    }

    #[test]
    fn alternative_stiffness_diagonal_disagrees_with_oracle() {
        // k^2 W - Im f' - Im f / k is not the stiffness diagonal; the oracle
        // singles out k^2 M_jj - 2 k Im f_j instead.
        let (grid, q, spec, states) = default_setup(10);
        let direct = assemble_direct(&states, &q, &grid).unwrap();
        let data = assemble_from_data(&spec).unwrap();
        let mut worst_alt: f64 = 0.0;
        for j in 0..spec.len() {
            let (f, g, fp, gp, k) = (spec.f[j], spec.g[j], spec.fprime[j], spec.gprime[j], spec.wavenumbers[j]);
            let w = f.re * fp.im - f.im * fp.re + g.re * gp.im - g.im * gp.re;
            let alt = k * k * w - fp.im - f.im / k;
            let oracle = direct.s[(j, j)].re;
            assert!((data.s[(j, j)].re - oracle).abs() < 1e-6 * oracle.abs());
            worst_alt = worst_alt.max((alt - oracle).abs() / oracle.abs());
        }
        assert!(worst_alt > 1e-1, "{worst_alt}");
    }

    #[test]
    fn structural_invariants_hold() {
        let (_, _, spec, _) = default_setup(10);
        let rom = assemble_from_data(&spec).unwrap();
        assert!(linalg::hermitian_defect(&rom.s) < 1e-10);
        assert!(linalg::hermitian_defect(&rom.m) < 1e-10);
        for j in 0..10 {
            assert_eq!(rom.m[(j, j)].im, 0.0);
            assert_eq!(rom.s[(j, j)].im, 0.0);
        }
        let sv = rom.b.clone().singular_values();
        let mut sv: Vec<f64> = sv.iter().cloned().collect();
        sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert!(sv[2] < 1e-12 * sv[0]);
        let eig_m = rom.m.clone().symmetric_eigenvalues();
        assert!(eig_m.iter().all(|&e| e > -1e-12));
    }

    #[test]
    fn coefficients_interpolate_at_measurement_wavenumbers() {
        // few, well separated wavenumbers keep the Gram matrix well conditioned
        let (_, _, spec, _) = default_setup(4);
        let rom = assemble_from_data(&spec).unwrap();
        for (j, &k) in spec.wavenumbers.iter().enumerate() {
            let coef = rom_solve(&rom, k).unwrap();
            let dev = (0..4)
                .map(|i| (coef.c[i] - if i == j { 1.0 } else { 0.0 }).norm())
                .fold(0.0, f64::max);
            assert!(dev < 1e-8, "j={j}: {dev:e}");
            let (fk, gk) = interpolate_data(&rom, k).unwrap();
            assert!((fk - spec.f[j]).norm() < 1e-8);
            assert!((gk - spec.g[j]).norm() < 1e-8);
        }
    }

    #[test]
    fn scalar_rom_matches_hand_arithmetic() {
        let grid = SpatialGrid::new(1000).unwrap();
        let (spec, _) = generate_spectrum_with_states(&PotentialModel::zero(), &[2.0], &grid).unwrap();
        let rom = assemble_from_data(&spec).unwrap();
        let k = 3.0;
        let b0 = -2.0 * I * k * rom.f[0].conj();
        let denom = rom.s[(0, 0)] - k * k * rom.m[(0, 0)] - I * k * rom.b[(0, 0)];
        let coef = rom_solve(&rom, k).unwrap();
        assert!((coef.c[0] - b0 / denom).norm() < 1e-14);
    }

    #[test]
    fn rhs_direction_is_k_independent() {
        let (_, _, spec, _) = default_setup(5);
        let rom = assemble_from_data(&spec).unwrap();
        let base = rom.f.map(|z| z.conj());
        for k in [0.3, 2.0, 7.7] {
            let r = rom.rhs(k);
            let scaled = &base * (-2.0 * I * k);
            assert!((r - scaled).norm() < 1e-14);
        }
    }

    #[test]
    fn off_grid_interpolation_tracks_forward_solver() {
        let (grid, q, spec, states) = default_setup(10);
        let rom = assemble_from_data(&spec).unwrap();
        // midway between the 5th and 6th wavenumber
        let k = 0.5 * (spec.wavenumbers[4] + spec.wavenumbers[5]);
        let truth = crate::forward::solve_bvp(&q, k, &grid).unwrap();
        let coef = rom_solve(&rom, k).unwrap();
        let recon: Vec<Complex64> = (0..grid.len())
            .map(|n| (0..10).map(|i| coef.c[i] * states[i].values[n]).sum())
            .collect();
        let num: f64 = recon.iter().zip(&truth.values).map(|(a, b)| (a - b).norm_sqr()).sum();
        let den: f64 = truth.values.iter().map(|b| b.norm_sqr()).sum();
        assert!((num / den).sqrt() < 0.05, "{}", (num / den).sqrt());
        let (fk, gk) = interpolate_data(&rom, k).unwrap();
        let (ft, gt) = boundary_trace(&truth);
        assert!((fk - ft).norm() < 0.05 * ft.norm());
        assert!((gk - gt).norm() < 0.05 * gt.norm());
    }

    #[test]
    fn coincident_wavenumbers_rejected() {
        let z = vec![c(1.0, 0.0); 2];
        let spec = BoundarySpectrum {
            wavenumbers: vec![1.0, 1.0 + 1e-12],
            f: z.clone(),
            g: z.clone(),
            fprime: z.clone(),
            gprime: z,
        };
        assert!(assemble_from_data(&spec).is_err());
    }

    #[test]
    fn non_finite_data_rejected() {
        let mut z = vec![c(1.0, 0.0); 2];
        let spec_ok = BoundarySpectrum {
            wavenumbers: vec![1.0, 2.0],
            f: z.clone(),
            g: z.clone(),
            fprime: z.clone(),
            gprime: z.clone(),
        };
        assert!(assemble_from_data(&spec_ok).is_ok());
        z[1] = c(f64::NAN, 0.0);
        let spec = BoundarySpectrum { f: z, ..spec_ok };
        assert!(assemble_from_data(&spec).is_err());
    }
}
