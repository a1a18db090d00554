//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`). Every criterion is evaluated
//! and reported; the process exits nonzero on a FAIL only when
//! `ACCEPTANCE_STRICT=1` is set.

use std::time::Instant;

use rominv::app::{self, Command};
use rominv::config::ConfigFile;
use rominv::estimation::{rom_lanczos, Method};
use rominv::experiment::{
    parameter_sweep, powers_of_ten, run_trial, ExperimentConfig, Metric, MonteCarloSummary, Prepared,
};
use rominv::forward::{generate_spectrum, generate_spectrum_with_states};
use rominv::grid::SpatialGrid;
use rominv::inversion::{assemble_kernel, TikhonovSolver};
use rominv::lanczos::{orthonormality_defect, tridiagonality_defect};
use rominv::linalg::{hermitian_defect, hermitian_part};
use rominv::manifest::{RunManifest, MANIFEST_NAME};
use rominv::potential::PotentialModel;
use rominv::rom::{assemble_direct, assemble_from_data, RomCheck};

const LADDER: [f64; 4] = [1e-6, 1e-5, 1e-4, 1e-3];
const TRIALS: usize = 100;

struct Report {
    passed: usize,
    failed: Vec<usize>,
}

impl Report {
    fn line(&mut self, id: usize, name: &str, ok: bool, detail: String) {
        println!("[{}] {id:>2}. {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        if ok {
            self.passed += 1;
        } else {
            self.failed.push(id);
        }
    }
}

fn default_setup() -> (SpatialGrid, PotentialModel, Vec<f64>) {
    let cfg = ExperimentConfig::default();
    (SpatialGrid::new(cfg.grid_cells).unwrap(), cfg.truth.clone(), cfg.wavenumbers())
}

fn criterion_1_2_3(r: &mut Report) {
    let t = Instant::now();
    let (grid, q, ks) = default_setup();
    let (spec, states) = generate_spectrum_with_states(&q, &ks, &grid).unwrap();
    let data = assemble_from_data(&spec).unwrap();
    let direct = assemble_direct(&states, &q, &grid).unwrap();
    let check = RomCheck::new(&data, &direct).unwrap();
    let secs = t.elapsed().as_secs_f64();
    r.line(
        1,
        "data-driven ROM vs quadrature oracle (S, M rel. Frobenius < 1e-6, < 5 s)",
        check.s_deviation < 1e-6 && check.m_deviation < 1e-6 && secs < 5.0,
        format!("S {:.2e}, M {:.2e}, {secs:.2} s", check.s_deviation, check.m_deviation),
    );
    r.line(
        2,
        "interpolation max_j |c(k_j) - e_j|_inf < 1e-8",
        check.interpolation_deviation < 1e-8,
        format!(
            "{:.2e} (column residual |A e_j - b|/|b| = {:.2e}; M min/max eigenvalue {:.1e})",
            check.interpolation_deviation, check.interpolation_residual, check.m_eigen_ratio
        ),
    );
    let b_min = hermitian_part(&data.b)
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let b_scale = data.b.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let ok = check.s_hermitian_defect < 1e-10
        && check.m_hermitian_defect < 1e-10
        && hermitian_defect(&data.b) < 1e-10
        && b_min >= -1e-12 * b_scale
        && check.b_singular_ratio < 1e-12;
    r.line(
        3,
        "structural invariants (Hermitian < 1e-10; B PSD, sigma3/sigma1 < 1e-12)",
        ok,
        format!(
            "S {:.1e}, M {:.1e}, B {:.1e}, B min eig {:.1e}, sigma3/sigma1 {:.1e}",
            check.s_hermitian_defect, check.m_hermitian_defect, check.b_hermitian_defect, b_min, check.b_singular_ratio
        ),
    );
}

fn criterion_4(r: &mut Report) {
    let (grid, q, ks) = default_setup();
    let data = assemble_from_data(&generate_spectrum(&q, &ks, &grid).unwrap()).unwrap();
    let mut worst: f64 = 0.0;
    let mut parts = vec![];
    for eps in [1e-3, 1e-2, 1e-1] {
        let f = rom_lanczos(&data, eps).unwrap();
        let orth = orthonormality_defect(&f, &data.m);
        let (off, band) = tridiagonality_defect(&f, &data.s);
        worst = worst.max(orth).max(off).max(band);
        parts.push(format!("eps {eps:e}: rank {}, {:.1e}/{:.1e}/{:.1e}", f.rank(), orth, off, band));
    }
    r.line(4, "Lanczos contract to 1e-8", worst < 1e-8, parts.join("; "));
}

fn criterion_5(r: &mut Report) {
    let mut cfg = ExperimentConfig::default();
    cfg.reference = cfg.truth.clone();
    cfg.sigma = 0.0;
    cfg.method = Method::Da;
    let p = Prepared::new(&cfg).unwrap();
    let da = run_trial(&p, 0).unwrap().state_error;
    cfg.method = Method::Lo;
    cfg.epsilon = 1e-12;
    let lo = run_trial(&p.with_config(&cfg).unwrap(), 0).unwrap().state_error;
    r.line(
        5,
        "self-reference state errors < 1e-6",
        da < 1e-6 && lo < 1e-6,
        format!("DA {da:.2e}, LO (eps 1e-12) {lo:.2e}"),
    );
}

fn criterion_6(r: &mut Report) {
    let (grid, q, ks) = default_setup();
    let spec = generate_spectrum(&q, &ks, &grid).unwrap();
    let d = 1e-4;
    let plus = generate_spectrum(&q, &ks.iter().map(|k| k + d).collect::<Vec<_>>(), &grid).unwrap();
    let minus = generate_spectrum(&q, &ks.iter().map(|k| k - d).collect::<Vec<_>>(), &grid).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..ks.len() {
        let fd_f = (plus.f[i] - minus.f[i]) / (2.0 * d);
        let fd_g = (plus.g[i] - minus.g[i]) / (2.0 * d);
        worst = worst
            .max((spec.fprime[i] - fd_f).norm() / fd_f.norm())
            .max((spec.gprime[i] - fd_g).norm() / fd_g.norm());
    }
    r.line(6, "sensitivity vs centered differences < 1e-5", worst < 1e-5, format!("worst relative {worst:.2e}"));
}

/// Tuned Monte Carlo summaries for one method at one noise level.
struct Tuned {
    by_state: MonteCarloSummary,
    by_potential: MonteCarloSummary,
}

fn tuned(base: &Prepared, method: Method, sigma: f64, trials: usize) -> Tuned {
    let mut cfg = base.config.clone();
    cfg.method = method;
    cfg.sigma = sigma;
    cfg.trials = trials;
    let p = base.with_config(&cfg).unwrap();
    let grid = powers_of_ten(-4, 1);
    let s = parameter_sweep(&p, &grid, &grid).unwrap();
    Tuned {
        by_state: s.best(Metric::State).unwrap().clone(),
        by_potential: s.best(Metric::Potential).unwrap().clone(),
    }
}

fn pooled_se(a: &MonteCarloSummary, b: &MonteCarloSummary) -> f64 {
    let sa = a.potential_error.standard_error(a.successes);
    let sb = b.potential_error.standard_error(b.successes);
    (sa * sa + sb * sb).sqrt()
}

fn criteria_7_to_10(r: &mut Report) {
    let base = Prepared::new(&ExperimentConfig::default()).unwrap();
    let t = Instant::now();
    let ladder: Vec<(f64, Tuned, Tuned)> = LADDER
        .iter()
        .map(|&s| (s, tuned(&base, Method::Lo, s, TRIALS), tuned(&base, Method::Da, s, TRIALS)))
        .collect();
    let secs = t.elapsed().as_secs_f64();

    let mut ok = secs < 600.0;
    let mut parts = vec![];
    for (s, lo, da) in &ladder {
        let (u_lo, u_da) = (lo.by_state.state_error.mean, da.by_state.state_error.mean);
        ok &= u_da < u_lo / 5.0;
        parts.push(format!("{s:e}: DA {u_da:.2e} / LO {u_lo:.2e} = {:.2}", u_da / u_lo));
    }
    r.line(
        7,
        "method ordering, mean DA u-error < mean LO u-error / 5",
        ok,
        format!("{} ({secs:.0} s)", parts.join("; ")),
    );

    // 8: sigma = 0, alpha tuned per method
    let zero: Vec<(Method, f64)> = [Method::True, Method::Da, Method::Born]
        .into_iter()
        .map(|m| (m, tuned(&base, m, 0.0, 1).by_potential.potential_error.mean))
        .collect();
    let (t_err, d_err, b_err) = (zero[0].1, zero[1].1, zero[2].1);
    r.line(
        8,
        "benchmark ordering q(TRUE) <= q(DA) < q(BORN) at sigma = 0",
        t_err <= d_err && d_err < b_err,
        format!("TRUE {t_err:.4e}, DA {d_err:.4e}, BORN {b_err:.4e}"),
    );

    let mut ok = true;
    let mut parts = vec![];
    for (name, pick) in [("LO", 0usize), ("DA", 1)] {
        let rows: Vec<&MonteCarloSummary> = ladder
            .iter()
            .map(|(_, lo, da)| if pick == 0 { &lo.by_potential } else { &da.by_potential })
            .collect();
        let mut worst_drop = f64::NEG_INFINITY;
        for w in rows.windows(2) {
            let drop = (w[0].potential_error.mean - w[1].potential_error.mean) / pooled_se(w[0], w[1]);
            worst_drop = worst_drop.max(drop);
        }
        ok &= worst_drop <= 2.0;
        let means: Vec<String> = rows.iter().map(|s| format!("{:.4e}", s.potential_error.mean)).collect();
        parts.push(format!("{name} [{}] largest drop {worst_drop:.1} SE", means.join(", ")));
    }
    r.line(9, "noise monotonicity of mean q-error (within 2 pooled SE)", ok, parts.join("; "));

    let (_, lo, da) = ladder.iter().find(|(s, _, _)| *s == 1e-4).unwrap();
    let (s_lo, s_da) = (lo.by_potential.potential_error.std, da.by_potential.potential_error.std);
    r.line(
        10,
        "DA stability at sigma = 1e-4, std q(DA) < std q(LO) / 10",
        s_da < s_lo / 10.0,
        format!("DA {s_da:.2e}, LO {s_lo:.2e}, ratio {:.2}", s_da / s_lo),
    );
}

fn criterion_11(r: &mut Report) {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ConfigFile::default();
    cfg.noise.sigma = 1e-3;
    cfg.experiment.trials = 8;
    cfg.study.sigmas = vec![1e-4];
    cfg.study.state_parameters = vec![1e-2, 1e-1];
    cfg.study.alphas = vec![1e-4, 1e-3];
    let mut ok = true;
    let mut parts = vec![];
    for cmd in [Command::Forward, Command::Invert, Command::Mc, Command::Sweep, Command::Romcheck] {
        let a = app::run(cmd, &cfg, &dir.path().join(format!("{}_a", cmd.as_str()))).unwrap();
        let b = app::run(cmd, &cfg, &dir.path().join(format!("{}_b", cmd.as_str()))).unwrap();
        let manifest = RunManifest::read(&a.dir.join(MANIFEST_NAME)).unwrap();
        let rerun_cfg = ConfigFile::load(&a.dir.join(MANIFEST_NAME)).unwrap();
        let c = app::run(cmd, &rerun_cfg, &dir.path().join(format!("{}_c", cmd.as_str()))).unwrap();
        let same = a.manifest.files == b.manifest.files && manifest.files == c.manifest.files;
        ok &= same;
        parts.push(format!("{} {}", cmd.as_str(), if same { "ok" } else { "differs" }));
    }
    r.line(11, "determinism and manifest round-trip (digest-identical)", ok, parts.join(", "));
}

fn criterion_12(r: &mut Report) {
    let mut cfg = ExperimentConfig::default();
    cfg.sigma = 0.0;
    let p = Prepared::new(&cfg).unwrap();
    let (data, est) = rominv::experiment::estimate_states(&p, Method::Da, cfg.rho, 0).unwrap();
    let kernel = assemble_kernel(&p.ref_states, &est, &data, &p.ref_spectrum, &cfg.basis, &p.grid).unwrap();
    let solver = TikhonovSolver::new(&kernel);

    let mut zero = kernel.clone();
    zero.rhs.iter_mut().for_each(|z| *z = rominv::linalg::c(0.0, 0.0));
    let zero_ok = TikhonovSolver::new(&zero)
        .coefficients(1e-3)
        .unwrap()
        .iter()
        .all(|&x| x == 0.0);

    let alphas = powers_of_ten(-4, 2);
    let mut norms = vec![];
    let mut misfits = vec![];
    for &a in &alphas {
        let x = solver.coefficients(a).unwrap();
        norms.push(x.iter().map(|v| v * v).sum::<f64>().sqrt());
        misfits.push(kernel.misfit(&x));
    }
    let tol = 1e-12;
    let norm_ok = norms.windows(2).all(|w| w[1] <= w[0] * (1.0 + tol));
    let misfit_ok = misfits.windows(2).all(|w| w[1] >= w[0] * (1.0 - tol));
    r.line(
        12,
        "Tikhonov: rhs = 0 gives 0; |q| nonincreasing, misfit nondecreasing in alpha",
        zero_ok && norm_ok && misfit_ok,
        format!(
            "zero rhs {zero_ok}; |q| {:.3e} -> {:.3e}; misfit {:.3e} -> {:.3e}",
            norms[0],
            norms[norms.len() - 1],
            misfits[0],
            misfits[misfits.len() - 1]
        ),
    );
}

fn main() {
    // the harness passes filter arguments; this suite always runs in full
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let t = Instant::now();
    let mut r = Report {
        passed: 0,
        failed: vec![],
    };
    criterion_1_2_3(&mut r);
    criterion_4(&mut r);
    criterion_5(&mut r);
    criterion_6(&mut r);
    criteria_7_to_10(&mut r);
    criterion_11(&mut r);
    criterion_12(&mut r);
    println!(
        "acceptance: {} passed, {} failed {:?} ({:.0} s)",
        r.passed,
        r.failed.len(),
        r.failed,
        t.elapsed().as_secs_f64()
    );
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && !r.failed.is_empty() {
        std::process::exit(1);
    }
}
