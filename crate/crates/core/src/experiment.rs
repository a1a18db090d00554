//! The two-step inversion end to end, plus the noise and parameter studies
//! built on top of it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimation::{born_estimate, true_estimate, DaEstimator, LoEstimator, Method, StateEstimate};
use crate::forward::{
    generate_spectrum_with_states, interior_wavenumbers, right_closed_wavenumbers, BoundarySpectrum, StateField,
};
use crate::grid::SpatialGrid;
use crate::inversion::{assemble_kernel, RecoveredPotential, TikhonovSolver};
use crate::linalg::c;
use crate::potential::PotentialModel;
use crate::rom::{assemble_from_data, RomSystem};

/// How `m` equispaced wavenumbers are placed in `(0, kmax)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavenumberRule {
    /// `k_i = (i + 1) kmax / (m + 1)`: both end points excluded.
    Interior,
    /// `k_i = (i + 1) kmax / m`: `kmax` included.
    RightClosed,
}

impl WavenumberRule {
    pub fn wavenumbers(&self, m: usize, kmax: f64) -> Vec<f64> {
        match self {
            WavenumberRule::Interior => interior_wavenumbers(m, kmax),
            WavenumberRule::RightClosed => right_closed_wavenumbers(m, kmax),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            WavenumberRule::Interior => "interior",
            WavenumberRule::RightClosed => "right-closed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub m: usize,
    pub kmax: f64,
    pub wavenumber_rule: WavenumberRule,
    pub grid_cells: usize,
    pub truth: PotentialModel,
    pub reference: PotentialModel,
    /// Basis for the recovered perturbation (coefficients ignored).
    pub basis: PotentialModel,
    pub method: Method,
    pub epsilon: f64,
    pub rho: f64,
    pub alpha: f64,
    pub sigma: f64,
    /// Whether noise is also added to `f'` and `g'`.
    pub noise_on_derivatives: bool,
    pub trials: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            m: 10,
            kmax: 10.0,
            wavenumber_rule: WavenumberRule::Interior,
            grid_cells: 1000,
            truth: PotentialModel::default_truth(),
            reference: PotentialModel::zero(),
            basis: PotentialModel::piecewise_constant((0.0, 1.0), vec![0.0; 100]).expect("valid basis"),
            method: Method::Da,
            epsilon: 1e-2,
            rho: 1e-1,
            alpha: 1e-3,
            sigma: 0.0,
            noise_on_derivatives: true,
            trials: 100,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.m == 0 {
            return bad("experiment.m must be at least 1".into());
        }
        if !(self.kmax > 0.0 && self.kmax.is_finite()) {
            return bad(format!("experiment.kmax must be positive, got {}", self.kmax));
        }
        if self.grid_cells < 2 {
            return bad(format!("experiment.grid_cells must be at least 2, got {}", self.grid_cells));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!("noise.sigma must be nonnegative, got {}", self.sigma));
        }
        if self.trials == 0 {
            return bad("experiment.trials must be at least 1".into());
        }
        for (name, v) in [("experiment.epsilon", self.epsilon), ("experiment.rho", self.rho), ("experiment.alpha", self.alpha)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be nonnegative, got {v}"));
            }
        }
        if self.basis.n_basis() == 0 {
            return bad("basis: potential basis is empty".into());
        }
        Ok(())
    }

    pub fn wavenumbers(&self) -> Vec<f64> {
        self.wavenumber_rule.wavenumbers(self.m, self.kmax)
    }

    /// The state-estimation parameter of the configured method (epsilon for
    /// LO, rho for DA, unused otherwise).
    pub fn state_parameter(&self) -> f64 {
        match self.method {
            Method::Lo => self.epsilon,
            Method::Da => self.rho,
            _ => f64::NAN,
        }
    }

    pub fn with_state_parameter(&self, p: f64) -> Self {
        let mut out = self.clone();
        match self.method {
            Method::Lo => out.epsilon = p,
            Method::Da => out.rho = p,
            _ => {}
        }
        out
    }
}

/// Everything that does not depend on the noise realization.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: ExperimentConfig,
    pub grid: SpatialGrid,
    pub spectrum: BoundarySpectrum,
    pub states: Vec<StateField>,
    pub ref_spectrum: BoundarySpectrum,
    pub ref_states: Vec<StateField>,
    pub ref_rom: RomSystem,
    pub truth_values: Vec<f64>,
}

impl Prepared {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let grid = SpatialGrid::new(config.grid_cells)?;
        let ks = config.wavenumbers();
        let (spectrum, states) =
            generate_spectrum_with_states(&config.truth, &ks, &grid).map_err(|e| e.in_stage("forward (truth)"))?;
        let (ref_spectrum, ref_states) = generate_spectrum_with_states(&config.reference, &ks, &grid)
            .map_err(|e| e.in_stage("forward (reference)"))?;
        let ref_rom = assemble_from_data(&ref_spectrum).map_err(|e| e.in_stage("reference ROM"))?;
        let truth_values = config.truth.evaluate(&grid);
        Ok(Self {
            config: config.clone(),
            grid,
            spectrum,
            states,
            ref_spectrum,
            ref_states,
            ref_rom,
            truth_values,
        })
    }

    /// Same forward data, different method and parameters.
    pub fn with_config(&self, config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let same_data = config.m == self.config.m
            && config.kmax == self.config.kmax
            && config.wavenumber_rule == self.config.wavenumber_rule
            && config.grid_cells == self.config.grid_cells
            && config.truth == self.config.truth
            && config.reference == self.config.reference;
        if !same_data {
            return Self::new(config);
        }
        let mut out = self.clone();
        out.config = config.clone();
        Ok(out)
    }
}

/// Add independent `N(0, sigma^2)` noise to the real and imaginary parts of
/// every `f_i` and `g_i` (and of `f'_i`, `g'_i` when `derivatives` is set).
pub fn add_noise(spectrum: &BoundarySpectrum, sigma: f64, seed: u64, derivatives: bool) -> Result<BoundarySpectrum> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Invalid(format!("sigma must be nonnegative, got {sigma}")));
    }
    let mut out = spectrum.clone();
    if sigma == 0.0 {
        return Ok(out);
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let perturb = |v: &mut Vec<num_complex::Complex64>, rng: &mut ChaCha8Rng| {
        for z in v.iter_mut() {
            let re = normal.sample(rng);
            let im = normal.sample(rng);
            *z += c(re, im);
        }
    };
    perturb(&mut out.f, &mut rng);
    perturb(&mut out.g, &mut rng);
    if derivatives {
        perturb(&mut out.fprime, &mut rng);
        perturb(&mut out.gprime, &mut rng);
    }
    Ok(out)
}

/// `|est - truth| / |truth|`.
pub fn relative_error<T>(estimate: &[T], truth: &[T]) -> Result<f64>
where
    T: Copy + Into<num_complex::Complex64>,
{
    if estimate.len() != truth.len() {
        return Err(Error::Invalid(format!(
            "length mismatch: {} vs {}",
            estimate.len(),
            truth.len()
        )));
    }
    let den: f64 = truth.iter().map(|&t| t.into().norm_sqr()).sum();
    if den == 0.0 {
        return Err(Error::Invalid("relative error against a zero-norm truth".into()));
    }
    let num: f64 = estimate
        .iter()
        .zip(truth)
        .map(|(&e, &t)| (e.into() - t.into()).norm_sqr())
        .sum();
    Ok((num / den).sqrt())
}

/// Pooled relative L2 error over all states, plus the per-state errors.
pub fn state_errors(estimates: &[StateEstimate], truth: &[StateField]) -> Result<(f64, Vec<f64>)> {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut per = Vec::with_capacity(truth.len());
    for (e, t) in estimates.iter().zip(truth) {
        let n: f64 = e.values.iter().zip(&t.values).map(|(a, b)| (a - b).norm_sqr()).sum();
        let d: f64 = t.values.iter().map(|b| b.norm_sqr()).sum();
        if d == 0.0 {
            return Err(Error::Invalid("zero-norm true state".into()));
        }
        per.push((n / d).sqrt());
        num += n;
        den += d;
    }
    Ok(((num / den).sqrt(), per))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub seed: u64,
    pub method: Method,
    /// epsilon (LO) or rho (DA); NaN for BORN and TRUE.
    pub state_parameter: f64,
    pub alpha: f64,
    pub state_error: f64,
    pub potential_error: f64,
    pub per_wavenumber_state_errors: Vec<f64>,
}

/// Full output of one inversion, for writing figure data.
#[derive(Debug, Clone)]
pub struct TrialOutput {
    pub result: TrialResult,
    pub data: BoundarySpectrum,
    pub estimates: Vec<StateEstimate>,
    pub recovered: RecoveredPotential,
    pub recovered_values: Vec<f64>,
}

/// Step 1: noisy data and state estimates for one noise realization.
pub fn estimate_states(
    prepared: &Prepared,
    method: Method,
    state_parameter: f64,
    seed: u64,
) -> Result<(BoundarySpectrum, Vec<StateEstimate>)> {
    let cfg = &prepared.config;
    let data = add_noise(&prepared.spectrum, cfg.sigma, seed, cfg.noise_on_derivatives)?;
    let m = data.len();
    let estimates: Vec<StateEstimate> = match method {
        Method::Lo => {
            let rom = assemble_from_data(&data).map_err(|e| e.in_stage("data ROM"))?;
            let est = LoEstimator::new(&rom, &prepared.ref_rom, &prepared.ref_states, state_parameter)
                .map_err(|e| e.in_stage("Lanczos"))?;
            data.wavenumbers
                .iter()
                .map(|&k| est.estimate(k))
                .collect::<Result<_>>()
                .map_err(|e| e.in_stage("LO state estimation"))?
        }
        Method::Da => {
            let rom = assemble_from_data(&data).map_err(|e| e.in_stage("data ROM"))?;
            let est = DaEstimator::new(&rom, &prepared.ref_spectrum, &prepared.ref_states, state_parameter)
                .map_err(|e| e.in_stage("DA setup"))?;
            (0..m)
                .map(|i| est.estimate(data.wavenumbers[i], data.f[i], data.g[i]))
                .collect::<Result<_>>()
                .map_err(|e| e.in_stage("DA state estimation"))?
        }
        Method::Born => (0..m)
            .map(|i| born_estimate(&prepared.ref_states, i))
            .collect::<Result<_>>()?,
        Method::True => (0..m).map(|i| true_estimate(&prepared.states, i)).collect::<Result<_>>()?,
    };
    Ok((data, estimates))
}

/// Step 2 for several `alpha` at once: the kernel is factored a single time.
fn invert_for_alphas(
    prepared: &Prepared,
    data: &BoundarySpectrum,
    estimates: &[StateEstimate],
    alphas: &[f64],
) -> Result<Vec<(RecoveredPotential, Vec<f64>, f64)>> {
    let kernel = assemble_kernel(
        &prepared.ref_states,
        estimates,
        data,
        &prepared.ref_spectrum,
        &prepared.config.basis,
        &prepared.grid,
    )
    .map_err(|e| e.in_stage("kernel"))?;
    let solver = TikhonovSolver::new(&kernel);
    alphas
        .iter()
        .map(|&alpha| {
            let dq = solver.solve(alpha).map_err(|e| e.in_stage("Tikhonov"))?;
            let rec = RecoveredPotential {
                reference: prepared.config.reference.clone(),
                perturbation: dq,
            };
            let values = rec.evaluate(&prepared.grid);
            let err = relative_error(&values, &prepared.truth_values)?;
            Ok((rec, values, err))
        })
        .collect()
}

/// One complete inversion with full outputs.
pub fn run_trial_detailed(prepared: &Prepared, seed: u64) -> Result<TrialOutput> {
    let cfg = &prepared.config;
    let p = cfg.state_parameter();
    let (data, estimates) = estimate_states(prepared, cfg.method, p, seed)?;
    let (state_error, per) = state_errors(&estimates, &prepared.states)?;
    let (recovered, recovered_values, potential_error) = invert_for_alphas(prepared, &data, &estimates, &[cfg.alpha])?
        .pop()
        .expect("one alpha");
    Ok(TrialOutput {
        result: TrialResult {
            seed,
            method: cfg.method,
            state_parameter: p,
            alpha: cfg.alpha,
            state_error,
            potential_error,
            per_wavenumber_state_errors: per,
        },
        data,
        estimates,
        recovered,
        recovered_values,
    })
}

pub fn run_trial(prepared: &Prepared, seed: u64) -> Result<TrialResult> {
    run_trial_detailed(prepared, seed).map(|o| o.result)
}

/// Mean and standard deviation over the successful trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn from_samples(x: &[f64]) -> Self {
        if x.is_empty() {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
            };
        }
        if x.iter().all(|v| v.to_bits() == x[0].to_bits()) {
            return Self { mean: x[0], std: 0.0 };
        }
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = if x.len() > 1 {
            x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self { mean, std: var.sqrt() }
    }

    /// Standard error of the mean for `n` samples.
    pub fn standard_error(&self, n: usize) -> f64 {
        self.std / (n as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloSummary {
    pub method: Method,
    pub sigma: f64,
    pub state_parameter: f64,
    pub alpha: f64,
    pub state_error: Stat,
    pub potential_error: Stat,
    pub successes: usize,
    pub failures: usize,
    /// Diagnostic of the first failed trial, if any.
    pub first_failure: Option<String>,
}

fn seeds(base: u64, trials: usize) -> impl IndexedParallelIterator<Item = u64> {
    (0..trials).into_par_iter().map(move |i| base.wrapping_add(i as u64))
}

/// Repeat the configured trial over `trials` noise realizations with seeds
/// `seed, seed + 1, ...`.
pub fn monte_carlo(prepared: &Prepared) -> MonteCarloSummary {
    let cfg = &prepared.config;
    let results: Vec<Result<TrialResult>> = seeds(cfg.seed, cfg.trials).map(|s| run_trial(prepared, s)).collect();
    summarize(cfg, cfg.state_parameter(), cfg.alpha, &results)
}

fn summarize(
    cfg: &ExperimentConfig,
    state_parameter: f64,
    alpha: f64,
    results: &[Result<TrialResult>],
) -> MonteCarloSummary {
    let ok: Vec<&TrialResult> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
    let first_failure = results.iter().find_map(|r| r.as_ref().err().map(|e| e.to_string()));
    let se: Vec<f64> = ok.iter().map(|r| r.state_error).collect();
    let pe: Vec<f64> = ok.iter().map(|r| r.potential_error).collect();
    MonteCarloSummary {
        method: cfg.method,
        sigma: cfg.sigma,
        state_parameter,
        alpha,
        state_error: Stat::from_samples(&se),
        potential_error: Stat::from_samples(&pe),
        successes: ok.len(),
        failures: results.len() - ok.len(),
        first_failure,
    }
}

/// Monte Carlo statistics over a grid of (state parameter, alpha).
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSurface {
    pub method: Method,
    pub sigma: f64,
    /// epsilon (LO) or rho (DA); a single NaN entry for BORN and TRUE.
    pub axis1: Vec<f64>,
    /// alpha
    pub axis2: Vec<f64>,
    /// `cells[i][j]` for `axis1[i]`, `axis2[j]`.
    pub cells: Vec<Vec<MonteCarloSummary>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    State,
    Potential,
}

impl SweepSurface {
    /// Cell with the smallest mean error for `metric`; cells where every
    /// trial failed are skipped.
    pub fn argmin(&self, metric: Metric) -> Option<(usize, usize)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for (i, row) in self.cells.iter().enumerate() {
            for (j, cell) in row.iter().enumerate() {
                let v = match metric {
                    Metric::State => cell.state_error.mean,
                    Metric::Potential => cell.potential_error.mean,
                };
                if v.is_nan() {
                    continue;
                }
                if best.is_none_or(|(_, _, b)| v < b) {
                    best = Some((i, j, v));
                }
            }
        }
        best.map(|(i, j, _)| (i, j))
    }

    pub fn best(&self, metric: Metric) -> Option<&MonteCarloSummary> {
        self.argmin(metric).map(|(i, j)| &self.cells[i][j])
    }
}

/// Powers of ten `10^lo ..= 10^hi`.
pub fn powers_of_ten(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|e| format!("1e{e}").parse().expect("valid literal")).collect()
}

/// Monte Carlo over every `(axis1, axis2)` cell. For BORN and TRUE the first
/// axis is collapsed to a single entry.
pub fn parameter_sweep(prepared: &Prepared, axis1: &[f64], axis2: &[f64]) -> Result<SweepSurface> {
    if axis1.is_empty() || axis2.is_empty() {
        return Err(Error::Invalid("sweep axes must be nonempty".into()));
    }
    let cfg = &prepared.config;
    let axis1: Vec<f64> = match cfg.method {
        Method::Lo | Method::Da => axis1.to_vec(),
        Method::Born | Method::True => vec![f64::NAN],
    };
    // per (p1, trial): potential errors for every alpha and the state error
    type Row = Result<(f64, Vec<f64>)>;
    let per_p1: Vec<Vec<Row>> = axis1
        .iter()
        .map(|&p1| {
            seeds(cfg.seed, cfg.trials)
                .map(|s| -> Row {
                    let (data, est) = estimate_states(prepared, cfg.method, p1, s)?;
                    let (se, _) = state_errors(&est, &prepared.states)?;
                    let pe = invert_for_alphas(prepared, &data, &est, axis2)?
                        .into_iter()
                        .map(|(_, _, e)| e)
                        .collect();
                    Ok((se, pe))
                })
                .collect()
        })
        .collect();

    let cells = axis1
        .iter()
        .zip(&per_p1)
        .map(|(&p1, rows)| {
            axis2
                .iter()
                .enumerate()
                .map(|(j, &alpha)| {
                    let results: Vec<Result<TrialResult>> = rows
                        .iter()
                        .enumerate()
                        .map(|(t, r)| match r {
                            Ok((se, pe)) => Ok(TrialResult {
                                seed: cfg.seed.wrapping_add(t as u64),
                                method: cfg.method,
                                state_parameter: p1,
                                alpha,
                                state_error: *se,
                                potential_error: pe[j],
                                per_wavenumber_state_errors: vec![],
                            }),
                            Err(e) => Err(Error::Invalid(e.to_string())),
                        })
                        .collect();
                    summarize(cfg, p1, alpha, &results)
                })
                .collect()
        })
        .collect();
    Ok(SweepSurface {
        method: cfg.method,
        sigma: cfg.sigma,
        axis1,
        axis2: axis2.to_vec(),
        cells,
    })
}
