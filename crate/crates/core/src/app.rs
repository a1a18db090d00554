//! The command-line subcommands as library calls. Each command writes its
//! files into an output directory and finishes with a manifest.

use std::path::{Path, PathBuf};

use crate::config::ConfigFile;
use crate::error::{Error, Result};
use crate::estimation::Method;
use crate::experiment::{monte_carlo, parameter_sweep, run_trial_detailed, Metric, MonteCarloSummary, Prepared, Stat};
use crate::forward::{boundary_trace, generate_spectrum_with_states};
use crate::grid::SpatialGrid;
use crate::io;
use crate::manifest::{now_rfc3339, RunManifest};
use crate::rom::{assemble_direct, assemble_from_data, RomCheck};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Forward,
    Invert,
    Sweep,
    Mc,
    Romcheck,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Forward => "forward",
            Command::Invert => "invert",
            Command::Sweep => "sweep",
            Command::Mc => "mc",
            Command::Romcheck => "romcheck",
        }
    }
}

/// Files written by a command, relative to its output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub files: Vec<String>,
    pub manifest: RunManifest,
    /// Human-readable summary for the terminal.
    pub summary: String,
}

/// Process exit status for an error: 1 validation, 2 numerical, 3 I/O.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_io() {
        3
    } else if err.is_numerical() {
        2
    } else {
        1
    }
}

pub fn run(command: Command, config: &ConfigFile, out: &Path) -> Result<RunOutput> {
    let started = now_rfc3339();
    std::fs::create_dir_all(out).map_err(|e| Error::File {
        path: out.to_path_buf(),
        source: e,
    })?;
    let (files, summary) = match command {
        Command::Forward => forward(config, out)?,
        Command::Invert => invert(config, out)?,
        Command::Sweep => sweep(config, out)?,
        Command::Mc => mc(config, out)?,
        Command::Romcheck => romcheck(config, out)?,
    };
    let manifest = RunManifest::new(command.as_str(), config, out, &files, started)?;
    manifest.write(out)?;
    Ok(RunOutput {
        dir: out.to_path_buf(),
        files,
        manifest,
        summary,
    })
}

fn state_file(i: usize) -> String {
    format!("states_{i}.csv")
}

/// Spectrum of the configured true potential, its states and the potential.
fn forward(config: &ConfigFile, out: &Path) -> Result<(Vec<String>, String)> {
    let cfg = config.experiment_config()?;
    let grid = SpatialGrid::new(cfg.grid_cells)?;
    let (spec, states) = generate_spectrum_with_states(&cfg.truth, &cfg.wavenumbers(), &grid)?;
    let mut files = vec!["spectrum.csv".to_string()];
    io::write_spectrum(&out.join(&files[0]), &spec)?;
    for (i, u) in states.iter().enumerate() {
        let name = state_file(i);
        io::write_fields(&out.join(&name), grid.nodes(), &[("u", &u.values)])?;
        files.push(name);
    }
    files.push("potential.csv".into());
    io::write_profiles(&out.join("potential.csv"), grid.nodes(), &[("q", &cfg.truth.evaluate(&grid))])?;
    Ok((files, format!("{} wavenumbers on {} cells", spec.len(), grid.cells())))
}

/// One inversion at the configured method, parameters and seed.
fn invert(config: &ConfigFile, out: &Path) -> Result<(Vec<String>, String)> {
    let cfg = config.experiment_config()?;
    let prepared = Prepared::new(&cfg)?;
    let trial = run_trial_detailed(&prepared, cfg.seed)?;
    let grid = &prepared.grid;
    let mut files = vec![];
    for (i, (est, truth)) in trial.estimates.iter().zip(&prepared.states).enumerate() {
        let name = state_file(i);
        io::write_fields(&out.join(&name), grid.nodes(), &[("u", &est.values), ("u_true", &truth.values)])?;
        files.push(name);
    }
    io::write_profiles(
        &out.join("potential.csv"),
        grid.nodes(),
        &[("q", &trial.recovered_values), ("q_true", &prepared.truth_values)],
    )?;
    files.push("potential.csv".into());

    // data row of the figure layout: measured data and traces of the estimates
    let mut t = io::NumericTable::new(
        ["k", "f_re", "f_im", "g_re", "g_im", "f_est_re", "f_est_im", "g_est_re", "g_est_im", "u_error"]
            .map(String::from)
            .to_vec(),
    );
    for (i, est) in trial.estimates.iter().enumerate() {
        let (fe, ge) = boundary_trace(&est.as_field());
        let (f, g) = (trial.data.f[i], trial.data.g[i]);
        t.rows.push(vec![
            trial.data.wavenumbers[i],
            f.re,
            f.im,
            g.re,
            g.im,
            fe.re,
            fe.im,
            ge.re,
            ge.im,
            trial.result.per_wavenumber_state_errors[i],
        ]);
    }
    t.write(&out.join("data.csv"))?;
    files.push("data.csv".into());

    let r = &trial.result;
    let row = MonteCarloSummary {
        method: r.method,
        sigma: cfg.sigma,
        state_parameter: r.state_parameter,
        alpha: r.alpha,
        state_error: Stat { mean: r.state_error, std: 0.0 },
        potential_error: Stat { mean: r.potential_error, std: 0.0 },
        successes: 1,
        failures: 0,
        first_failure: None,
    };
    io::write_table1(&out.join("errors.csv"), &[row])?;
    files.push("errors.csv".into());
    Ok((
        files,
        format!("{}: u-error {:.4e}, q-error {:.4e}", r.method, r.state_error, r.potential_error),
    ))
}

fn study_config(config: &ConfigFile, method: Method, sigma: f64) -> Result<crate::experiment::ExperimentConfig> {
    let mut cfg = config.experiment_config()?;
    cfg.method = method;
    cfg.sigma = sigma;
    Ok(cfg)
}

fn summary_line(s: &MonteCarloSummary) -> String {
    format!(
        "sigma {:e} {:<4} ({:e}, {:e}): u {:.3e} ({:.2e})  q {:.3e} ({:.2e})  failed {}/{}",
        s.sigma,
        s.method.as_str(),
        s.state_parameter,
        s.alpha,
        s.state_error.mean,
        s.state_error.std,
        s.potential_error.mean,
        s.potential_error.std,
        s.failures,
        s.successes + s.failures
    )
}

/// Monte Carlo at the configured parameters for every study method and noise level.
fn mc(config: &ConfigFile, out: &Path) -> Result<(Vec<String>, String)> {
    let base = Prepared::new(&config.experiment_config()?)?;
    let mut rows = vec![];
    for sigma in config.sigmas()? {
        for method in config.methods()? {
            let prepared = base.with_config(&study_config(config, method, sigma)?)?;
            rows.push(monte_carlo(&prepared));
        }
    }
    io::write_table1(&out.join("table1.csv"), &rows)?;
    let summary = rows.iter().map(summary_line).collect::<Vec<_>>().join("\n");
    Ok((vec!["table1.csv".into()], summary))
}

/// Parameter sweeps for every study method and noise level; `table1.csv`
/// collects the cell with the smallest mean potential error of each sweep.
fn sweep(config: &ConfigFile, out: &Path) -> Result<(Vec<String>, String)> {
    let base = Prepared::new(&config.experiment_config()?)?;
    let (axis1, axis2) = config.axes()?;
    let mut files = vec![];
    let mut best = vec![];
    for sigma in config.sigmas()? {
        for method in config.methods()? {
            let prepared = base.with_config(&study_config(config, method, sigma)?)?;
            let surface = parameter_sweep(&prepared, &axis1, &axis2)?;
            let name = io::sweep_file_name(sigma, method);
            io::write_sweep(&out.join(&name), &surface)?;
            files.push(name);
            match surface.best(Metric::Potential) {
                Some(cell) => best.push(cell.clone()),
                None => log::warn!("every trial failed for {method} at sigma {sigma:e}"),
            }
        }
    }
    io::write_table1(&out.join("table1.csv"), &best)?;
    files.push("table1.csv".into());
    let summary = best.iter().map(summary_line).collect::<Vec<_>>().join("\n");
    Ok((files, summary))
}

/// Data-driven ROM against the quadrature ROM of the solved states.
fn romcheck(config: &ConfigFile, out: &Path) -> Result<(Vec<String>, String)> {
    let cfg = config.experiment_config()?;
    let grid = SpatialGrid::new(cfg.grid_cells)?;
    let spec = match &config.romcheck.spectrum {
        Some(p) => Some(io::read_spectrum(Path::new(p))?),
        None => None,
    };
    let ks = spec.as_ref().map_or_else(|| cfg.wavenumbers(), |s| s.wavenumbers.clone());
    let (generated, states) = generate_spectrum_with_states(&cfg.truth, &ks, &grid)?;
    let spec = spec.unwrap_or(generated);
    let data = assemble_from_data(&spec)?;
    let direct = assemble_direct(&states, &cfg.truth, &grid)?;
    let check = RomCheck::new(&data, &direct)?;

    let path = out.join("romcheck.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::File { path: path.clone(), source },
        other => Error::Invalid(format!("{other:?}")),
    })?;
    w.write_record(["quantity", "value"])?;
    for (name, v) in check.entries() {
        w.write_record([name, &io::fmt_f64(v)])?;
    }
    w.flush()?;
    io::write_rom(&out.join("rom_data.csv"), &data)?;
    io::write_rom(&out.join("rom_direct.csv"), &direct)?;
    let summary = check
        .entries()
        .iter()
        .map(|(n, v)| format!("{n:<32} {v:.3e}"))
        .collect::<Vec<_>>()
        .join("\n");
    Ok((
        vec!["romcheck.csv".into(), "rom_data.csv".into(), "rom_direct.csv".into()],
        summary,
    ))
}
