use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rominv::app::{self, Command};
use rominv::config::ConfigFile;

#[derive(Parser)]
#[command(name = "rominv", version, about = "ROM-based inverse scattering for the 1D Schrodinger equation")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args)]
struct Common {
    /// TOML configuration, or a manifest from an earlier run
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `experiment.seed`
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Cmd {
    /// Boundary data and states of the true potential
    Forward(Common),
    /// One two-step inversion
    Invert(Common),
    /// Parameter sweeps over the study grid
    Sweep(Common),
    /// Monte Carlo statistics at fixed parameters
    Mc(Common),
    /// Data-driven ROM against the quadrature ROM
    Romcheck(Common),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (command, common) = match cli.command {
        Cmd::Forward(c) => (Command::Forward, c),
        Cmd::Invert(c) => (Command::Invert, c),
        Cmd::Sweep(c) => (Command::Sweep, c),
        Cmd::Mc(c) => (Command::Mc, c),
        Cmd::Romcheck(c) => (Command::Romcheck, c),
    };
    let result = common
        .config
        .as_deref()
        .map_or_else(|| Ok(ConfigFile::default()), ConfigFile::load)
        .and_then(|mut cfg| {
            if let Some(seed) = common.seed {
                cfg.set_seed(seed);
            }
            app::run(command, &cfg, &common.out)
        });
    match result {
        Ok(out) => {
            // a closed stdout (e.g. piped into `head`) is not a failure of the run
            let mut stdout = std::io::stdout().lock();
            let _ = writeln!(stdout, "{}", out.summary).and_then(|_| {
                writeln!(stdout, "wrote {} files and manifest to {}", out.files.len(), out.dir.display())
            });
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(app::exit_code(&e) as u8)
        }
    }
}
