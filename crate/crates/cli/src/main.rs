// Tolerance checks are written as `!(x < tol)` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use floquet_lattice::Scenario;
use serde_json::json;

use crate::commands::Context;
use crate::error::CliError;
use crate::output::OutputDir;

/// Floquet spectra, dark BICs and transport in a driven lossy lattice.
#[derive(Debug, Parser)]
#[command(name = "floqlat", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long, short, global = true)]
    jobs: Option<usize>,
    /// Write into a non-empty output directory.
    #[arg(long, global = true)]
    force: bool,
    /// Verify step-size convergence by doubling before the main run.
    #[arg(long, global = true)]
    check: bool,
    /// Override a scenario key, e.g. `--set model.gamma=0.5`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Floquet spectrum and mode labels at the model point.
    Spectrum,
    /// IPR of every mode over a grid of drive strengths.
    IprMap,
    /// Time evolution from a dark BIC, a packet or a single site.
    Evolve,
    /// Packet scattering and reflectivity over loss strengths.
    Scatter,
    /// Dark-BIC decay probability over loss strengths or frequencies.
    Decay,
    /// Dark-BIC stability against an on-site nonlinearity.
    Nonlinear,
    /// Dark BICs of multimode defects.
    Multimode,
    /// High-frequency effective model and its comparison with exact results.
    Hfe,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::IprMap => "ipr-map",
            Command::Evolve => "evolve",
            Command::Scatter => "scatter",
            Command::Decay => "decay",
            Command::Nonlinear => "nonlinear",
            Command::Multimode => "multimode",
            Command::Hfe => "hfe",
        }
    }
}

/// Checks everything that can be checked without computing, so bad grids
/// or thresholds fail before any long run starts.
fn validate(command: Command, s: &Scenario) -> Result<(), CliError> {
    s.model_spec()?;
    s.steps_per_period()?;
    s.classify_params()?;
    match command {
        Command::IprMap => drop(s.gamma_norm_grid()?),
        Command::Scatter if s.run.gamma.is_some() => drop(s.gamma_grid()?),
        Command::Decay => {
            if s.omega_grid()?.is_none() {
                s.gamma_grid()?;
            }
        }
        Command::Nonlinear => drop(s.u_grid()?),
        Command::Multimode => drop(s.modes()?),
        Command::Hfe => {
            if s.run.gamma_norm.is_some() {
                s.gamma_norm_grid()?;
            }
            s.omega_grid()?;
        }
        _ => {}
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let common = cli.common;
    let config_path = common
        .config
        .ok_or_else(|| CliError::Usage("--config <FILE> is required".into()))?;
    let scenario = Scenario::from_file(&config_path, &common.overrides)?;
    validate(cli.command, &scenario)?;
    let out_path = common
        .out
        .or_else(|| scenario.output.dir.as_ref().map(PathBuf::from))
        .ok_or(CliError::NoOutput)?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = common.jobs {
        if j == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        pool = pool.num_threads(j);
    }
    let pool = pool.build().map_err(|e| CliError::Pool(e.to_string()))?;

    let mut out = OutputDir::prepare(&out_path, common.force)?;
    let started = Instant::now();
    let (check, results, warnings) = pool.install(|| -> Result<_, CliError> {
        let check = if common.check { Some(commands::check(&scenario)?) } else { None };
        let mut ctx = Context {
            scenario: &scenario,
            out: &mut out,
            warnings: Vec::new(),
        };
        let results = match cli.command {
            Command::Spectrum => commands::spectrum(&mut ctx),
            Command::IprMap => commands::ipr_map_cmd(&mut ctx),
            Command::Evolve => commands::evolve_cmd(&mut ctx),
            Command::Scatter => commands::scatter_cmd(&mut ctx),
            Command::Decay => commands::decay(&mut ctx),
            Command::Nonlinear => commands::nonlinear(&mut ctx),
            Command::Multimode => commands::multimode(&mut ctx),
            Command::Hfe => commands::hfe(&mut ctx),
        }?;
        Ok((check, results, ctx.warnings))
    })?;
    let wall = started.elapsed().as_secs_f64();

    let resolved = scenario.to_toml();
    out.write("scenario.toml", &resolved)?;
    let manifest = json!({
        "tool": "floqlat",
        "versions": {
            "floqlat": env!("CARGO_PKG_VERSION"),
            "floquet-lattice": floquet_lattice::VERSION,
        },
        "command": cli.command.name(),
        "config": config_path.display().to_string(),
        "overrides": common.overrides,
        "scenario": resolved,
        "steps_per_period": scenario.steps_per_period()?,
        "frame": scenario.frame(),
        "classify": scenario.classify_params()?,
        "threads": pool.current_num_threads(),
        "wall_time_s": wall,
        "check": check,
        "results": results,
        "warnings": warnings,
        "files": out.written(),
    });
    let body = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    out.write("manifest.json", body + "\n")?;
    eprintln!("{}: wrote {} files to {} in {wall:.1} s", cli.command.name(), out.written().len(), out.path().display());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
