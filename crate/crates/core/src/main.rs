use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use edgealloc::runner::{self, ExperimentConfig, OUTPUT_DIR_ENV};

#[derive(Parser)]
#[command(
    name = "edgealloc",
    version,
    about = "Online primal-dual edge resource allocation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a TOML config (or a previous run's manifest.json).
    Run {
        config: PathBuf,
        /// Output directory; overrides the config.
        #[arg(long, short, env = OUTPUT_DIR_ENV)]
        output: Option<PathBuf>,
    },
    /// Solve only the static and per-slot benchmarks of a config.
    SolveBench {
        config: PathBuf,
        #[arg(long, short, env = OUTPUT_DIR_ENV)]
        output: Option<PathBuf>,
    },
    /// Re-check the regret and fit guarantees on an existing run directory.
    CheckBounds { run_dir: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load(path: &Path) -> anyhow::Result<ExperimentConfig> {
    ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Run { config, output } => {
            let cfg = load(&config)?;
            let dir = runner::output_dir(&cfg, output.as_deref());
            let results = runner::run_experiment(&cfg)?;
            runner::emit_results(&results, &dir)?;
            let m = &results.manifest;
            log::info!(
                "sigma {:.4e} (floor {:.4e}), eta {:.4e}; {} benchmark solves, max violation {:.2e}",
                m.sigma,
                m.sigma_floor,
                m.eta,
                results.solver.solves,
                results.solver.max_violation
            );
            let failed = results
                .bounds
                .iter()
                .filter(|r| {
                    r.algorithm == edgealloc::baselines::Algorithm::Cooperative && !r.satisfied()
                })
                .count();
            if failed > 0 {
                log::warn!("{failed} cooperative replays exceed a guarantee");
            }
            println!("{}", dir.display());
        }
        Command::SolveBench { config, output } => {
            let cfg = load(&config)?;
            let dir = runner::output_dir(&cfg, output.as_deref());
            let rows = runner::solve_bench(&cfg, &dir)?;
            let bad = rows.iter().filter(|r| !r.converged).count();
            log::info!("{} solves, {bad} not converged", rows.len());
            println!("{}", dir.display());
        }
        Command::CheckBounds { run_dir } => {
            let check = runner::check_bounds(&run_dir)?;
            for r in &check.failures {
                println!(
                    "FAIL seed {} T {}: static {:?} <= {:?}, dynamic {} <= {:?}, fit {} <= {:?}",
                    r.seed, r.t, r.static_regret, r.u_sr, r.dynamic_regret, r.u_dr, r.fit, r.u_f
                );
            }
            println!(
                "{} rows checked, {} skipped, {} failed",
                check.checked,
                check.skipped,
                check.failures.len()
            );
            if !check.passed() {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
