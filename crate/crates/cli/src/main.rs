use std::path::PathBuf;

use clap::{Parser, Subcommand};

use carbon_gmam_cli::commands::{
    apply_overrides, cmd_compose, cmd_path, cmd_scan, cmd_simulate, cmd_sweep,
};
use carbon_gmam_cli::{load_config, load_params, CliError, CliResult, ExperimentConfig};

/// Transition paths and quasi-potentials of the stochastic upper-ocean
/// carbonate model.
#[derive(Parser)]
#[command(name = "carbon-gmam", version, about)]
struct Cli {
    /// Experiment config (JSON); defaults apply if omitted
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory (overrides the config's output_dir)
    #[arg(long, global = true, value_name = "DIR")]
    output: Option<PathBuf>,
    /// Simulation seed (overrides the config's sim.seed)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: one per core)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Classify deterministic regimes over a c_x window
    Scan {
        #[arg(long, default_value_t = 50.0)]
        cx_min: f64,
        #[arg(long, default_value_t = 70.0)]
        cx_max: f64,
        #[arg(long, default_value_t = 41)]
        steps: usize,
    },
    /// Most probable transition path at one ν
    Path {
        #[arg(long)]
        nu: f64,
    },
    /// Transition diagnostics over the full ν grid
    Sweep {
        /// Seed each ν's solve with the previous converged path
        #[arg(long)]
        warm_start: bool,
    },
    /// Monte Carlo transition bundle and path concordance at one ν
    Simulate {
        #[arg(long)]
        nu: f64,
    },
    /// Composed pre/transition/post time series at one ν
    Compose {
        #[arg(long)]
        nu: f64,
    },
}

fn run(cli: Cli) -> CliResult<i32> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    let cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => ExperimentConfig::default(),
    };
    let cfg = apply_overrides(cfg, cli.seed, cli.output);
    cfg.validate()?;
    let params = load_params(&cfg.params_file)?;

    match cli.cmd {
        Cmd::Scan { cx_min, cx_max, steps } => cmd_scan(&cfg, &params, cx_min, cx_max, steps),
        Cmd::Path { nu } => cmd_path(&cfg, &params, nu),
        Cmd::Sweep { warm_start } => cmd_sweep(&cfg, &params, warm_start),
        Cmd::Simulate { nu } => cmd_simulate(&cfg, &params, nu),
        Cmd::Compose { nu } => cmd_compose(&cfg, &params, nu),
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
