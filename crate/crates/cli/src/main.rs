use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use evtrap_cli::{cmd_characterize, cmd_ensemble, cmd_potential, cmd_trajectory, CliError, RunConfig};

/// Simulates atom capture in a two-mode evanescent-wave cavity trap.
///
/// Exit codes: 0 ok, 2 config, 3 no trap, 4 I/O, 5 numeric abort.
#[derive(Parser)]
#[command(name = "evtrap", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand)]
enum Command {
    /// Print derived constants and the trap profile.
    Characterize,
    /// Tabulate the adiabatic potential and photon numbers.
    Potential,
    /// Integrate a single trajectory.
    Trajectory,
    /// Run an ensemble and report the trapping probability.
    Ensemble,
}

#[derive(Args)]
struct Common {
    /// Config file with `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Time step, 1/γ.
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Integration horizon, 1/γ.
    #[arg(long, global = true)]
    horizon: Option<f64>,
    #[arg(long, global = true)]
    n_traj: Option<usize>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Drop the stochastic terms.
    #[arg(long, global = true)]
    no_noise: bool,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override any config key, e.g. `--set eta_b=1.4e9`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
}

fn resolve(common: &Common) -> Result<RunConfig, CliError> {
    let mut config = match &common.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    for assignment in &common.overrides {
        config.apply_override(assignment)?;
    }
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(dt) = common.dt {
        config.dt = dt;
    }
    if let Some(h) = common.horizon {
        config.horizon = h;
    }
    if let Some(n) = common.n_traj {
        config.n_traj = n;
    }
    if let Some(w) = common.workers {
        config.workers = w;
    }
    if common.no_noise {
        config.noiseless = true;
    }
    if let Some(out) = &common.out {
        config.out_dir = out.clone();
    }
    Ok(config)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let config = resolve(&cli.common)?;
    let doc = match cli.command {
        Command::Characterize => Some(cmd_characterize(&config)?),
        Command::Potential => {
            cmd_potential(&config)?;
            None
        }
        Command::Trajectory => Some(cmd_trajectory(&config)?),
        Command::Ensemble => Some(cmd_ensemble(&config)?),
    };
    if let Some(doc) = doc {
        println!("{}", serde_json::to_string_pretty(&doc).expect("summary serializes"));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("evtrap: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
