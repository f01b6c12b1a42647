use std::fmt;
use std::path::Path;

use evtrap_core::ensemble::{EnsembleError, OutcomeRecord, Simulator, Status};
use evtrap_core::{characterize_trap, derive, FieldError, TrapModel};
use serde_json::Value;

use crate::config::{ConfigError, RunConfig};
use crate::output::{self, OutputError};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const NO_TRAP: i32 = 3;
    pub const IO: i32 = 4;
    pub const NUMERIC_ABORT: i32 = 5;
}

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    NoTrap(String),
    Io(OutputError),
    NumericAbort(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::NoTrap(_) => exit::NO_TRAP,
            CliError::Io(_) => exit::IO,
            CliError::NumericAbort(_) => exit::NUMERIC_ABORT,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "config error: {e}"),
            CliError::NoTrap(msg) => write!(f, "{msg}"),
            CliError::Io(e) => write!(f, "I/O error: {e}"),
            CliError::NumericAbort(msg) => write!(f, "numeric abort: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<OutputError> for CliError {
    fn from(e: OutputError) -> Self {
        CliError::Io(e)
    }
}

impl From<FieldError> for CliError {
    fn from(e: FieldError) -> Self {
        match e {
            FieldError::NoTrap(_) => CliError::NoTrap(e.to_string()),
            other => CliError::Config(ConfigError::BadValue {
                key: "grid".into(),
                value: String::new(),
                reason: other.to_string(),
            }),
        }
    }
}

impl From<EnsembleError> for CliError {
    fn from(e: EnsembleError) -> Self {
        match e {
            EnsembleError::Field(f) => f.into(),
            other => CliError::Config(ConfigError::BadValue {
                key: "settings".into(),
                value: String::new(),
                reason: other.to_string(),
            }),
        }
    }
}

fn write_summary(dir: &Path, name: &str, value: &Value) -> Result<(), CliError> {
    output::write_file(&dir.join(name), |w| output::write_json(w, value))?;
    Ok(())
}

/// Prints derived constants and the trap profile; also saves them as
/// `characterize.json` in the output directory.
pub fn cmd_characterize(config: &RunConfig) -> Result<Value, CliError> {
    let model = config.validate()?;
    let derived = derive(&config.params).map_err(ConfigError::from)?;
    let trap = characterize_trap(&model)?;
    output::ensure_dir(&config.out_dir)?;
    let mut doc = output::summary("characterize", config);
    doc.insert("derived".into(), output::derived_json(&model, &derived));
    doc.insert("trap".into(), output::trap_json(&model, &trap));
    let doc = Value::Object(doc);
    write_summary(&config.out_dir, "characterize.json", &doc)?;
    Ok(doc)
}

/// Writes `potential.csv` over the configured grid.
pub fn cmd_potential(config: &RunConfig) -> Result<(), CliError> {
    let model = config.validate()?;
    let rows = evtrap_core::fields::potential_scan(&model, &config.grid())?;
    output::ensure_dir(&config.out_dir)?;
    output::write_file(&config.out_dir.join("potential.csv"), |w| {
        output::write_scan(w, config, &rows)
    })?;
    Ok(())
}

fn simulator(config: &RunConfig) -> Result<(TrapModel, Simulator), CliError> {
    let model = config.validate()?;
    let sim = Simulator::new(model, config.settings())?;
    Ok((model, sim))
}

/// Runs one trajectory; writes `trajectory.csv`, `outcomes.csv` and
/// `trajectory_summary.json`.
pub fn cmd_trajectory(config: &RunConfig) -> Result<Value, CliError> {
    let (model, sim) = simulator(config)?;
    let ic = config.initial_condition(&model, sim.trap());
    ic.validate(sim.trap())?;
    output::ensure_dir(&config.out_dir)?;

    let mut rng = evtrap_core::ensemble::trajectory_rng(config.seed, 0);
    let outcome = sim.run_trajectory(&ic, &mut rng, Some(config.stride));
    let record = OutcomeRecord::from(&outcome);

    let dir = &config.out_dir;
    output::write_file(&dir.join("trajectory.csv"), |w| {
        output::write_series(w, config, &outcome.series)
    })?;
    output::write_file(&dir.join("outcomes.csv"), |w| {
        output::write_outcomes(w, config, std::slice::from_ref(&record))
    })?;
    let mut doc = output::summary("trajectory", config);
    doc.insert("trap".into(), output::trap_json(&model, sim.trap()));
    doc.insert("outcome".into(), output::outcome_json(&model, &record));
    doc.insert("series_rows".into(), outcome.series.len().into());
    let doc = Value::Object(doc);
    write_summary(dir, "trajectory_summary.json", &doc)?;

    if record.status == Status::NumericAbort {
        return Err(CliError::NumericAbort(format!(
            "non-finite state at t = {} / gamma",
            record.t_end
        )));
    }
    Ok(doc)
}

/// Runs the ensemble; writes `trapping.csv`, `energy.csv`, `outcomes.csv`
/// and `ensemble_summary.json`.
pub fn cmd_ensemble(config: &RunConfig) -> Result<Value, CliError> {
    let (model, sim) = simulator(config)?;
    let ic = config.initial_condition(&model, sim.trap());
    output::ensure_dir(&config.out_dir)?;
    let stats = sim.run_ensemble(config.n_traj, &ic, config.seed, config.worker_count())?;

    let dir = &config.out_dir;
    output::write_file(&dir.join("trapping.csv"), |w| {
        output::write_binned(w, config, output::TRAPPING_HEADER, &stats.times, &stats.p_trapped)
    })?;
    output::write_file(&dir.join("energy.csv"), |w| {
        output::write_binned(w, config, output::ENERGY_HEADER, &stats.times, &stats.e_mech)
    })?;
    output::write_file(&dir.join("outcomes.csv"), |w| {
        output::write_outcomes(w, config, &stats.outcomes)
    })?;
    let mut doc = output::summary("ensemble", config);
    doc.insert("trap".into(), output::trap_json(&model, sim.trap()));
    doc.insert("ensemble".into(), output::ensemble_json(&model, &stats, config.horizon));
    let doc = Value::Object(doc);
    write_summary(dir, "ensemble_summary.json", &doc)?;

    if stats.n_aborted > 0 {
        return Err(CliError::NumericAbort(format!(
            "{} of {} trajectories hit a non-finite state",
            stats.n_aborted, stats.n_traj
        )));
    }
    Ok(doc)
}
