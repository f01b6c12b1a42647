//! Series tables and JSON summaries.
//!
//! Series files start with `#` lines carrying the resolved config, followed by
//! the header row and one record per line. Summaries are JSON objects with
//! sorted keys, so reruns are byte-identical.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use evtrap_core::ensemble::{EnsembleStats, OutcomeRecord, SeriesSample};
use evtrap_core::fields::{ScanRow, TrapProfile};
use evtrap_core::{DerivedParams, TrapModel};
use serde_json::{json, Map, Value};

use crate::config::RunConfig;

pub const TRAJECTORY_HEADER: &str = "t,x,p,n_r,n_b,E_mech";
pub const OUTCOME_HEADER: &str = "index,status,t_end,bounces,final_energy,x_closest";
pub const TRAPPING_HEADER: &str = "t,p_trapped";
pub const ENERGY_HEADER: &str = "t,e_mech";

#[derive(Debug)]
pub struct OutputError {
    pub path: PathBuf,
    pub source: io::Error,
}

impl std::fmt::Display for OutputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "cannot write {}: {}", self.path.display(), self.source)
    }
}

impl std::error::Error for OutputError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

pub fn ensure_dir(dir: &Path) -> Result<(), OutputError> {
    fs::create_dir_all(dir).map_err(|source| OutputError {
        path: dir.to_owned(),
        source,
    })?;
    let probe = dir.join(".evtrap-write-probe");
    fs::write(&probe, b"")
        .and_then(|_| fs::remove_file(&probe))
        .map_err(|source| OutputError {
            path: dir.to_owned(),
            source,
        })
}

pub fn write_file(
    path: &Path,
    body: impl FnOnce(&mut dyn Write) -> io::Result<()>,
) -> Result<(), OutputError> {
    let wrap = |source| OutputError {
        path: path.to_owned(),
        source,
    };
    let file = fs::File::create(path).map_err(wrap)?;
    let mut w = BufWriter::new(file);
    body(&mut w).and_then(|_| w.flush()).map_err(wrap)
}

fn preamble(w: &mut dyn Write, config: &RunConfig) -> io::Result<()> {
    for line in config.to_text().lines() {
        writeln!(w, "# {line}")?;
    }
    Ok(())
}

pub fn write_scan(w: &mut dyn Write, config: &RunConfig, rows: &[ScanRow]) -> io::Result<()> {
    preamble(w, config)?;
    evtrap_core::fields::write_scan(rows, w)
}

pub fn write_series(w: &mut dyn Write, config: &RunConfig, series: &[SeriesSample]) -> io::Result<()> {
    preamble(w, config)?;
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    for s in series {
        writeln!(
            w,
            "{:.4},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e}",
            s.t, s.x, s.p, s.n_red, s.n_blue, s.e_mech
        )?;
    }
    Ok(())
}

pub fn write_outcomes(w: &mut dyn Write, config: &RunConfig, outcomes: &[OutcomeRecord]) -> io::Result<()> {
    preamble(w, config)?;
    writeln!(w, "{OUTCOME_HEADER}")?;
    for (i, o) in outcomes.iter().enumerate() {
        writeln!(
            w,
            "{i},{},{:.4},{},{:.10e},{:.10e}",
            o.status.as_str(),
            o.t_end,
            o.bounce_count,
            o.final_energy,
            o.x_closest
        )?;
    }
    Ok(())
}

pub fn write_binned(
    w: &mut dyn Write,
    config: &RunConfig,
    header: &str,
    times: &[f64],
    values: &[f64],
) -> io::Result<()> {
    preamble(w, config)?;
    writeln!(w, "{header}")?;
    for (t, v) in times.iter().zip(values) {
        writeln!(w, "{t:.4},{v:.10e}")?;
    }
    Ok(())
}

pub fn write_json(w: &mut dyn Write, value: &Value) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    writeln!(w)
}

fn config_object(config: &RunConfig) -> Value {
    let map: Map<String, Value> = config
        .to_text()
        .lines()
        .filter_map(|l| l.split_once(" = "))
        .map(|(k, v)| (k.to_string(), Value::String(v.to_string())))
        .collect();
    Value::Object(map)
}

/// Fields shared by every summary: command name, seed and resolved config.
pub fn summary(command: &str, config: &RunConfig) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("command".into(), json!(command));
    m.insert("seed".into(), json!(config.seed));
    m.insert("config".into(), config_object(config));
    m
}

pub fn derived_json(model: &TrapModel, derived: &DerivedParams) -> Value {
    let u = &model.units;
    json!({
        "u0": { "gamma_units": model.u0, "per_second": derived.u0 },
        "u0_over_kappa": model.u0 / model.kappa,
        "gamma0": { "gamma_units": model.gamma0, "per_second": derived.gamma0 },
        "n_sat": derived.n_sat,
        "epsilon": derived.epsilon,
        "n_empty_red": derived.n_empty_r,
        "n_empty_blue": derived.n_empty_b,
        "sign_red": derived.sign_r,
        "sign_blue": derived.sign_b,
        "units": {
            "time_s": u.time,
            "length_m": u.length,
            "momentum_kg_m_per_s": u.momentum,
            "energy_j": u.energy,
            "frequency_per_s": u.frequency,
        },
    })
}

pub fn trap_json(model: &TrapModel, trap: &TrapProfile) -> Value {
    let u = &model.units;
    json!({
        "x_min": { "k_units": trap.x_min, "nm": u.length_to_si(trap.x_min) * 1e9 },
        "depth": { "hbar_gamma": trap.depth, "joule": u.energy_to_si(trap.depth) },
        "x_barrier": { "k_units": trap.x_barrier, "nm": u.length_to_si(trap.x_barrier) * 1e9 },
        "barrier_height": { "hbar_gamma": trap.barrier_height, "joule": u.energy_to_si(trap.barrier_height) },
        "x_inner": { "k_units": trap.x_inner, "nm": u.length_to_si(trap.x_inner) * 1e9 },
        "omega_trap": { "gamma_units": trap.omega_trap_internal, "per_second": trap.omega_trap },
        "sat_max": trap.sat_max,
    })
}

pub fn outcome_json(model: &TrapModel, o: &OutcomeRecord) -> Value {
    let u = &model.units;
    json!({
        "status": o.status.as_str(),
        "t_end": { "gamma_units": o.t_end, "seconds": u.time_to_si(o.t_end) },
        "bounces": o.bounce_count,
        "final_energy": { "hbar_gamma": o.final_energy, "joule": u.energy_to_si(o.final_energy) },
        "x_closest": { "k_units": o.x_closest, "nm": u.length_to_si(o.x_closest) * 1e9 },
    })
}

pub fn ensemble_json(model: &TrapModel, stats: &EnsembleStats, horizon: f64) -> Value {
    let u = &model.units;
    json!({
        "n_traj": stats.n_traj,
        "plateau": stats.plateau(),
        "plateau_std_error": stats.plateau_std_error(),
        "p_trapped_half_horizon": stats.trapped_fraction_at(0.5 * horizon),
        "e_kin_final": { "hbar_gamma": stats.e_kin_final, "joule": u.energy_to_si(stats.e_kin_final) },
        "counts": {
            "trapped": stats.n_trapped,
            "escaped": stats.n_escaped,
            "stuck": stats.n_stuck,
            "numeric_abort": stats.n_aborted,
        },
        "mean_bounces": stats.mean_bounces,
        "noise_fallbacks": stats.noise_fallbacks,
    })
}
