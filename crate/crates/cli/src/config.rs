//! Flat `key = value` run configuration.
//!
//! Physical parameters are in SI units; integrator times (`dt`, `horizon`,
//! `bin_width`, `sample_interval`) in units of 1/γ; positions in units of 1/k;
//! initial velocities in m/s. Every key is optional and unknown keys are errors.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use evtrap_core::ensemble::{Distribution, InitialCondition, SimulationSettings, Thresholds};
use evtrap_core::fields::{uniform_grid, TrapProfile};
use evtrap_core::params::ParamError;
use evtrap_core::{default_paper_params, PhysicalParams, TrapModel};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown config key `{key}`{}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    UnknownKey { key: String, line: Option<usize> },
    #[error("bad value `{value}` for key `{key}`: {reason}")]
    BadValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("malformed line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("cannot read config {}: {source}", path.display())]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Param(#[from] ParamError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IcKind {
    Drop,
    Fixed,
    Uniform,
    Gaussian,
}

impl IcKind {
    fn as_str(self) -> &'static str {
        match self {
            IcKind::Drop => "drop",
            IcKind::Fixed => "fixed",
            IcKind::Uniform => "uniform",
            IcKind::Gaussian => "gaussian",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: PhysicalParams,
    pub dt: f64,
    pub horizon: f64,
    pub noiseless: bool,
    pub x_escape: f64,
    pub x_stick: f64,
    pub bin_width: f64,
    pub sample_interval: f64,
    pub n_traj: usize,
    pub seed: u64,
    /// 0 selects every available core.
    pub workers: usize,
    pub ic: IcKind,
    pub x0: f64,
    pub v0: f64,
    pub x0_low: f64,
    pub x0_high: f64,
    pub v0_low: f64,
    pub v0_high: f64,
    pub x0_std: f64,
    pub v0_std: f64,
    pub out_dir: PathBuf,
    /// Trajectory series stride, in integration steps.
    pub stride: u64,
    pub grid_start: f64,
    pub grid_end: f64,
    pub grid_step: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let sim = SimulationSettings::default();
        RunConfig {
            params: default_paper_params(),
            dt: sim.dt,
            horizon: sim.horizon,
            noiseless: false,
            x_escape: sim.thresholds.x_escape,
            x_stick: sim.thresholds.x_stick,
            bin_width: sim.bin_width,
            sample_interval: sim.sample_interval,
            n_traj: 1000,
            seed: 1,
            workers: 0,
            ic: IcKind::Drop,
            x0: 3.0,
            v0: 0.0,
            x0_low: 2.0,
            x0_high: 4.0,
            v0_low: -0.05,
            v0_high: 0.0,
            x0_std: 0.0,
            v0_std: 0.0,
            out_dir: PathBuf::from("out"),
            stride: 200,
            grid_start: 0.05,
            grid_end: 5.0,
            grid_step: 0.005,
        }
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64, ConfigError> {
    value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| ConfigError::BadValue {
            key: key.into(),
            value: value.into(),
            reason: "expected a finite number".into(),
        })
}

fn parse_int<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse::<T>().map_err(|_| ConfigError::BadValue {
        key: key.into(),
        value: value.into(),
        reason: "expected a non-negative integer".into(),
    })
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(ConfigError::BadValue {
            key: key.into(),
            value: value.into(),
            reason: "expected true or false".into(),
        }),
    }
}

impl RunConfig {
    /// Reads a config file on top of the defaults.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        let mut config = RunConfig::default();
        config.apply_text(&text)?;
        Ok(config)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(ConfigError::Syntax { line: i + 1 })?;
            self.set(key.trim(), value.trim()).map_err(|e| match e {
                ConfigError::UnknownKey { key, .. } => ConfigError::UnknownKey {
                    key,
                    line: Some(i + 1),
                },
                other => other,
            })?;
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (key, value) = assignment.split_once('=').ok_or(ConfigError::BadValue {
            key: assignment.into(),
            value: String::new(),
            reason: "override must look like key=value".into(),
        })?;
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let p = &mut self.params;
        let f = || parse_f64(key, value);
        match key {
            "gamma" => p.gamma = f()?,
            "kappa" => p.kappa = f()?,
            "g" => p.g = f()?,
            "delta_a" => p.delta_a = f()?,
            "delta_c" => p.delta_c = f()?,
            "eta_r" => p.eta_r = f()?,
            "eta_b" => p.eta_b = f()?,
            "k" => p.k = f()?,
            "mass" => p.mass = f()?,
            "c3_vdw" => p.c3_vdw = f()?,
            "u2_bar" => p.u2_bar = f()?,
            "k_opt_r" => p.k_opt_r = f()?,
            "k_opt_b" => p.k_opt_b = f()?,
            "field_noise_scale" => p.field_noise_scale = f()?,
            "dt" => self.dt = f()?,
            "horizon" => self.horizon = f()?,
            "noiseless" => self.noiseless = parse_bool(key, value)?,
            "x_escape" => self.x_escape = f()?,
            "x_stick" => self.x_stick = f()?,
            "bin_width" => self.bin_width = f()?,
            "sample_interval" => self.sample_interval = f()?,
            "n_traj" => self.n_traj = parse_int(key, value)?,
            "seed" => self.seed = parse_int(key, value)?,
            "workers" => self.workers = parse_int(key, value)?,
            "ic" => {
                self.ic = match value {
                    "drop" => IcKind::Drop,
                    "fixed" => IcKind::Fixed,
                    "uniform" => IcKind::Uniform,
                    "gaussian" => IcKind::Gaussian,
                    _ => {
                        return Err(ConfigError::BadValue {
                            key: key.into(),
                            value: value.into(),
                            reason: "expected drop, fixed, uniform or gaussian".into(),
                        })
                    }
                }
            }
            "x0" => self.x0 = f()?,
            "v0" => self.v0 = f()?,
            "x0_low" => self.x0_low = f()?,
            "x0_high" => self.x0_high = f()?,
            "v0_low" => self.v0_low = f()?,
            "v0_high" => self.v0_high = f()?,
            "x0_std" => self.x0_std = f()?,
            "v0_std" => self.v0_std = f()?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "stride" => self.stride = parse_int(key, value)?,
            "grid_start" => self.grid_start = f()?,
            "grid_end" => self.grid_end = f()?,
            "grid_step" => self.grid_step = f()?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    key: key.into(),
                    line: None,
                })
            }
        }
        Ok(())
    }

    /// Checks everything that does not need the trap to be characterized.
    pub fn validate(&self) -> Result<TrapModel, ConfigError> {
        let bad = |key: &str, value: f64, reason: &str| ConfigError::BadValue {
            key: key.into(),
            value: value.to_string(),
            reason: reason.into(),
        };
        for (key, v) in [
            ("dt", self.dt),
            ("horizon", self.horizon),
            ("bin_width", self.bin_width),
            ("sample_interval", self.sample_interval),
            ("grid_step", self.grid_step),
        ] {
            if v <= 0.0 {
                return Err(bad(key, v, "must be positive"));
            }
        }
        if !(self.x_stick > 0.0 && self.x_escape > self.x_stick) {
            return Err(bad("x_escape", self.x_escape, "need 0 < x_stick < x_escape"));
        }
        if self.grid_start <= 0.0 || self.grid_end < self.grid_start {
            return Err(bad("grid_start", self.grid_start, "need 0 < grid_start <= grid_end"));
        }
        if self.stride == 0 {
            return Err(bad("stride", 0.0, "must be at least 1"));
        }
        if self.n_traj == 0 {
            return Err(bad("n_traj", 0.0, "must be at least 1"));
        }
        Ok(TrapModel::new(&self.params)?)
    }

    pub fn settings(&self) -> SimulationSettings {
        SimulationSettings {
            dt: self.dt,
            horizon: self.horizon,
            noiseless: self.noiseless,
            thresholds: Thresholds {
                x_escape: self.x_escape,
                x_stick: self.x_stick,
            },
            bin_width: self.bin_width,
            sample_interval: self.sample_interval,
            ..SimulationSettings::default()
        }
    }

    pub fn initial_condition(&self, model: &TrapModel, trap: &TrapProfile) -> InitialCondition {
        match self.ic {
            IcKind::Drop => InitialCondition::drop_in(model, trap),
            IcKind::Fixed => InitialCondition::fixed(self.x0, self.v0),
            IcKind::Uniform => InitialCondition {
                x0: Distribution::Uniform {
                    low: self.x0_low,
                    high: self.x0_high,
                },
                v0: Distribution::Uniform {
                    low: self.v0_low,
                    high: self.v0_high,
                },
                alpha0: None,
            },
            IcKind::Gaussian => InitialCondition {
                x0: Distribution::Gaussian {
                    mean: self.x0,
                    std_dev: self.x0_std,
                },
                v0: Distribution::Gaussian {
                    mean: self.v0,
                    std_dev: self.v0_std,
                },
                alpha0: None,
            },
        }
    }

    pub fn grid(&self) -> Vec<f64> {
        uniform_grid(self.grid_start, self.grid_end, self.grid_step)
    }

    pub fn worker_count(&self) -> usize {
        if self.workers > 0 {
            self.workers
        } else {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        }
    }

    /// Every key with its resolved value, in a fixed order. Feeding this text
    /// back through [`apply_text`](Self::apply_text) reproduces the config.
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("gamma", format!("{:?}", p.gamma));
        put("kappa", format!("{:?}", p.kappa));
        put("g", format!("{:?}", p.g));
        put("delta_a", format!("{:?}", p.delta_a));
        put("delta_c", format!("{:?}", p.delta_c));
        put("eta_r", format!("{:?}", p.eta_r));
        put("eta_b", format!("{:?}", p.eta_b));
        put("k", format!("{:?}", p.k));
        put("mass", format!("{:?}", p.mass));
        put("c3_vdw", format!("{:?}", p.c3_vdw));
        put("u2_bar", format!("{:?}", p.u2_bar));
        put("k_opt_r", format!("{:?}", p.k_opt_r));
        put("k_opt_b", format!("{:?}", p.k_opt_b));
        put("field_noise_scale", format!("{:?}", p.field_noise_scale));
        put("dt", format!("{:?}", self.dt));
        put("horizon", format!("{:?}", self.horizon));
        put("noiseless", self.noiseless.to_string());
        put("x_escape", format!("{:?}", self.x_escape));
        put("x_stick", format!("{:?}", self.x_stick));
        put("bin_width", format!("{:?}", self.bin_width));
        put("sample_interval", format!("{:?}", self.sample_interval));
        put("n_traj", self.n_traj.to_string());
        put("seed", self.seed.to_string());
        put("workers", self.workers.to_string());
        put("ic", self.ic.as_str().to_string());
        put("x0", format!("{:?}", self.x0));
        put("v0", format!("{:?}", self.v0));
        put("x0_low", format!("{:?}", self.x0_low));
        put("x0_high", format!("{:?}", self.x0_high));
        put("v0_low", format!("{:?}", self.v0_low));
        put("v0_high", format!("{:?}", self.v0_high));
        put("x0_std", format!("{:?}", self.x0_std));
        put("v0_std", format!("{:?}", self.v0_std));
        put("out_dir", self.out_dir.display().to_string());
        put("stride", self.stride.to_string());
        put("grid_start", format!("{:?}", self.grid_start));
        put("grid_end", format!("{:?}", self.grid_end));
        put("grid_step", format!("{:?}", self.grid_step));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_defaults() {
        let mut c = RunConfig::default();
        c.apply_text("# nothing here\n\n").unwrap();
        assert_eq!(c, RunConfig::default());
        assert!(c.validate().is_ok());
    }

    #[test]
    fn unknown_key_is_named() {
        let mut c = RunConfig::default();
        let err = c.apply_text("dt = 0.001\nbogus_key = 3\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bogus_key") && msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn values_are_checked() {
        let mut c = RunConfig::default();
        assert!(matches!(c.set("dt", "fast"), Err(ConfigError::BadValue { .. })));
        assert!(matches!(c.set("n_traj", "-3"), Err(ConfigError::BadValue { .. })));
        assert!(matches!(c.apply_text("dt 0.1"), Err(ConfigError::Syntax { line: 1 })));
        c.set("delta_c", "1e7").unwrap();
        assert!(matches!(c.validate(), Err(ConfigError::Param(_))));
        let mut c = RunConfig::default();
        c.set("horizon", "0").unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn resolved_text_round_trips() {
        let mut c = RunConfig::default();
        c.apply_text("eta_b = 1.4e9\nseed = 77\nic = uniform\nnoiseless = true\nout_dir = /tmp/x\n")
            .unwrap();
        c.apply_override("dt=0.0025").unwrap();
        let mut back = RunConfig::default();
        back.apply_text(&c.to_text()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_text(), c.to_text());
    }
}
