//! Trajectories to termination and many-trajectory statistics.
//!
//! Every trajectory draws from its own ChaCha stream selected by
//! `(master_seed, index)`, and results are merged in index order, so an
//! ensemble is bit-identical for any number of worker threads.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::{characterize_trap, outer_slope_position, potential, FieldError, TrapProfile};
use crate::params::{Mode, TrapModel};
use crate::sde::{check_step, euler_maruyama_step, step_deterministic, NoiseSampler, SdeError, SystemState};

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Step(#[from] SdeError),
    #[error("invalid initial condition: {0}")]
    InitialCondition(String),
    #[error("invalid simulation settings: {0}")]
    Settings(String),
    #[error("could not start worker pool: {0}")]
    Workers(String),
}

/// Escape and surface-loss thresholds, units of 1/k.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub x_escape: f64,
    pub x_stick: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            x_escape: 8.0,
            x_stick: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Boundary {
    Inside,
    Escaped,
    Stuck,
}

pub fn classify_boundary(state: &SystemState, thresholds: &Thresholds) -> Boundary {
    if state.x <= thresholds.x_stick {
        Boundary::Stuck
    } else if state.x >= thresholds.x_escape && state.p > 0.0 {
        Boundary::Escaped
    } else {
        Boundary::Inside
    }
}

/// Kinetic plus adiabatic potential energy, ħγ.
pub fn mechanical_energy(model: &TrapModel, state: &SystemState) -> f64 {
    model.kinetic_energy(state.p) + potential(model, state.x)
}

/// A scalar that is either fixed or drawn per trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Distribution {
    Fixed { value: f64 },
    Uniform { low: f64, high: f64 },
    Gaussian { mean: f64, std_dev: f64 },
}

impl Distribution {
    pub fn fixed(value: f64) -> Self {
        Distribution::Fixed { value }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Distribution::Fixed { value } => value,
            Distribution::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
            Distribution::Gaussian { mean, std_dev } => {
                mean + std_dev * rng.sample::<f64, _>(StandardNormal)
            }
        }
    }

    fn validate(&self, name: &str) -> Result<(), EnsembleError> {
        let ok = match *self {
            Distribution::Fixed { value } => value.is_finite(),
            Distribution::Uniform { low, high } => low.is_finite() && high.is_finite() && low <= high,
            Distribution::Gaussian { mean, std_dev } => {
                mean.is_finite() && std_dev.is_finite() && std_dev >= 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(EnsembleError::InitialCondition(format!("{name}: {self:?}")))
        }
    }

    /// Smallest value the distribution can produce (−∞ for a Gaussian).
    fn lower_bound(&self) -> f64 {
        match *self {
            Distribution::Fixed { value } => value,
            Distribution::Uniform { low, .. } => low,
            Distribution::Gaussian { std_dev, mean } if std_dev == 0.0 => mean,
            Distribution::Gaussian { .. } => f64::NEG_INFINITY,
        }
    }
}

/// Starting point of a trajectory. `v0` is a velocity in m/s (positive = away
/// from the surface); fields start at their local steady state unless given.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialCondition {
    pub x0: Distribution,
    pub v0: Distribution,
    pub alpha0: Option<[Complex64; 2]>,
}

/// Fraction of the well depth at which the default drop starts on the outer slope.
pub const DROP_DEPTH_FRACTION: f64 = 0.01;

impl InitialCondition {
    /// Atom released at rest where U(x0) = −0.01·depth on the outer slope.
    pub fn drop_in(model: &TrapModel, trap: &TrapProfile) -> Self {
        InitialCondition {
            x0: Distribution::fixed(outer_slope_position(model, trap, DROP_DEPTH_FRACTION)),
            v0: Distribution::fixed(0.0),
            alpha0: None,
        }
    }

    /// Atom at `x0` moving with velocity `v0` (m/s).
    pub fn fixed(x0: f64, v0: f64) -> Self {
        InitialCondition {
            x0: Distribution::fixed(x0),
            v0: Distribution::fixed(v0),
            alpha0: None,
        }
    }

    pub fn validate(&self, trap: &TrapProfile) -> Result<(), EnsembleError> {
        self.x0.validate("x0")?;
        self.v0.validate("v0")?;
        if !(self.x0.lower_bound() > trap.x_barrier) {
            return Err(EnsembleError::InitialCondition(format!(
                "x0 must stay outside the barrier at x = {:.4}",
                trap.x_barrier
            )));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, model: &TrapModel, rng: &mut R) -> SystemState {
        let x = self.x0.sample(rng);
        let p = model.units.velocity_to_momentum(self.v0.sample(rng));
        let mut state = SystemState::with_steady_fields(model, x, p);
        if let Some(alpha) = self.alpha0 {
            state.alpha = alpha;
        }
        state
    }
}

/// Integrator and bookkeeping settings, internal units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationSettings {
    pub dt: f64,
    pub horizon: f64,
    pub noiseless: bool,
    pub thresholds: Thresholds,
    /// Width of the statistics time bins, 1/γ.
    pub bin_width: f64,
    /// Interval between energy samples feeding the bin averages, 1/γ.
    pub sample_interval: f64,
    /// Minimum time between two counted turning points of the same kind, 1/γ.
    pub turning_guard: f64,
    /// Each Gaussian increment is assembled from this many finer draws (see
    /// [`NoiseSampler::sample_substeps`]).
    pub brownian_substeps: u32,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        SimulationSettings {
            dt: 5e-3,
            horizon: 2e4,
            noiseless: false,
            thresholds: Thresholds::default(),
            bin_width: 50.0,
            sample_interval: 1.0,
            turning_guard: 10.0,
            brownian_substeps: 1,
        }
    }
}

impl SimulationSettings {
    fn validate(&self) -> Result<(), EnsembleError> {
        let positive = [
            ("dt", self.dt),
            ("horizon", self.horizon),
            ("bin_width", self.bin_width),
            ("sample_interval", self.sample_interval),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(EnsembleError::Settings(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.turning_guard >= 0.0) {
            return Err(EnsembleError::Settings("turning_guard must be non-negative".into()));
        }
        if self.brownian_substeps == 0 {
            return Err(EnsembleError::Settings("brownian_substeps must be at least 1".into()));
        }
        let t = self.thresholds;
        if !(t.x_stick > 0.0 && t.x_escape > t.x_stick) {
            return Err(EnsembleError::Settings(format!(
                "thresholds need 0 < x_stick < x_escape, got {t:?}"
            )));
        }
        Ok(())
    }

    pub fn total_steps(&self) -> u64 {
        (self.horizon / self.dt).round() as u64
    }

    pub fn bin_count(&self) -> usize {
        (self.horizon / self.bin_width).ceil() as usize
    }

    fn steps_per(&self, interval: f64) -> u64 {
        ((interval / self.dt).round() as u64).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    TrappedAtHorizon,
    Escaped,
    Stuck,
    /// The state became non-finite; never expected in healthy runs.
    NumericAbort,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::TrappedAtHorizon => "trapped-at-horizon",
            Status::Escaped => "escaped",
            Status::Stuck => "stuck",
            Status::NumericAbort => "numeric-abort",
        }
    }
}

/// One recorded point of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesSample {
    pub t: f64,
    pub x: f64,
    pub p: f64,
    pub n_red: f64,
    pub n_blue: f64,
    pub e_mech: f64,
}

/// Mechanical energy at an outer turning point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TurningPoint {
    pub t: f64,
    pub x: f64,
    pub e_mech: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryOutcome {
    pub status: Status,
    pub t_end: f64,
    pub bounce_count: u32,
    pub final_state: SystemState,
    pub final_energy: f64,
    /// Closest approach to the surface, 1/k.
    pub x_closest: f64,
    pub outer_turning_points: Vec<TurningPoint>,
    pub series: Vec<SeriesSample>,
    /// Mean mechanical energy per completed statistics bin.
    pub bin_energy: Vec<f64>,
    /// Mean kinetic energy over the last 10% of the horizon (trapped runs only).
    pub late_kinetic_energy: Option<f64>,
    pub noise_fallbacks: u64,
}

impl TrajectoryOutcome {
    pub fn is_trapped(&self) -> bool {
        self.status == Status::TrappedAtHorizon
    }
}

/// Trajectory runner for one trap model and one set of integrator settings.
#[derive(Debug, Clone)]
pub struct Simulator {
    model: TrapModel,
    trap: TrapProfile,
    settings: SimulationSettings,
}

impl Simulator {
    pub fn new(model: TrapModel, settings: SimulationSettings) -> Result<Self, EnsembleError> {
        settings.validate()?;
        let trap = characterize_trap(&model)?;
        check_step(&model, settings.dt, trap.omega_trap_internal)?;
        Ok(Simulator {
            model,
            trap,
            settings,
        })
    }

    pub fn model(&self) -> &TrapModel {
        &self.model
    }

    pub fn trap(&self) -> &TrapProfile {
        &self.trap
    }

    pub fn settings(&self) -> &SimulationSettings {
        &self.settings
    }

    /// Integrates one trajectory until escape, surface loss or the horizon.
    ///
    /// `record_stride` (in steps) enables the time series; `None` keeps only
    /// the summary. The initial condition is drawn from `rng` before any noise.
    pub fn run_trajectory<R: Rng + ?Sized>(
        &self,
        ic: &InitialCondition,
        rng: &mut R,
        record_stride: Option<u64>,
    ) -> TrajectoryOutcome {
        let model = &self.model;
        let s = &self.settings;
        let dt = s.dt;
        let total = s.total_steps();
        let sample_every = s.steps_per(s.sample_interval);
        let bin_steps = s.steps_per(s.bin_width);
        let late_start = (0.9 * total as f64).round() as u64;

        let mut state = ic.sample(model, rng);
        let mut sampler = NoiseSampler::new();
        let mut series = Vec::new();
        let mut turning = Vec::new();
        let mut bin_energy = Vec::with_capacity(s.bin_count());
        let (mut bin_sum, mut bin_n) = (0.0, 0u64);
        let (mut late_sum, mut late_n) = (0.0, 0u64);
        let mut bounces = 0u32;
        let mut last_inner = f64::NEG_INFINITY;
        let mut last_outer = f64::NEG_INFINITY;
        let mut x_closest = state.x;
        let mut status = Status::TrappedAtHorizon;
        let mut steps_done = 0u64;

        let record = |state: &SystemState, t: f64, series: &mut Vec<SeriesSample>| {
            series.push(SeriesSample {
                t,
                x: state.x,
                p: state.p,
                n_red: state.photon_number(Mode::Red),
                n_blue: state.photon_number(Mode::Blue),
                e_mech: mechanical_energy(model, state),
            })
        };
        if let Some(stride) = record_stride {
            if stride <= total {
                record(&state, 0.0, &mut series);
            }
        }

        for step in 1..=total {
            let previous_p = state.p;
            state = if s.noiseless {
                step_deterministic(model, &state, dt)
            } else {
                euler_maruyama_step(model, &state, dt, &mut sampler, rng, s.brownian_substeps)
            };
            let t = step as f64 * dt;
            state.t = t;
            steps_done = step;

            if !state.is_finite() {
                status = Status::NumericAbort;
                break;
            }
            x_closest = x_closest.min(state.x);
            if previous_p < 0.0 && state.p >= 0.0 && t - last_inner >= s.turning_guard {
                bounces += 1;
                last_inner = t;
            }
            if previous_p > 0.0 && state.p <= 0.0 && t - last_outer >= s.turning_guard {
                last_outer = t;
                turning.push(TurningPoint {
                    t,
                    x: state.x,
                    e_mech: mechanical_energy(model, &state),
                });
            }
            match classify_boundary(&state, &s.thresholds) {
                Boundary::Inside => {}
                Boundary::Escaped => {
                    status = Status::Escaped;
                    break;
                }
                Boundary::Stuck => {
                    status = Status::Stuck;
                    break;
                }
            }
            if step % sample_every == 0 {
                bin_sum += mechanical_energy(model, &state);
                bin_n += 1;
                if step > late_start {
                    late_sum += model.kinetic_energy(state.p);
                    late_n += 1;
                }
            }
            if step % bin_steps == 0 || step == total {
                bin_energy.push(if bin_n > 0 {
                    bin_sum / bin_n as f64
                } else {
                    mechanical_energy(model, &state)
                });
                bin_sum = 0.0;
                bin_n = 0;
            }
            if let Some(stride) = record_stride {
                if step % stride == 0 {
                    record(&state, t, &mut series);
                }
            }
        }

        let trapped = status == Status::TrappedAtHorizon;
        TrajectoryOutcome {
            status,
            t_end: steps_done as f64 * dt,
            bounce_count: bounces,
            final_state: state,
            final_energy: if state.is_finite() {
                mechanical_energy(model, &state)
            } else {
                f64::NAN
            },
            x_closest,
            outer_turning_points: turning,
            series,
            bin_energy,
            late_kinetic_energy: (trapped && late_n > 0).then(|| late_sum / late_n as f64),
            noise_fallbacks: sampler.fallbacks,
        }
    }

    /// Runs `n_traj` independent trajectories on `workers` threads.
    pub fn run_ensemble(
        &self,
        n_traj: usize,
        ic: &InitialCondition,
        master_seed: u64,
        workers: usize,
    ) -> Result<EnsembleStats, EnsembleError> {
        if n_traj == 0 {
            return Err(EnsembleError::Settings("n_traj must be at least 1".into()));
        }
        ic.validate(&self.trap)?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .map_err(|e| EnsembleError::Workers(e.to_string()))?;
        let outcomes: Vec<TrajectoryOutcome> = pool.install(|| {
            (0..n_traj)
                .into_par_iter()
                .map(|index| {
                    let mut rng = trajectory_rng(master_seed, index as u64);
                    let mut outcome = self.run_trajectory(ic, &mut rng, None);
                    outcome.outer_turning_points = Vec::new();
                    outcome
                })
                .collect()
        });
        Ok(EnsembleStats::aggregate(&outcomes, &self.settings, master_seed))
    }
}

/// RNG stream for trajectory `index` of an ensemble seeded with `master_seed`.
pub fn trajectory_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Binned ensemble observables. Bin `b` ends at `times[b]`; a trajectory
/// counts as trapped in a bin when it is still inside at the bin's end.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleStats {
    pub n_traj: usize,
    pub seed: u64,
    pub times: Vec<f64>,
    pub p_trapped: Vec<f64>,
    /// Mean mechanical energy over trajectories trapped in the bin; NaN if none.
    pub e_mech: Vec<f64>,
    /// Mean kinetic energy over the trapped set in the last 10% of the horizon.
    pub e_kin_final: f64,
    pub n_trapped: usize,
    pub n_escaped: usize,
    pub n_stuck: usize,
    pub n_aborted: usize,
    pub mean_bounces: f64,
    pub noise_fallbacks: u64,
    /// Sorted loss times of all escaped, stuck or aborted trajectories.
    pub loss_times: Vec<f64>,
    /// One record per trajectory, in index order.
    pub outcomes: Vec<OutcomeRecord>,
}

/// Per-trajectory summary kept by ensemble runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OutcomeRecord {
    pub status: Status,
    pub t_end: f64,
    pub bounce_count: u32,
    pub final_energy: f64,
    pub x_closest: f64,
}

impl From<&TrajectoryOutcome> for OutcomeRecord {
    fn from(o: &TrajectoryOutcome) -> Self {
        OutcomeRecord {
            status: o.status,
            t_end: o.t_end,
            bounce_count: o.bounce_count,
            final_energy: o.final_energy,
            x_closest: o.x_closest,
        }
    }
}

impl EnsembleStats {
    pub fn aggregate(outcomes: &[TrajectoryOutcome], settings: &SimulationSettings, seed: u64) -> Self {
        let n = outcomes.len();
        let bins = settings.bin_count();
        let times: Vec<f64> = (0..bins)
            .map(|b| (((b + 1) as f64) * settings.bin_width).min(settings.horizon))
            .collect();
        let mut alive = vec![0usize; bins];
        let mut energy = vec![0.0; bins];
        let mut loss_times = Vec::new();
        let (mut trapped, mut escaped, mut stuck, mut aborted) = (0, 0, 0, 0);
        let mut fallbacks = 0;
        let mut bounces = 0u64;
        let (mut kin_sum, mut kin_n) = (0.0, 0usize);

        for o in outcomes {
            match o.status {
                Status::TrappedAtHorizon => trapped += 1,
                Status::Escaped => escaped += 1,
                Status::Stuck => stuck += 1,
                Status::NumericAbort => aborted += 1,
            }
            if !o.is_trapped() {
                loss_times.push(o.t_end);
            }
            fallbacks += o.noise_fallbacks;
            bounces += o.bounce_count as u64;
            for (b, &end) in times.iter().enumerate() {
                let inside = o.is_trapped() || o.t_end > end + 1e-9 * settings.dt;
                if !inside {
                    break;
                }
                alive[b] += 1;
                energy[b] += o.bin_energy[b];
            }
            if let Some(k) = o.late_kinetic_energy {
                kin_sum += k;
                kin_n += 1;
            }
        }
        loss_times.sort_by(f64::total_cmp);
        EnsembleStats {
            n_traj: n,
            seed,
            p_trapped: alive.iter().map(|&a| a as f64 / n as f64).collect(),
            e_mech: alive
                .iter()
                .zip(&energy)
                .map(|(&a, &e)| if a > 0 { e / a as f64 } else { f64::NAN })
                .collect(),
            times,
            e_kin_final: if kin_n > 0 { kin_sum / kin_n as f64 } else { f64::NAN },
            n_trapped: trapped,
            n_escaped: escaped,
            n_stuck: stuck,
            n_aborted: aborted,
            mean_bounces: bounces as f64 / n as f64,
            noise_fallbacks: fallbacks,
            loss_times,
            outcomes: outcomes.iter().map(OutcomeRecord::from).collect(),
        }
    }

    /// Fraction of trajectories still inside at time `t` (right-continuous).
    pub fn trapped_fraction_at(&self, t: f64) -> f64 {
        let lost = self.loss_times.partition_point(|&lt| lt <= t);
        1.0 - lost as f64 / self.n_traj as f64
    }

    /// Trapping probability at the horizon.
    pub fn plateau(&self) -> f64 {
        self.n_trapped as f64 / self.n_traj as f64
    }

    /// Binomial standard error of [`plateau`](Self::plateau).
    pub fn plateau_std_error(&self) -> f64 {
        let p = self.plateau();
        (p * (1.0 - p) / self.n_traj as f64).sqrt()
    }
}

/// Single trajectory with a freshly characterized trap.
pub fn run_trajectory(
    ic: &InitialCondition,
    model: &TrapModel,
    settings: SimulationSettings,
    seed: u64,
    record_stride: Option<u64>,
) -> Result<TrajectoryOutcome, EnsembleError> {
    let sim = Simulator::new(*model, settings)?;
    ic.validate(sim.trap())?;
    let mut rng = trajectory_rng(seed, 0);
    Ok(sim.run_trajectory(ic, &mut rng, record_stride))
}

pub fn run_ensemble(
    n_traj: usize,
    ic: &InitialCondition,
    model: &TrapModel,
    settings: SimulationSettings,
    master_seed: u64,
    workers: usize,
) -> Result<EnsembleStats, EnsembleError> {
    Simulator::new(*model, settings)?.run_ensemble(n_traj, ic, master_seed, workers)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sim(settings: SimulationSettings) -> Simulator {
        Simulator::new(TrapModel::paper_default(), settings).unwrap()
    }

    fn state(x: f64, p: f64) -> SystemState {
        SystemState {
            x,
            p,
            alpha: [Complex64::new(0.0, 0.0); 2],
            t: 0.0,
        }
    }

    #[test]
    fn boundary_classes() {
        let t = Thresholds::default();
        assert_eq!(classify_boundary(&state(10.0, 1.0), &t), Boundary::Escaped);
        assert_eq!(classify_boundary(&state(10.0, -1.0), &t), Boundary::Inside);
        assert_eq!(classify_boundary(&state(0.05, 1.0), &t), Boundary::Stuck);
        assert_eq!(classify_boundary(&state(1.0, -1.0), &t), Boundary::Inside);
    }

    #[test]
    fn mechanical_energy_limits() {
        let m = TrapModel::paper_default();
        let trap = characterize_trap(&m).unwrap();
        let at_min = SystemState::with_steady_fields(&m, trap.x_min, 0.0);
        assert!((mechanical_energy(&m, &at_min) + trap.depth).abs() < 1e-12);
        let far = SystemState::with_steady_fields(&m, 1e4, 0.0);
        assert!(mechanical_energy(&m, &far).abs() < 1e-12);
    }

    #[test]
    fn drop_in_starts_on_outer_slope() {
        let s = sim(SimulationSettings::default());
        let ic = InitialCondition::drop_in(s.model(), s.trap());
        let Distribution::Fixed { value: x0 } = ic.x0 else {
            panic!("fixed start expected")
        };
        assert!(x0 > s.trap().x_min);
        let u = potential(s.model(), x0);
        assert!((u + DROP_DEPTH_FRACTION * s.trap().depth).abs() < 1e-9);
        assert!(ic.validate(s.trap()).is_ok());
        assert!(InitialCondition::fixed(0.05, 0.0).validate(s.trap()).is_err());
        let gaussian = InitialCondition {
            x0: Distribution::Gaussian { mean: 2.0, std_dev: 0.1 },
            ..ic
        };
        assert!(gaussian.validate(s.trap()).is_err());
    }

    #[test]
    fn distributions_sample_within_support() {
        let mut rng = trajectory_rng(1, 2);
        let u = Distribution::Uniform { low: 1.0, high: 2.0 };
        for _ in 0..1000 {
            let v = u.sample(&mut rng);
            assert!((1.0..2.0).contains(&v));
        }
        assert_eq!(Distribution::fixed(3.5).sample(&mut rng), 3.5);
        let g = Distribution::Gaussian { mean: -1.0, std_dev: 0.0 };
        assert_eq!(g.sample(&mut rng), -1.0);
    }

    #[test]
    fn settings_are_validated() {
        let bad = SimulationSettings {
            dt: -1.0,
            ..Default::default()
        };
        assert!(matches!(
            Simulator::new(TrapModel::paper_default(), bad),
            Err(EnsembleError::Settings(_))
        ));
        let big = SimulationSettings {
            dt: 0.5,
            ..Default::default()
        };
        assert!(matches!(
            Simulator::new(TrapModel::paper_default(), big),
            Err(EnsembleError::Step(SdeError::StepTooLarge { .. }))
        ));
    }

    #[test]
    fn short_run_records_series_and_bins() {
        let settings = SimulationSettings {
            horizon: 120.0,
            ..Default::default()
        };
        let s = sim(settings);
        let ic = InitialCondition::drop_in(s.model(), s.trap());
        let mut rng = trajectory_rng(7, 0);
        let o = s.run_trajectory(&ic, &mut rng, Some(200));
        assert_eq!(o.status, Status::TrappedAtHorizon);
        assert_eq!(o.series.len(), 1 + 24000 / 200);
        assert_eq!(o.bin_energy.len(), 3);
        assert!((o.t_end - 120.0).abs() < 1e-9);
        assert!(o.late_kinetic_energy.is_some());

        let long_stride = s.run_trajectory(&ic, &mut trajectory_rng(7, 0), Some(10_000_000));
        assert!(long_stride.series.is_empty());
        assert_eq!(long_stride.final_state, o.final_state);
    }

    #[test]
    fn single_trajectory_ensemble_matches_outcome() {
        let settings = SimulationSettings {
            horizon: 400.0,
            ..Default::default()
        };
        let s = sim(settings);
        let ic = InitialCondition::drop_in(s.model(), s.trap());
        let stats = s.run_ensemble(1, &ic, 42, 1).unwrap();
        let o = s.run_trajectory(&ic, &mut trajectory_rng(42, 0), None);
        assert_eq!(stats.n_traj, 1);
        assert_eq!(stats.plateau(), if o.is_trapped() { 1.0 } else { 0.0 });
        assert_eq!(stats.mean_bounces, o.bounce_count as f64);
        if o.is_trapped() {
            assert_eq!(stats.e_kin_final, o.late_kinetic_energy.unwrap());
            assert_eq!(stats.e_mech, o.bin_energy);
        }
    }

    #[test]
    fn aggregation_counts_trapped_per_bin() {
        let settings = SimulationSettings {
            horizon: 100.0,
            bin_width: 50.0,
            ..Default::default()
        };
        let base = TrajectoryOutcome {
            status: Status::TrappedAtHorizon,
            t_end: 100.0,
            bounce_count: 2,
            final_state: state(1.0, 0.0),
            final_energy: -1.0,
            x_closest: 0.3,
            outer_turning_points: vec![],
            series: vec![],
            bin_energy: vec![-1.0, -2.0],
            late_kinetic_energy: Some(0.5),
            noise_fallbacks: 0,
        };
        let lost = TrajectoryOutcome {
            status: Status::Escaped,
            t_end: 70.0,
            bin_energy: vec![-3.0],
            late_kinetic_energy: None,
            bounce_count: 1,
            ..base.clone()
        };
        let stats = EnsembleStats::aggregate(&[base, lost], &settings, 9);
        assert_eq!(stats.times, vec![50.0, 100.0]);
        assert_eq!(stats.p_trapped, vec![1.0, 0.5]);
        assert_eq!(stats.e_mech, vec![-2.0, -2.0]);
        assert_eq!(stats.e_kin_final, 0.5);
        assert_eq!(stats.trapped_fraction_at(69.0), 1.0);
        assert_eq!(stats.trapped_fraction_at(70.0), 0.5);
        assert_eq!(stats.mean_bounces, 1.5);
        assert_eq!((stats.n_trapped, stats.n_escaped), (1, 1));
    }

    #[test]
    fn zero_trajectories_rejected() {
        let s = sim(SimulationSettings {
            horizon: 10.0,
            ..Default::default()
        });
        let ic = InitialCondition::drop_in(s.model(), s.trap());
        assert!(s.run_ensemble(0, &ic, 1, 1).is_err());
    }
}
