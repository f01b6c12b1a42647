//! Trapped fraction for a ladder of step sizes on shared Brownian paths.
//!
//! `H` sets the horizon (1/γ), `NT` the ensemble size and `KS` the step
//! multiples of 1.25e-3 to run, coarsest first.

use evtrap_core::ensemble::{InitialCondition, SimulationSettings, Simulator, Status};
use evtrap_core::TrapModel;

fn main() {
    let m = TrapModel::paper_default();
    let horizon: f64 = std::env::var("H").map(|v| v.parse().unwrap()).unwrap_or(1000.0);
    let n: usize = std::env::var("NT").map(|v| v.parse().unwrap()).unwrap_or(1000);
    let base = 0.00125;
    let mut prev: Option<Vec<bool>> = None;
    let ks: Vec<u32> = std::env::var("KS").map(|v| v.split(',').map(|s| s.parse().unwrap()).collect()).unwrap_or(vec![8, 4, 2, 1]);
    for k in ks {
        let settings = SimulationSettings {
            dt: base * k as f64,
            horizon,
            brownian_substeps: k,
            ..SimulationSettings::default()
        };
        let sim = Simulator::new(m, settings).unwrap();
        let ic = InitialCondition::drop_in(&m, sim.trap());
        let stats = sim.run_ensemble(n, &ic, 20_240_613, 1).unwrap();
        let trapped: Vec<bool> = stats.outcomes.iter().map(|o| o.status == Status::TrappedAtHorizon).collect();
        let disc = prev.as_ref().map(|p| p.iter().zip(&trapped).filter(|(a, b)| a != b).count());
        println!(
            "dt {:.5} p {:.4} se {:.4} stuck {} fallbacks {} discordant_vs_prev {:?}",
            base * k as f64,
            stats.plateau(),
            stats.plateau_std_error(),
            stats.n_stuck,
            stats.noise_fallbacks,
            disc
        );
        prev = Some(trapped);
    }
}
