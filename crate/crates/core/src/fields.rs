//! Static analysis of the two evanescent modes.
//!
//! The red mode decays as e^{-x}, the blue mode as e^{-2x} (x in units of 1/k).
//! With the cavity fields held at their position-dependent steady state the
//! dipole force is conservative, and its line integral is the adiabatic
//! potential used for trap characterization and for the mechanical energy.

use std::io::{self, Write};

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::optimize::brent_minimize;
use crate::params::{Mode, TrapModel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("position x = {0} lies inside the dielectric")]
    InsideDielectric(f64),
    #[error("no trap: {0}")]
    NoTrap(String),
    #[error("position grid is empty")]
    EmptyGrid,
    #[error("position grid must be strictly increasing and positive (index {0})")]
    BadGrid(usize),
}

/// Value and spatial derivative of a mode function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeValue {
    pub value: f64,
    pub derivative: f64,
}

/// Mode function and its derivative, without range checking.
#[inline]
pub fn mode_profile(mode: Mode, x: f64) -> ModeValue {
    let d = mode.decay();
    let value = (-d * x).exp();
    ModeValue {
        value,
        derivative: -d * value,
    }
}

/// Mode function f(x) for x ≥ 0 (the vacuum side of the interface).
pub fn mode_f(mode: Mode, x: f64) -> Result<ModeValue, FieldError> {
    if x < 0.0 || x.is_nan() {
        return Err(FieldError::InsideDielectric(x));
    }
    Ok(mode_profile(mode, x))
}

/// Stationary photon number of `mode` when the atom couples with strength `u = f²`.
#[inline]
pub fn photon_number(model: &TrapModel, mode: Mode, u: f64) -> f64 {
    let i = mode.index();
    let loss = model.kappa + model.gamma0 * u;
    let detuning = model.delta_c - model.sign[i] * model.u0 * u;
    model.eta[i] * model.eta[i] / (loss * loss + detuning * detuning)
}

/// Steady-state field amplitude η / [κ + Γ₀f² − i(Δ_C − s U₀ f²)] at position x.
pub fn steady_state_alpha(model: &TrapModel, mode: Mode, x: f64) -> Complex64 {
    let u = mode_profile(mode, x).value.powi(2);
    let i = mode.index();
    let denominator = Complex64::new(
        model.kappa + model.gamma0 * u,
        -(model.delta_c - model.sign[i] * model.u0 * u),
    );
    Complex64::new(model.eta[i], 0.0) / denominator
}

/// ∫₀ᵘ n(u′) du′ for one mode.
///
/// The photon number is η² over a quadratic a u² + b u + c whose discriminant
/// 4ac − b² = 4(Γ₀Δ_C + sκU₀)² is a perfect square, so the integral is an
/// arctangent. The difference of arctangents is folded into one `atan2` to keep
/// full precision when the light shift is small.
pub fn integrated_photon_number(model: &TrapModel, mode: Mode, u: f64) -> f64 {
    let i = mode.index();
    let s = model.sign[i];
    let (kappa, delta, u0, g0) = (model.kappa, model.delta_c, model.u0, model.gamma0);
    let a = g0 * g0 + u0 * u0;
    let b = 2.0 * (kappa * g0 - s * delta * u0);
    let c = kappa * kappa + delta * delta;
    let disc = 2.0 * (g0 * delta + s * kappa * u0).abs();
    let eta2 = model.eta[i] * model.eta[i];
    if disc > 1e-9 * c {
        let y = 2.0 * a * u * disc;
        let x = disc * disc + b * (2.0 * a * u + b);
        eta2 * 2.0 / disc * y.atan2(x)
    } else {
        eta2 * gauss_legendre(|v| 1.0 / ((a * v + b) * v + c), 0.0, u)
    }
}

// 16-point Gauss-Legendre on [lo, hi].
fn gauss_legendre<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> f64 {
    const NODES: [f64; 8] = [
        0.095_012_509_837_637_44,
        0.281_603_550_779_258_9,
        0.458_016_777_657_227_4,
        0.617_876_244_402_643_8,
        0.755_404_408_355_003,
        0.865_631_202_387_831_8,
        0.944_575_023_073_232_6,
        0.989_400_934_991_649_9,
    ];
    const WEIGHTS: [f64; 8] = [
        0.189_450_610_455_068_5,
        0.182_603_415_044_923_6,
        0.169_156_519_395_002_5,
        0.149_595_988_816_576_7,
        0.124_628_971_255_533_9,
        0.095_158_511_682_492_8,
        0.062_253_523_938_647_9,
        0.027_152_459_411_754_1,
    ];
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut sum = 0.0;
    for (node, weight) in NODES.iter().zip(WEIGHTS) {
        sum += weight * (f(mid - half * node) + f(mid + half * node));
    }
    sum * half
}

/// Van der Waals surface potential −c₃/x³, ħγ.
#[inline]
pub fn vdw_potential(model: &TrapModel, x: f64) -> f64 {
    if model.c3 == 0.0 {
        0.0
    } else {
        -model.c3 / (x * x * x)
    }
}

/// Contribution of one mode to the adiabatic potential, ħγ.
pub fn mode_potential(model: &TrapModel, mode: Mode, x: f64) -> f64 {
    let u = mode_profile(mode, x).value.powi(2);
    model.sign[mode.index()] * model.u0 * (integrated_photon_number(model, mode, u) - 0.5 * u)
}

/// Adiabatic potential without the range check.
pub fn potential(model: &TrapModel, x: f64) -> f64 {
    mode_potential(model, Mode::Red, x) + mode_potential(model, Mode::Blue, x) + vdw_potential(model, x)
}

/// Adiabatic potential U(x) in ħγ, including Van der Waals, with U(∞) = 0.
pub fn adiabatic_potential(model: &TrapModel, x: f64) -> Result<f64, FieldError> {
    if !(x > 0.0) {
        return Err(FieldError::InsideDielectric(x));
    }
    Ok(potential(model, x))
}

/// −dU/dx in ħγ·k: the dipole force with both fields at their local steady state.
pub fn adiabatic_force(model: &TrapModel, x: f64) -> f64 {
    let mut force = -3.0 * model.c3 / x.powi(4);
    for mode in Mode::BOTH {
        let f = mode_profile(mode, x);
        let u = f.value * f.value;
        let du_dx = 2.0 * f.value * f.derivative;
        let n = photon_number(model, mode, u);
        force -= model.sign[mode.index()] * model.u0 * (n - 0.5) * du_dx;
    }
    force
}

/// Saturation of the transition driven by `mode` at position x.
pub fn saturation(model: &TrapModel, mode: Mode, x: f64) -> f64 {
    let u = mode_profile(mode, x).value.powi(2);
    photon_number(model, mode, u) * u / model.n_sat
}

/// Geometry and strength of the adiabatic trap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrapProfile {
    /// Position of the potential minimum, 1/k.
    pub x_min: f64,
    /// −U(x_min), ħγ.
    pub depth: f64,
    /// Position of the inner barrier maximum, 1/k.
    pub x_barrier: f64,
    pub barrier_height: f64,
    /// Inner classical turning point at zero mechanical energy, 1/k.
    pub x_inner: f64,
    /// Harmonic frequency at the minimum, s⁻¹.
    pub omega_trap: f64,
    /// Same, in units of γ.
    pub omega_trap_internal: f64,
    /// Largest single-transition saturation over positions reachable at zero energy.
    pub sat_max: f64,
}

pub const SCAN_START: f64 = 0.01;
pub const SCAN_END: f64 = 10.0;
const COARSE_STEP: f64 = 1e-2;
const LOCATE_TOL: f64 = 1e-8;
const CURVATURE_STEP: f64 = 1e-3;
const SATURATION_STEP: f64 = 1e-3;

fn coarse_grid() -> Vec<f64> {
    let n = ((SCAN_END - SCAN_START) / COARSE_STEP).round() as usize;
    (0..=n).map(|i| SCAN_START + i as f64 * COARSE_STEP).collect()
}

/// Locates the trap minimum, the inner barrier and the harmonic frequency.
///
/// Both extrema are bracketed by a coarse scan before the Brent refinement, so
/// the Van der Waals divergence at the surface never masquerades as the minimum.
pub fn characterize_trap(model: &TrapModel) -> Result<TrapProfile, FieldError> {
    let grid = coarse_grid();
    let values: Vec<f64> = grid.iter().map(|&x| potential(model, x)).collect();

    let min_index = (1..grid.len() - 1)
        .filter(|&i| values[i] < 0.0 && values[i] < values[i - 1] && values[i] <= values[i + 1])
        .min_by(|&i, &j| values[i].total_cmp(&values[j]))
        .ok_or_else(|| {
            FieldError::NoTrap("adiabatic potential has no interior minimum below zero".into())
        })?;
    let (x_min, u_min) = brent_minimize(
        |x| potential(model, x),
        grid[min_index - 1],
        grid[min_index + 1],
        LOCATE_TOL,
        500,
    );

    let barrier_index = (1..min_index)
        .filter(|&i| values[i] > values[i - 1] && values[i] >= values[i + 1])
        .max_by(|&i, &j| values[i].total_cmp(&values[j]));
    let (x_barrier, barrier_height) = match barrier_index {
        Some(i) => {
            let (x, neg) = brent_minimize(
                |x| -potential(model, x),
                grid[i - 1],
                grid[i + 1],
                LOCATE_TOL,
                500,
            );
            (x, -neg)
        }
        // Without surface attraction the repulsive wall rises all the way to x = 0.
        None => (0.0, potential(model, 0.0)),
    };

    let h = CURVATURE_STEP;
    let curvature =
        (potential(model, x_min + h) - 2.0 * u_min + potential(model, x_min - h)) / (h * h);
    let omega_trap_internal = (model.epsilon * curvature).max(0.0).sqrt();

    let x_inner = if barrier_height > 0.0 {
        bisect(|x| potential(model, x), x_barrier, x_min, 1e-12)
    } else {
        x_barrier
    };
    let mut sat_max: f64 = 0.0;
    let mut x = x_inner;
    while x <= SCAN_END {
        for mode in Mode::BOTH {
            sat_max = sat_max.max(saturation(model, mode, x));
        }
        x += SATURATION_STEP;
    }

    Ok(TrapProfile {
        x_min,
        depth: -u_min,
        x_barrier,
        barrier_height,
        x_inner,
        omega_trap: model.units.frequency_to_si(omega_trap_internal),
        omega_trap_internal,
        sat_max,
    })
}

// Root of a function with f(lo) > 0 > f(hi).
fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let f_lo_positive = f(lo) > 0.0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == f_lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Position on the outer slope where U(x) = `fraction`·U(x_min).
pub fn outer_slope_position(model: &TrapModel, trap: &TrapProfile, fraction: f64) -> f64 {
    let target = -fraction * trap.depth;
    let mut hi = trap.x_min;
    while potential(model, hi) < target && hi < 1e3 {
        hi *= 1.5;
    }
    bisect(|x| target - potential(model, x), trap.x_min, hi, 1e-12)
}

/// One row of a potential scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanRow {
    pub x: f64,
    pub u_total: f64,
    pub u_vdw: f64,
    pub n_red: f64,
    pub n_blue: f64,
}

pub fn potential_scan(model: &TrapModel, grid: &[f64]) -> Result<Vec<ScanRow>, FieldError> {
    if grid.is_empty() {
        return Err(FieldError::EmptyGrid);
    }
    for (i, &x) in grid.iter().enumerate() {
        if !(x > 0.0) || (i > 0 && x <= grid[i - 1]) {
            return Err(FieldError::BadGrid(i));
        }
    }
    Ok(grid
        .iter()
        .map(|&x| ScanRow {
            x,
            u_total: potential(model, x),
            u_vdw: vdw_potential(model, x),
            n_red: steady_state_alpha(model, Mode::Red, x).norm_sqr(),
            n_blue: steady_state_alpha(model, Mode::Blue, x).norm_sqr(),
        })
        .collect())
}

/// Evenly spaced grid `start, start + step, …` up to and including `end`.
pub fn uniform_grid(start: f64, end: f64, step: f64) -> Vec<f64> {
    let n = ((end - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| start + i as f64 * step).collect()
}

pub const SCAN_HEADER: [&str; 5] = ["x", "U_total", "U_vdw", "n_red", "n_blue"];

/// Writes scan rows as comma-separated text with a header row.
pub fn write_scan<W: Write>(rows: &[ScanRow], mut out: W) -> io::Result<()> {
    writeln!(out, "{}", SCAN_HEADER.join(","))?;
    for r in rows {
        writeln!(
            out,
            "{:.6},{:.10e},{:.10e},{:.10e},{:.10e}",
            r.x, r.u_total, r.u_vdw, r.n_red, r.n_blue
        )?;
    }
    Ok(())
}
