//! Coupled atom-field equations of motion and their integrators.
//!
//! Internal units throughout: x in 1/k, p in ħk, t in 1/γ, rates in γ.
//!
//! ```text
//! dx/dt  = ε p
//! dp/dt  = −Σᵢ sᵢ U₀ (|αᵢ|² − ½) d(fᵢ²)/dx − 3c₃/x⁴ + ξ_p
//! dαᵢ/dt = ηᵢ + [i(Δ_C − sᵢU₀fᵢ²) − (κ + Γ₀fᵢ²)] αᵢ + ξ_αᵢ
//! ```
//!
//! The noise vector is ordered (ξ_p, Re ξ_αr, Im ξ_αr, Re ξ_αb, Im ξ_αb).
//! Momentum noise is correlated with the field quadratures; the two modes are
//! independent of each other.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

use crate::params::{Mode, TrapModel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SdeError {
    #[error("time step {dt} is too large: dt * max rate = {product:.3} exceeds {limit}")]
    StepTooLarge { dt: f64, product: f64, limit: f64 },
    #[error("time step must be positive and finite, got {0}")]
    BadStep(f64),
}

/// Largest admissible product of the step and the fastest rate in the system.
pub const MAX_RATE_STEP_PRODUCT: f64 = 0.1;

/// Atom phase-space point plus the two cavity amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SystemState {
    pub x: f64,
    pub p: f64,
    /// Field amplitudes indexed by [`Mode::index`].
    pub alpha: [Complex64; 2],
    pub t: f64,
}

impl SystemState {
    /// State with both fields relaxed to their local steady state.
    pub fn with_steady_fields(model: &TrapModel, x: f64, p: f64) -> Self {
        SystemState {
            x,
            p,
            alpha: Mode::BOTH.map(|m| crate::fields::steady_state_alpha(model, m, x)),
            t: 0.0,
        }
    }

    pub fn photon_number(&self, mode: Mode) -> f64 {
        self.alpha[mode.index()].norm_sqr()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite()
            && self.p.is_finite()
            && self.alpha.iter().all(|a| a.re.is_finite() && a.im.is_finite())
    }
}

/// Time derivative of a [`SystemState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub dx: f64,
    pub dp: f64,
    pub dalpha: [Complex64; 2],
}

/// Deterministic right-hand side of the coupled equations.
#[inline]
pub fn drift(model: &TrapModel, state: &SystemState) -> StateDerivative {
    let x = state.x;
    let x2 = x * x;
    let mut dp = -3.0 * model.c3 / (x2 * x2);
    let mut dalpha = [Complex64::new(0.0, 0.0); 2];
    let red = (-x).exp();
    for (i, f) in [red, red * red].into_iter().enumerate() {
        let u = f * f;
        let decay = (i + 1) as f64;
        let du_dx = -2.0 * decay * u;
        let alpha = state.alpha[i];
        let s = model.sign[i];
        dp -= s * model.u0 * (alpha.norm_sqr() - 0.5) * du_dx;
        let rate = Complex64::new(
            -(model.kappa + model.gamma0 * u),
            model.delta_c - s * model.u0 * u,
        );
        dalpha[i] = model.eta[i] + rate * alpha;
    }
    StateDerivative {
        dx: model.epsilon * state.p,
        dp,
        dalpha,
    }
}

fn advance(state: &SystemState, d: &StateDerivative, h: f64) -> SystemState {
    SystemState {
        x: state.x + h * d.dx,
        p: state.p + h * d.dp,
        alpha: [state.alpha[0] + d.dalpha[0] * h, state.alpha[1] + d.dalpha[1] * h],
        t: state.t + h,
    }
}

/// One classical fourth-order Runge–Kutta step of the noiseless dynamics.
pub fn step_deterministic(model: &TrapModel, state: &SystemState, dt: f64) -> SystemState {
    let k1 = drift(model, state);
    let k2 = drift(model, &advance(state, &k1, 0.5 * dt));
    let k3 = drift(model, &advance(state, &k2, 0.5 * dt));
    let k4 = drift(model, &advance(state, &k3, dt));
    let w = dt / 6.0;
    let combine = |a: f64, b: f64, c: f64, d: f64| w * (a + 2.0 * b + 2.0 * c + d);
    let mut alpha = state.alpha;
    for (i, a) in alpha.iter_mut().enumerate() {
        *a += (k1.dalpha[i] + k2.dalpha[i] * 2.0 + k3.dalpha[i] * 2.0 + k4.dalpha[i]) * w;
    }
    SystemState {
        x: state.x + combine(k1.dx, k2.dx, k3.dx, k4.dx),
        p: state.p + combine(k1.dp, k2.dp, k3.dp, k4.dp),
        alpha,
        t: state.t + dt,
    }
}

pub const P: usize = 0;
pub const RE_RED: usize = 1;
pub const IM_RED: usize = 2;
pub const RE_BLUE: usize = 3;
pub const IM_BLUE: usize = 4;

/// Diffusion matrix of (ξ_p, Re ξ_αr, Im ξ_αr, Re ξ_αb, Im ξ_αb) per unit time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseCovariance(pub [[f64; 5]; 5]);

pub fn noise_covariance(model: &TrapModel, state: &SystemState) -> NoiseCovariance {
    let mut c = [[0.0; 5]; 5];
    let red = (-state.x).exp();
    for (i, f) in [red, red * red].into_iter().enumerate() {
        let decay = (i + 1) as f64;
        let df = -decay * f;
        let u = f * f;
        let alpha = state.alpha[i];
        let excess = (alpha.norm_sqr() - 0.5).max(0.0);
        let k_opt = model.k_opt[i];
        c[P][P] += 2.0 * model.gamma0 * excess * (df * df + k_opt * k_opt * model.u2_bar * u);

        let quadrature = model.field_noise_scale * 0.25 * (model.kappa + model.gamma0 * u);
        let (re, im) = (1 + 2 * i, 2 + 2 * i);
        c[re][re] = quadrature;
        c[im][im] = quadrature;
        // ⟨ξ_α ξ_p⟩ = iΓ₀ α f f′
        let g = model.gamma0 * f * df;
        c[re][P] = -g * alpha.im;
        c[P][re] = c[re][P];
        c[im][P] = g * alpha.re;
        c[P][im] = c[im][P];
    }
    NoiseCovariance(c)
}

// Factorization order: field quadratures first so that a vanishing momentum
// variance (empty fields) does not produce a zero leading pivot.
const ORDER: [usize; 5] = [RE_RED, IM_RED, RE_BLUE, IM_BLUE, P];

impl NoiseCovariance {
    pub fn zero() -> Self {
        NoiseCovariance([[0.0; 5]; 5])
    }

    pub fn is_symmetric(&self) -> bool {
        (0..5).all(|i| (0..5).all(|j| self.0[i][j] == self.0[j][i]))
    }

    /// Lower-triangular factor L with L Lᵀ = C, in the permuted [`ORDER`].
    /// Zero pivots are accepted when the rest of their column vanishes as well
    /// (semidefinite matrices); `None` signals an indefinite matrix.
    pub fn cholesky(&self) -> Option<[[f64; 5]; 5]> {
        let a = |i: usize, j: usize| self.0[ORDER[i]][ORDER[j]];
        let scale = (0..5).map(|i| a(i, i).abs()).fold(0.0, f64::max);
        let tiny = 1e-14 * scale;
        if let Some(l) = self.cholesky_uncorrelated_fields(tiny) {
            return l;
        }
        let mut l = [[0.0; 5]; 5];
        for j in 0..5 {
            let mut d = a(j, j);
            for k in 0..j {
                d -= l[j][k] * l[j][k];
            }
            if d < -tiny {
                return None;
            }
            if d <= tiny {
                for i in j + 1..5 {
                    let mut s = a(i, j);
                    for k in 0..j {
                        s -= l[i][k] * l[j][k];
                    }
                    if s.abs() > 1e-7 * scale.max(f64::MIN_POSITIVE) {
                        return None;
                    }
                }
                continue;
            }
            let pivot = d.sqrt();
            l[j][j] = pivot;
            for i in j + 1..5 {
                let mut s = a(i, j);
                for k in 0..j {
                    s -= l[i][k] * l[j][k];
                }
                l[i][j] = s / pivot;
            }
        }
        Some(l)
    }

    /// Shortcut for the usual case of mutually uncorrelated quadratures with
    /// positive variance. Performs the same floating-point operations as the
    /// general loop, so the factor is bit-identical. `None` means the general
    /// loop is needed.
    fn cholesky_uncorrelated_fields(&self, tiny: f64) -> Option<Option<[[f64; 5]; 5]>> {
        let c = &self.0;
        let fields = &ORDER[..4];
        for (n, &i) in fields.iter().enumerate() {
            if c[i][i] <= tiny || fields[n + 1..].iter().any(|&j| c[i][j] != 0.0 || c[j][i] != 0.0) {
                return None;
            }
        }
        let mut l = [[0.0; 5]; 5];
        let mut d = c[P][P];
        for (j, &q) in fields.iter().enumerate() {
            let pivot = c[q][q].sqrt();
            l[j][j] = pivot;
            l[4][j] = c[P][q] / pivot;
            d -= l[4][j] * l[4][j];
        }
        if d < -tiny {
            return Some(None);
        }
        if d > tiny {
            l[4][4] = d.sqrt();
        }
        Some(Some(l))
    }

    /// Variance of ξ_p left after conditioning on the field quadratures.
    pub fn momentum_schur_complement(&self) -> Option<f64> {
        let c = &self.0;
        let mut schur = c[P][P];
        for q in [RE_RED, IM_RED, RE_BLUE, IM_BLUE] {
            if c[q][q] <= 0.0 {
                return None;
            }
            schur -= c[q][P] * c[q][P] / c[q][q];
        }
        Some(schur)
    }

    pub fn is_positive_semidefinite(&self) -> bool {
        self.is_symmetric() && self.cholesky().is_some()
    }

    /// Same matrix with the momentum-field cross terms removed.
    pub fn block_diagonal(&self) -> Self {
        let mut c = self.0;
        for q in 1..5 {
            c[q][P] = 0.0;
            c[P][q] = 0.0;
        }
        NoiseCovariance(c)
    }
}

/// Draws correlated Gaussian increments and counts factorization fallbacks.
#[derive(Debug, Clone, Default)]
pub struct NoiseSampler {
    pub fallbacks: u64,
}

impl NoiseSampler {
    pub fn new() -> Self {
        Self::default()
    }

    /// Increment with covariance `cov · dt`.
    pub fn sample<R: Rng + ?Sized>(&mut self, cov: &NoiseCovariance, dt: f64, rng: &mut R) -> [f64; 5] {
        self.sample_substeps(cov, dt, rng, 1)
    }

    /// Like [`sample`](Self::sample), but each unit normal is built from
    /// `substeps` finer ones. A run at step `m·dt` with `substeps = m` then sees
    /// the same Brownian path as a run at `dt` drawing from the same stream.
    pub fn sample_substeps<R: Rng + ?Sized>(
        &mut self,
        cov: &NoiseCovariance,
        dt: f64,
        rng: &mut R,
        substeps: u32,
    ) -> [f64; 5] {
        let l = match cov.cholesky() {
            Some(l) => l,
            None => {
                self.fallbacks += 1;
                cov.block_diagonal()
                    .cholesky()
                    .unwrap_or_else(|| diagonal_root(cov))
            }
        };
        let z = standard_normals(rng, substeps);
        let scale = dt.sqrt();
        let mut out = [0.0; 5];
        for i in 0..5 {
            let mut s = 0.0;
            for k in 0..=i {
                s += l[i][k] * z[k];
            }
            out[ORDER[i]] = s * scale;
        }
        out
    }
}

fn diagonal_root(cov: &NoiseCovariance) -> [[f64; 5]; 5] {
    let mut l = [[0.0; 5]; 5];
    for i in 0..5 {
        l[i][i] = cov.0[ORDER[i]][ORDER[i]].max(0.0).sqrt();
    }
    l
}

#[inline]
fn standard_normals<R: Rng + ?Sized>(rng: &mut R, substeps: u32) -> [f64; 5] {
    let mut z = [0.0; 5];
    if substeps <= 1 {
        for v in &mut z {
            *v = rng.sample(StandardNormal);
        }
        return z;
    }
    // Substep-major order, matching a fine run that draws five normals per step.
    for _ in 0..substeps {
        for v in &mut z {
            *v += rng.sample::<f64, _>(StandardNormal);
        }
    }
    let norm = (substeps as f64).sqrt().recip();
    z.map(|v| v * norm)
}

/// Checks `dt · max(κ, |Δ_C|, ω_trap) ≤ 0.1`.
pub fn check_step(model: &TrapModel, dt: f64, omega_trap: f64) -> Result<(), SdeError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SdeError::BadStep(dt));
    }
    let rate = model.kappa.max(model.delta_c.abs()).max(omega_trap);
    let product = dt * rate;
    if product > MAX_RATE_STEP_PRODUCT {
        return Err(SdeError::StepTooLarge {
            dt,
            product,
            limit: MAX_RATE_STEP_PRODUCT,
        });
    }
    Ok(())
}

/// Itô step without the step-size check.
///
/// Drift and diffusion are evaluated at the start of the step and the noise is
/// added once. The position update uses the already-kicked momentum
/// (semi-implicit Euler), which keeps the explicit scheme from pumping energy
/// into the trap oscillation at a rate ω²·dt.
#[inline]
pub fn euler_maruyama_step<R: Rng + ?Sized>(
    model: &TrapModel,
    state: &SystemState,
    dt: f64,
    sampler: &mut NoiseSampler,
    rng: &mut R,
    substeps: u32,
) -> SystemState {
    let d = drift(model, state);
    let cov = noise_covariance(model, state);
    let w = sampler.sample_substeps(&cov, dt, rng, substeps);
    let p = state.p + d.dp * dt + w[P];
    SystemState {
        x: state.x + model.epsilon * p * dt,
        p,
        alpha: [
            state.alpha[0] + d.dalpha[0] * dt + Complex64::new(w[RE_RED], w[IM_RED]),
            state.alpha[1] + d.dalpha[1] * dt + Complex64::new(w[RE_BLUE], w[IM_BLUE]),
        ],
        t: state.t + dt,
    }
}

/// One stochastic step, after validating `dt` against the fastest rate.
/// `omega_trap` is the harmonic trap frequency in units of γ.
pub fn step_stochastic<R: Rng + ?Sized>(
    model: &TrapModel,
    state: &SystemState,
    dt: f64,
    omega_trap: f64,
    sampler: &mut NoiseSampler,
    rng: &mut R,
) -> Result<SystemState, SdeError> {
    check_step(model, dt, omega_trap)?;
    Ok(euler_maruyama_step(model, state, dt, sampler, rng, 1))
}
