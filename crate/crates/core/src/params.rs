//! Physical parameters, derived atom-field constants and the internal unit system.
//!
//! Everything the integrators touch lives in dimensionless units: time in 1/γ,
//! length in 1/k, momentum in ħk, energy in ħγ and frequencies in γ. The
//! [`TrapModel`] is the frozen, dimensionless view of a validated parameter set.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Atomic mass unit, kg.
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
/// Mass of ⁸⁵Rb, kg.
pub const RB85_MASS: f64 = 84.911_789_738 * ATOMIC_MASS_UNIT;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("parameter `{name}` = {value} is invalid: {reason}")]
    Invalid {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
}

fn invalid(name: &'static str, value: f64, reason: &'static str) -> ParamError {
    ParamError::Invalid {
        name,
        value,
        reason,
    }
}

/// Physical parameters in SI units.
///
/// `delta_a` is the magnitude of the atom-pump detuning; it enters with
/// opposite signs for the red and blue modes. `c3_vdw` is already
/// dimensionless (units of ħγ/k³).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub gamma: f64,
    pub kappa: f64,
    pub g: f64,
    pub delta_a: f64,
    pub delta_c: f64,
    pub eta_r: f64,
    pub eta_b: f64,
    pub k: f64,
    pub mass: f64,
    pub c3_vdw: f64,
    pub u2_bar: f64,
    pub k_opt_r: f64,
    pub k_opt_b: f64,
    /// Multiplier on the field-quadrature noise. With 1 the increment variance is
    /// ⟨ξ*ξ⟩ = (κ + Γ₀f²)/2 per unit time and an empty mode fluctuates by
    /// ⟨|δα|²⟩ = ¼; the default 2 gives the symmetric-ordered vacuum value ½.
    pub field_noise_scale: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        default_paper_params()
    }
}

/// The reference configuration: γ = 2×10⁷ s⁻¹, κ = γ/2, g = 2.5γ, Δ_A = 10³γ,
/// Δ_C = −0.8κ, 1/k = 0.3 µm, ⁸⁵Rb, pumps η_r = 60γ and η_b = 75γ.
pub fn default_paper_params() -> PhysicalParams {
    let gamma = 2.0e7;
    let kappa = 0.5 * gamma;
    PhysicalParams {
        gamma,
        kappa,
        g: 2.5 * gamma,
        delta_a: 1.0e3 * gamma,
        delta_c: -0.8 * kappa,
        // 1200 and 1500 in units of 10⁶ s⁻¹
        eta_r: 1200.0e6,
        eta_b: 1500.0e6,
        k: 1.0 / 0.3e-6,
        mass: RB85_MASS,
        c3_vdw: 5.0e-3,
        u2_bar: 0.4,
        k_opt_r: TWO_PI / 795.0e-9,
        k_opt_b: TWO_PI / 780.0e-9,
        field_noise_scale: 2.0,
    }
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        let positive = [
            ("gamma", self.gamma),
            ("kappa", self.kappa),
            ("k", self.k),
            ("mass", self.mass),
            ("k_opt_r", self.k_opt_r),
            ("k_opt_b", self.k_opt_b),
        ];
        for (name, value) in positive {
            if !value.is_finite() {
                return Err(invalid(name, value, "must be finite"));
            }
            if value <= 0.0 {
                return Err(invalid(name, value, "must be positive"));
            }
        }
        for (name, value) in [("eta_r", self.eta_r), ("eta_b", self.eta_b)] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(invalid(name, value, "must be non-negative"));
            }
        }
        // g = 0 is allowed: it describes an uncoupled atom (U₀ = Γ₀ = 0).
        if !(self.g.is_finite() && self.g >= 0.0) {
            return Err(invalid("g", self.g, "must be non-negative"));
        }
        if !self.delta_a.is_finite() {
            return Err(invalid("delta_a", self.delta_a, "must be finite"));
        }
        if !(self.delta_c.is_finite() && self.delta_c < 0.0) {
            return Err(invalid("delta_c", self.delta_c, "must be negative"));
        }
        if !(self.c3_vdw.is_finite() && self.c3_vdw >= 0.0) {
            return Err(invalid("c3_vdw", self.c3_vdw, "must be non-negative"));
        }
        if !(self.u2_bar > 0.0 && self.u2_bar <= 1.0) {
            return Err(invalid("u2_bar", self.u2_bar, "must lie in (0, 1]"));
        }
        if !(self.field_noise_scale.is_finite() && self.field_noise_scale >= 0.0) {
            return Err(invalid(
                "field_noise_scale",
                self.field_noise_scale,
                "must be non-negative",
            ));
        }
        Ok(())
    }
}

/// Quantities that follow from [`PhysicalParams`]. Rates are in s⁻¹.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedParams {
    /// Light shift per photon U₀.
    pub u0: f64,
    /// Scattering rate per photon Γ₀.
    pub gamma0: f64,
    /// Saturation photon number (Δ_A² + γ²)/(2g²).
    pub n_sat: f64,
    /// Recoil parameter ħk²/(Mγ).
    pub epsilon: f64,
    pub n_empty_r: f64,
    pub n_empty_b: f64,
    pub sign_r: f64,
    pub sign_b: f64,
}

/// Computes U₀, Γ₀ and the other derived constants.
///
/// A recoil parameter ε ≥ 0.1 is accepted but logged, since the semiclassical
/// treatment of the centre-of-mass motion degrades there.
pub fn derive(params: &PhysicalParams) -> Result<DerivedParams, ParamError> {
    params.validate()?;
    let PhysicalParams {
        gamma,
        kappa,
        g,
        delta_a,
        delta_c,
        ..
    } = *params;
    let atomic_denominator = delta_a * delta_a + gamma * gamma;
    let g2 = g * g;
    let cavity_denominator = delta_c * delta_c + kappa * kappa;
    let epsilon = HBAR * params.k * params.k / (params.mass * gamma);
    if epsilon >= 0.1 {
        log::warn!("recoil parameter epsilon = {epsilon:.3e} is not small; semiclassical motion is questionable");
    }
    Ok(DerivedParams {
        u0: g2 * delta_a / atomic_denominator,
        gamma0: g2 * gamma / atomic_denominator,
        n_sat: atomic_denominator / (2.0 * g2),
        epsilon,
        n_empty_r: params.eta_r * params.eta_r / cavity_denominator,
        n_empty_b: params.eta_b * params.eta_b / cavity_denominator,
        sign_r: Mode::Red.sign(),
        sign_b: Mode::Blue.sign(),
    })
}

/// Scale factors of the internal dimensionless system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UnitSystem {
    /// Unit of time, s (1/γ).
    pub time: f64,
    /// Unit of length, m (1/k).
    pub length: f64,
    /// Unit of momentum, kg·m/s (ħk).
    pub momentum: f64,
    /// Unit of energy, J (ħγ).
    pub energy: f64,
    /// Unit of frequency, s⁻¹ (γ).
    pub frequency: f64,
    /// Atomic mass, kg; needed for velocity conversion.
    pub mass: f64,
}

pub fn to_internal_units(params: &PhysicalParams, _derived: &DerivedParams) -> UnitSystem {
    UnitSystem::new(params)
}

impl UnitSystem {
    pub fn new(params: &PhysicalParams) -> Self {
        UnitSystem {
            time: 1.0 / params.gamma,
            length: 1.0 / params.k,
            momentum: HBAR * params.k,
            energy: HBAR * params.gamma,
            frequency: params.gamma,
            mass: params.mass,
        }
    }

    pub fn time_to_internal(&self, seconds: f64) -> f64 {
        seconds / self.time
    }
    pub fn time_to_si(&self, tau: f64) -> f64 {
        tau * self.time
    }
    pub fn length_to_internal(&self, metres: f64) -> f64 {
        metres / self.length
    }
    pub fn length_to_si(&self, x: f64) -> f64 {
        x * self.length
    }
    pub fn momentum_to_internal(&self, p_si: f64) -> f64 {
        p_si / self.momentum
    }
    pub fn momentum_to_si(&self, p: f64) -> f64 {
        p * self.momentum
    }
    pub fn velocity_to_momentum(&self, v: f64) -> f64 {
        self.mass * v / self.momentum
    }
    pub fn momentum_to_velocity(&self, p: f64) -> f64 {
        p * self.momentum / self.mass
    }
    pub fn energy_to_internal(&self, joules: f64) -> f64 {
        joules / self.energy
    }
    pub fn energy_to_si(&self, e: f64) -> f64 {
        e * self.energy
    }
    pub fn frequency_to_internal(&self, rate: f64) -> f64 {
        rate / self.frequency
    }
    pub fn frequency_to_si(&self, w: f64) -> f64 {
        w * self.frequency
    }
}

/// The two evanescent cavity modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    Red,
    Blue,
}

impl Mode {
    pub const BOTH: [Mode; 2] = [Mode::Red, Mode::Blue];

    /// Sign attached to U₀ for this mode: the red-detuned mode attracts, the blue one repels.
    pub const fn sign(self) -> f64 {
        match self {
            Mode::Red => -1.0,
            Mode::Blue => 1.0,
        }
    }

    /// Decay exponent of the mode function in units of k.
    pub const fn decay(self) -> f64 {
        match self {
            Mode::Red => 1.0,
            Mode::Blue => 2.0,
        }
    }

    pub const fn index(self) -> usize {
        match self {
            Mode::Red => 0,
            Mode::Blue => 1,
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            Mode::Red => "red",
            Mode::Blue => "blue",
        }
    }
}

/// Validated parameter set in internal units, indexed by [`Mode::index`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrapModel {
    pub kappa: f64,
    pub delta_c: f64,
    pub u0: f64,
    pub gamma0: f64,
    pub eta: [f64; 2],
    pub sign: [f64; 2],
    pub epsilon: f64,
    pub c3: f64,
    pub u2_bar: f64,
    /// Optical wavevectors of the two transitions in units of k.
    pub k_opt: [f64; 2],
    pub n_sat: f64,
    pub field_noise_scale: f64,
    pub units: UnitSystem,
}

impl TrapModel {
    pub fn new(params: &PhysicalParams) -> Result<Self, ParamError> {
        let derived = derive(params)?;
        Ok(Self::from_parts(params, &derived))
    }

    pub fn from_parts(params: &PhysicalParams, derived: &DerivedParams) -> Self {
        let gamma = params.gamma;
        TrapModel {
            kappa: params.kappa / gamma,
            delta_c: params.delta_c / gamma,
            u0: derived.u0 / gamma,
            gamma0: derived.gamma0 / gamma,
            eta: [params.eta_r / gamma, params.eta_b / gamma],
            sign: [derived.sign_r, derived.sign_b],
            epsilon: derived.epsilon,
            c3: params.c3_vdw,
            u2_bar: params.u2_bar,
            k_opt: [params.k_opt_r / params.k, params.k_opt_b / params.k],
            n_sat: derived.n_sat,
            field_noise_scale: params.field_noise_scale,
            units: UnitSystem::new(params),
        }
    }

    pub fn paper_default() -> Self {
        Self::new(&default_paper_params()).expect("reference parameters are valid")
    }

    /// Empty-cavity photon number η²/(Δ_C² + κ²) of a mode.
    pub fn empty_photon_number(&self, mode: Mode) -> f64 {
        let eta = self.eta[mode.index()];
        eta * eta / (self.delta_c * self.delta_c + self.kappa * self.kappa)
    }

    /// Kinetic energy ε p²/2 in ħγ for a momentum in ħk.
    #[inline]
    pub fn kinetic_energy(&self, p: f64) -> f64 {
        0.5 * self.epsilon * p * p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn light_shift_matches_reference_value() {
        let p = default_paper_params();
        let d = derive(&p).unwrap();
        assert_relative_eq!(d.u0 / p.kappa, 0.0125, max_relative = 1e-4);
        assert_relative_eq!(d.gamma0 / p.gamma, 6.25e-6, max_relative = 1e-4);
        assert_relative_eq!(d.n_sat, 80_000.0, max_relative = 1e-4);
        assert_eq!((d.sign_r, d.sign_b), (-1.0, 1.0));
    }

    #[test]
    fn recoil_parameter_for_rb85() {
        let d = derive(&default_paper_params()).unwrap();
        assert_relative_eq!(d.epsilon, 4.15e-4, max_relative = 5e-3);
        assert!(d.epsilon < 0.1);
    }

    #[test]
    fn empty_mode_photon_numbers() {
        let p = default_paper_params();
        let d = derive(&p).unwrap();
        assert_relative_eq!(d.n_empty_r, 8780.49, max_relative = 1e-5);
        assert_relative_eq!(d.n_empty_b, 13719.51, max_relative = 1e-5);
        let detuning = (p.delta_c * p.delta_c + p.kappa * p.kappa) / (p.gamma * p.gamma);
        assert_relative_eq!(detuning, 0.41, max_relative = 1e-12);
        assert_relative_eq!(d.n_empty_b / d.n_sat, 0.1715, max_relative = 1e-3);
    }

    #[test]
    fn zero_coupling_gives_no_light_shift() {
        let mut p = default_paper_params();
        p.g = 0.0;
        let d = derive(&p).unwrap();
        assert_eq!(d.u0, 0.0);
        assert_eq!(d.gamma0, 0.0);
        p.g = -1.0;
        assert!(derive(&p).is_err());
    }

    #[test]
    fn invalid_parameters_are_named() {
        let mut p = default_paper_params();
        p.delta_c = 0.1;
        match derive(&p) {
            Err(ParamError::Invalid { name, .. }) => assert_eq!(name, "delta_c"),
            other => panic!("unexpected {other:?}"),
        }
        let mut p = default_paper_params();
        p.u2_bar = 1.5;
        assert!(matches!(
            derive(&p),
            Err(ParamError::Invalid { name: "u2_bar", .. })
        ));
        let mut p = default_paper_params();
        p.mass = f64::NAN;
        assert!(derive(&p).is_err());
    }

    #[test]
    fn unit_conversions() {
        let p = default_paper_params();
        let u = to_internal_units(&p, &derive(&p).unwrap());
        assert_relative_eq!(u.time_to_internal(1e-3), 2.0e4, max_relative = 1e-12);
        assert_relative_eq!(u.length_to_internal(0.3e-6), 1.0, max_relative = 1e-12);
        let p7 = u.velocity_to_momentum(0.07);
        assert!((p7 - 28.0).abs() < 0.5, "p = {p7}");
    }

    #[test]
    fn internal_model_values() {
        let m = TrapModel::paper_default();
        assert_relative_eq!(m.kappa, 0.5);
        assert_relative_eq!(m.delta_c, -0.4);
        assert_relative_eq!(m.eta[0], 60.0, max_relative = 1e-12);
        assert_relative_eq!(m.eta[1], 75.0, max_relative = 1e-12);
        assert_relative_eq!(m.k_opt[0], 2.371, max_relative = 1e-3);
        assert_relative_eq!(m.k_opt[1], 2.417, max_relative = 1e-3);
    }

    fn arb_params() -> impl Strategy<Value = PhysicalParams> {
        (
            1e6..1e8f64,
            0.1..5.0f64,
            0.1..10.0f64,
            10.0..1e4f64,
            -3.0..-0.01f64,
            1.0..200.0f64,
        )
            .prop_map(|(gamma, kappa, g, delta_a, delta_c, eta)| PhysicalParams {
                gamma,
                kappa: kappa * gamma,
                g: g * gamma,
                delta_a: delta_a * gamma,
                delta_c: delta_c * gamma,
                eta_r: eta * gamma,
                eta_b: 1.3 * eta * gamma,
                ..default_paper_params()
            })
    }

    proptest! {
        #[test]
        fn derive_is_pure(p in arb_params()) {
            let a = derive(&p).unwrap();
            let b = derive(&p).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn shift_to_width_ratio_is_detuning_ratio(p in arb_params()) {
            let d = derive(&p).unwrap();
            let ratio = d.u0 / d.gamma0;
            prop_assert!((ratio - p.delta_a / p.gamma).abs() <= 1e-12 * ratio.abs());
        }

        #[test]
        fn empty_photon_number_is_quadratic_in_pump(p in arb_params()) {
            let d1 = derive(&p).unwrap();
            let doubled = PhysicalParams { eta_r: 2.0 * p.eta_r, eta_b: 2.0 * p.eta_b, ..p };
            let d2 = derive(&doubled).unwrap();
            prop_assert_eq!(d2.n_empty_r, 4.0 * d1.n_empty_r);
            prop_assert_eq!(d2.n_empty_b, 4.0 * d1.n_empty_b);
        }

        #[test]
        fn unit_round_trip(p in arb_params(), q in -1e3..1e3f64) {
            let u = UnitSystem::new(&p);
            let checks = [
                u.time_to_si(u.time_to_internal(q)),
                u.length_to_si(u.length_to_internal(q)),
                u.momentum_to_si(u.momentum_to_internal(q)),
                u.energy_to_si(u.energy_to_internal(q)),
                u.frequency_to_si(u.frequency_to_internal(q)),
                u.momentum_to_velocity(u.velocity_to_momentum(q)),
            ];
            for back in checks {
                prop_assert!((back - q).abs() <= 1e-12 * q.abs().max(f64::MIN_POSITIVE));
            }
        }
    }
}
