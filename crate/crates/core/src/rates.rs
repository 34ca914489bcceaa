//! Optomechanical rates of the two-tone pumped oscillator in the weak-coupling,
//! quasi-resonant regime.
//!
//! The lower tone (at ω_L − Ω_m) and the upper tone (at ω_L + Ω_m) each produce
//! the usual cooling/heating scattering; their coherent product α₋*α₊ modulates
//! the spring constant at 2Ω_m and drives the parametric term Γ_par.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{IntracavityField, PumpConfig, SystemParams};
use crate::scalar::Real;

/// Maximum number of fixed-point iterations for the effective frequency.
pub const MAX_FREQUENCY_ITERATIONS: usize = 50;
/// Fixed-point tolerance in units of Γ_m.
pub const FREQUENCY_TOLERANCE: f64 = 1e-6;
/// Relative tolerance of the Γ_opt = A⁻ − A⁺ identity.
pub const RATE_IDENTITY_TOLERANCE: f64 = 1e-10;

/// All rates derived from a parameter set and a pump configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedRates<T> {
    /// Self-consistent effective mechanical frequency Ω_m.
    pub omega_m: T,
    pub gamma_m: T,
    pub n_th: T,
    /// Total coupling g at Ω_m.
    pub g: T,
    pub epsilon_c: T,
    pub gamma_opt: T,
    pub gamma_eff: T,
    /// Signed parametric rate.
    pub gamma_par: T,
    pub phi: T,
    /// Signed squeezing parameter Γ_par/Γ_eff.
    pub s: T,
    pub gamma_plus: T,
    pub gamma_minus: T,
    /// Anti-Stokes (cooling) scattering rate A⁻.
    pub a_minus: T,
    /// Stokes (heating) scattering rate A⁺.
    pub a_plus: T,
    /// Back-action occupancy A⁺/Γ_opt; absent when Γ_opt = 0.
    pub n_ba: Option<T>,
    pub n_bar: T,
    /// Coefficient of the anomalous input correlator ⟨b_in b_in⟩/2π.
    pub anomalous: Complex<T>,
    /// Number of fixed-point iterations spent on Ω_m (0 when Ω_m was given).
    pub iterations: usize,
}

impl<T: Real> DerivedRates<T> {
    /// A rate set described directly by (Γ_eff, s, n̄), with no optical
    /// back-action and no anomalous noise. Used for synthetic truth values.
    pub fn phenomenological(gamma_eff: T, s: T, n_bar: T) -> Result<Self> {
        if !(gamma_eff > T::zero()) {
            return Err(Error::AntiDamping {
                gamma_eff: gamma_eff.as_f64(),
            });
        }
        if !(s.abs() < T::one()) {
            return Err(Error::ParametricInstability { s: s.as_f64() });
        }
        if !(n_bar >= T::zero()) {
            return Err(Error::invalid("n_bar", "must be >= 0"));
        }
        let gamma_par = s * gamma_eff;
        Ok(Self {
            omega_m: T::zero(),
            gamma_m: gamma_eff,
            n_th: n_bar,
            g: T::zero(),
            epsilon_c: T::one(),
            gamma_opt: T::zero(),
            gamma_eff,
            gamma_par,
            phi: T::zero(),
            s,
            gamma_plus: gamma_eff + gamma_par,
            gamma_minus: gamma_eff - gamma_par,
            a_minus: T::zero(),
            a_plus: T::zero(),
            n_ba: None,
            n_bar,
            anomalous: Complex::new(T::zero(), T::zero()),
            iterations: 0,
        })
    }

    /// Same dynamics with the coherent parametric coupling removed, keeping the
    /// cooling and heating contributions of both tones.
    pub fn without_parametric(&self) -> Self {
        Self {
            gamma_par: T::zero(),
            s: T::zero(),
            gamma_plus: self.gamma_eff,
            gamma_minus: self.gamma_eff,
            anomalous: Complex::new(T::zero(), T::zero()),
            ..*self
        }
    }

    /// Same rates with the anomalous input correlator set to zero.
    pub fn without_anomalous(&self) -> Self {
        Self {
            anomalous: Complex::new(T::zero(), T::zero()),
            ..*self
        }
    }

    pub fn with_omega_m(self, omega_m: T) -> Self {
        Self { omega_m, ..self }
    }

    /// Squeezing parameter folded to [0, 1); spectra depend only on |s|.
    pub fn s_folded(&self) -> T {
        self.s.abs()
    }

    /// Variance of the quadrature in zero-point units, σ₀² = (2n̄+1)/4.
    pub fn sigma0_sq(&self) -> T {
        (T::two() * self.n_bar + T::one()) / T::lit(4.0)
    }
}

fn lorentz_denominator<T: Real>(detuning: T, kappa: T) -> T {
    detuning * detuning + kappa * kappa / T::lit(4.0)
}

/// Intracavity amplitudes α± = α±_in √κ_in / (−i(Δ ± Ω_m) + κ/2).
pub fn intracavity_amplitudes<T: Real>(
    params: &SystemParams<T>,
    pump: &PumpConfig<T>,
    omega_m: T,
) -> Result<IntracavityField<T>> {
    if !(omega_m > T::zero()) {
        return Err(Error::invalid("omega_m", "must be > 0"));
    }
    let half_kappa = params.kappa * T::half();
    let sqrt_kin = params.kappa_in.sqrt();
    let response = |detuning: T| Complex::new(half_kappa, -detuning).inv() * sqrt_kin;
    let alpha_minus = pump.alpha_in_minus * response(params.delta - omega_m);
    let alpha_plus = pump.alpha_in_plus * response(params.delta + omega_m);
    IntracavityField::from_amplitudes(params.g0, alpha_minus, alpha_plus)
}

/// Optical damping Γ_opt in the quasi-resonant form g²κ[…].
pub fn optical_damping<T: Real>(params: &SystemParams<T>, field: &IntracavityField<T>, omega_m: T) -> T {
    let k = params.kappa;
    let d = params.delta;
    let two_w = T::two() * omega_m;
    let eps = field.epsilon_c;
    let bracket = eps / lorentz_denominator(d, k) - eps / lorentz_denominator(d - two_w, k)
        + (T::one() - eps) / lorentz_denominator(d + two_w, k)
        - (T::one() - eps) / lorentz_denominator(d, k);
    field.g * field.g * k * bracket
}

/// Complex optical susceptibility bracket, summed over both tones with their
/// intracavity weights and evaluated at Ω = Ω_m. Its real part (×2g0²) is
/// Γ_opt, its imaginary part (×g0²) the frequency shift.
fn susceptibility_bracket<T: Real>(params: &SystemParams<T>, field: &IntracavityField<T>, omega_m: T) -> Complex<T> {
    let hk = params.kappa * T::half();
    let d = params.delta;
    let inv = |im: T| Complex::new(hk, im).inv();
    let lower = inv(-d) - inv(d - T::two() * omega_m);
    let upper = inv(-d - T::two() * omega_m) - inv(d);
    lower * field.alpha_minus.norm_sqr() + upper * field.alpha_plus.norm_sqr()
}

/// Optomechanical frequency shift δΩ_m = g0² Im[…] at the given Ω_m.
pub fn frequency_shift<T: Real>(params: &SystemParams<T>, field: &IntracavityField<T>, omega_m: T) -> T {
    params.g0 * params.g0 * susceptibility_bracket(params, field, omega_m).im
}

/// Γ_opt from the complex bracket, 2g0² Re[…]; equals [`optical_damping`].
pub fn optical_damping_from_susceptibility<T: Real>(
    params: &SystemParams<T>,
    field: &IntracavityField<T>,
    omega_m: T,
) -> T {
    T::two() * params.g0 * params.g0 * susceptibility_bracket(params, field, omega_m).re
}

/// Result of the effective-frequency fixed point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveFrequency<T> {
    pub omega_m: T,
    pub iterations: usize,
}

/// Residual Ω − Ω_m⁰ − δΩ_m(Ω) of the self-consistency condition, with α±
/// re-evaluated at Ω.
pub fn frequency_residual<T: Real>(params: &SystemParams<T>, pump: &PumpConfig<T>, omega: T) -> Result<T> {
    if pump.is_zero() || params.g0 == T::zero() {
        return Ok(omega - params.omega_m0);
    }
    let field = intracavity_amplitudes(params, pump, omega)?;
    Ok(omega - params.omega_m0 - frequency_shift(params, &field, omega))
}

/// Plain fixed-point iteration Ω ← Ω_m⁰ + δΩ_m(Ω).
pub fn self_consistent_frequency<T: Real>(
    params: &SystemParams<T>,
    pump: &PumpConfig<T>,
) -> Result<EffectiveFrequency<T>> {
    // The requested tolerance is floored at what the scalar type can resolve.
    let tol = (T::lit(FREQUENCY_TOLERANCE) * params.gamma_m)
        .max(T::lit(8.0 * T::eps_f64()) * params.omega_m0);
    let mut omega = params.omega_m0;
    let mut step = T::zero();
    for k in 1..=MAX_FREQUENCY_ITERATIONS {
        let next = if pump.is_zero() || params.g0 == T::zero() {
            params.omega_m0
        } else {
            let field = intracavity_amplitudes(params, pump, omega)?;
            params.omega_m0 + frequency_shift(params, &field, omega)
        };
        step = (next - omega).abs();
        omega = next;
        if !(omega > T::zero()) {
            break;
        }
        if step < tol {
            if (omega - params.omega_m0).abs() > T::lit(1e-2) * params.omega_m0 {
                return Err(Error::invalid(
                    "pump",
                    "frequency shift exceeds 1% of the bare frequency; outside weak coupling",
                ));
            }
            return Ok(EffectiveFrequency { omega_m: omega, iterations: k });
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_FREQUENCY_ITERATIONS,
        last_step: step.as_f64(),
    })
}

/// Parametric rate Γ_par = 4g²√(ε_c(1−ε_c))Δ/(Δ²+κ²/4) and phase
/// φ = π/2 + arg(α₋*α₊).
pub fn parametric_rate<T: Real>(params: &SystemParams<T>, field: &IntracavityField<T>, _omega_m: T) -> (T, T) {
    let eps = field.epsilon_c;
    let mix = (eps * (T::one() - eps)).max(T::zero()).sqrt();
    let gamma_par =
        T::lit(4.0) * field.g * field.g * mix * params.delta / lorentz_denominator(params.delta, params.kappa);
    let phi = T::FRAC_PI_2() + (field.alpha_minus.conj() * field.alpha_plus).arg();
    (gamma_par, phi)
}

/// Anti-Stokes (A⁻, cooling) and Stokes (A⁺, heating) scattering rates.
///
/// Fails with [`Error::Consistency`] if A⁻ − A⁺ departs from Γ_opt.
pub fn scattering_rates<T: Real>(
    params: &SystemParams<T>,
    field: &IntracavityField<T>,
    omega_m: T,
) -> Result<(T, T)> {
    let k = params.kappa;
    let d = params.delta;
    let two_w = T::two() * omega_m;
    let pref = params.g0 * params.g0 * k;
    let pm = field.alpha_minus.norm_sqr();
    let pp = field.alpha_plus.norm_sqr();
    let a_minus = pref * (pm / lorentz_denominator(d, k) + pp / lorentz_denominator(d + two_w, k));
    let a_plus = pref * (pm / lorentz_denominator(d - two_w, k) + pp / lorentz_denominator(d, k));
    let gamma_opt = optical_damping(params, field, omega_m);
    let scale = a_minus.max(a_plus);
    if scale > T::zero() {
        let tol = RATE_IDENTITY_TOLERANCE.max(64.0 * T::eps_f64());
        let rel = ((a_minus - a_plus - gamma_opt).abs() / scale).as_f64();
        if rel > tol {
            return Err(Error::Consistency {
                what: "optical damping vs scattering rates",
                rel_err: rel,
            });
        }
    }
    Ok((a_minus, a_plus))
}

/// Occupancies (n̄_BA, n̄) with n̄ = (Γ_m n̄_th + A⁺)/Γ_eff + n_extra.
pub fn occupancy<T: Real>(params: &SystemParams<T>, gamma_opt: T, a_plus: T) -> Result<(Option<T>, T)> {
    let gamma_eff = params.gamma_m + gamma_opt;
    if !(gamma_eff > T::zero()) {
        return Err(Error::AntiDamping {
            gamma_eff: gamma_eff.as_f64(),
        });
    }
    let n_bar = (params.gamma_m * params.n_th + a_plus) / gamma_eff + params.n_extra;
    let n_ba = (gamma_opt != T::zero()).then(|| a_plus / gamma_opt);
    Ok((n_ba, n_bar))
}

/// Coefficient of ⟨b_in b_in⟩/2π, −g0²κ α₋*α₊/(Δ²+κ²/4).
pub fn anomalous_correlator<T: Real>(params: &SystemParams<T>, field: &IntracavityField<T>) -> Complex<T> {
    let k = -params.g0 * params.g0 * params.kappa / lorentz_denominator(params.delta, params.kappa);
    field.alpha_minus.conj() * field.alpha_plus * k
}

/// Derives every rate at a given intracavity field and Ω_m.
pub fn derive_from_field<T: Real>(
    params: &SystemParams<T>,
    field: &IntracavityField<T>,
    omega_m: T,
) -> Result<DerivedRates<T>> {
    let gamma_opt = optical_damping(params, field, omega_m);
    let gamma_eff = params.gamma_m + gamma_opt;
    let (a_minus, a_plus) = scattering_rates(params, field, omega_m)?;
    let (n_ba, n_bar) = occupancy(params, gamma_opt, a_plus)?;
    let (gamma_par, phi) = parametric_rate(params, field, omega_m);
    let s = gamma_par / gamma_eff;
    if !(s.abs() < T::one()) {
        return Err(Error::ParametricInstability { s: s.as_f64() });
    }
    Ok(DerivedRates {
        omega_m,
        gamma_m: params.gamma_m,
        n_th: params.n_th,
        g: field.g,
        epsilon_c: field.epsilon_c,
        gamma_opt,
        gamma_eff,
        gamma_par,
        phi,
        s,
        gamma_plus: gamma_eff * (T::one() + s),
        gamma_minus: gamma_eff * (T::one() - s),
        a_minus,
        a_plus,
        n_ba,
        n_bar,
        anomalous: anomalous_correlator(params, field),
        iterations: 0,
    })
}

/// Full derivation: self-consistent Ω_m, intracavity field, all rates.
pub fn derive_all<T: Real>(params: &SystemParams<T>, pump: &PumpConfig<T>) -> Result<DerivedRates<T>> {
    let eff = self_consistent_frequency(params, pump)?;
    let field = intracavity_amplitudes(params, pump, eff.omega_m)?;
    let mut rates = derive_from_field(params, &field, eff.omega_m)?;
    rates.iterations = eff.iterations;
    Ok(rates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn device_like(delta_hz: f64) -> SystemParams<f64> {
        SystemParams::new(
            TAU * 1.9e6,
            TAU * 30.0,
            TAU * 530e3,
            TAU * 530e3 / 6.4e6,
            TAU * delta_hz,
            2.75e5,
        )
        .unwrap()
    }

    fn field(g_hz: f64, eps: f64) -> IntracavityField<f64> {
        IntracavityField::from_coupling(TAU * 30.0, TAU * g_hz, eps).unwrap()
    }

    #[test]
    fn resonant_lower_tone_amplitude() {
        let p = device_like(0.0);
        let omega = TAU * 530e3;
        let p = p.with_delta(omega);
        let pump = PumpConfig::new(Complex::new(1.0, 0.0), Complex::new(0.0, 0.0));
        let f = intracavity_amplitudes(&p, &pump, omega).unwrap();
        let expect = 2.0 * p.kappa_in.sqrt() / p.kappa;
        assert!((f.alpha_minus.norm() / expect - 1.0).abs() < 1e-12);
        assert_eq!(f.epsilon_c, 1.0);
    }

    #[test]
    fn off_resonant_lower_tone_amplitude() {
        let p = device_like(0.0);
        let pump = PumpConfig::new(Complex::new(1.0, 0.0), Complex::new(0.0, 0.0));
        let f = intracavity_amplitudes(&p, &pump, TAU * 530e3).unwrap();
        assert!((f.alpha_minus.norm() - 3.5744e-4).abs() < 1e-8, "{}", f.alpha_minus.norm());
    }

    #[test]
    fn equal_inputs_split_power_only_at_zero_detuning() {
        let pump = PumpConfig::new(Complex::new(1.0, 0.0), Complex::new(1.0, 0.0));
        let w = TAU * 530e3;
        let f0 = intracavity_amplitudes(&device_like(0.0), &pump, w).unwrap();
        assert!((f0.epsilon_c - 0.5).abs() < 1e-14);
        let f1 = intracavity_amplitudes(&device_like(200e3), &pump, w).unwrap();
        assert!((f1.epsilon_c - 0.5).abs() > 1e-3);
    }

    #[test]
    fn zero_pump_is_distinct_error() {
        let pump = PumpConfig::new(Complex::new(0.0, 0.0), Complex::new(0.0, 0.0));
        assert!(matches!(
            intracavity_amplitudes(&device_like(0.0), &pump, 1.0),
            Err(Error::ZeroPumpPower)
        ));
    }

    #[test]
    fn optical_damping_reference_values() {
        let p = device_like(200e3);
        let w = TAU * 530e3;
        assert_eq!(optical_damping(&p, &field(0.0, 0.9), w), 0.0);
        let g = optical_damping(&p, &field(2e3, 0.9), w) / TAU;
        assert!((g - 2.5907).abs() < 1e-3, "{g}");
        let blue = optical_damping(&device_like(0.0), &field(2e3, 0.0), w);
        assert!(blue < 0.0);
        let via_bracket = optical_damping_from_susceptibility(&p, &field(2e3, 0.9), w) / TAU;
        assert!((via_bracket / g - 1.0).abs() < 1e-12);
    }

    #[test]
    fn parametric_rate_reference_values() {
        let w = TAU * 530e3;
        let (gp, _) = parametric_rate(&device_like(200e3), &field(2e3, 0.9), w);
        assert!((gp / TAU - 1.018_57).abs() < 1e-4);
        assert_eq!(parametric_rate(&device_like(0.0), &field(2e3, 0.9), w).0, 0.0);
        assert_eq!(parametric_rate(&device_like(200e3), &field(2e3, 1.0), w).0, 0.0);
        assert_eq!(parametric_rate(&device_like(200e3), &field(2e3, 0.0), w).0, 0.0);
        let (neg, _) = parametric_rate(&device_like(-200e3), &field(2e3, 0.9), w);
        assert!((neg + gp).abs() < 1e-12 * gp);
    }

    #[test]
    fn phase_follows_tone_phase_difference() {
        let p = device_like(200e3);
        let f = IntracavityField::from_amplitudes(
            p.g0,
            Complex::from_polar(10.0, 0.3),
            Complex::from_polar(4.0, 1.1),
        )
        .unwrap();
        let (_, phi) = parametric_rate(&p, &f, 1.0);
        assert!((phi - (std::f64::consts::FRAC_PI_2 + 0.8)).abs() < 1e-12);
    }

    #[test]
    fn scattering_rates_reference_values() {
        let w = TAU * 530e3;
        let (am, ap) = scattering_rates(&device_like(200e3), &field(2e3, 0.9), w).unwrap();
        assert!((am / TAU - 7.5625).abs() < 1e-3);
        assert!((ap / TAU - 4.9718).abs() < 1e-3);
        let (z1, z2) = scattering_rates(&device_like(200e3), &field(0.0, 0.9), w).unwrap();
        assert_eq!((z1, z2), (0.0, 0.0));
        let p = device_like(0.0);
        let f = field(2e3, 1.0);
        let (am, ap) = scattering_rates(&p, &f, w).unwrap();
        let g2k = f.g * f.g * p.kappa;
        let k2 = p.kappa * p.kappa / 4.0;
        assert!((am / (g2k / k2) - 1.0).abs() < 1e-12);
        assert!((ap / (g2k / (4.0 * w * w + k2)) - 1.0).abs() < 1e-12);
        assert!(am > ap);
    }

    #[test]
    fn occupancy_reference_values() {
        let p = device_like(200e3);
        let (nba, n) = occupancy(&p, 0.0, 0.0).unwrap();
        assert_eq!(nba, None);
        assert!((n - p.n_th).abs() < 1e-9);

        let p = SystemParams::new(1.0, 1.0, 10.0, TAU * 0.083, 0.0, 2.75e5).unwrap();
        let gamma_opt = TAU * 259.2 - p.gamma_m;
        let (_, n) = occupancy(&p, gamma_opt, TAU * 497.2).unwrap();
        assert!((n - 89.98).abs() < 0.01, "{n}");
        let (_, cold) = occupancy(&p, gamma_opt, 0.0).unwrap();
        assert!((cold - p.gamma_m * p.n_th / (TAU * 259.2)).abs() < 1e-9);
        assert!(matches!(occupancy(&p, -2.0 * p.gamma_m, 0.0), Err(Error::AntiDamping { .. })));
    }

    #[test]
    fn self_consistent_frequency_behaviour() {
        let p = device_like(200e3);
        let zero = PumpConfig::new(Complex::new(0.0, 0.0), Complex::new(0.0, 0.0));
        let eff = self_consistent_frequency(&p, &zero).unwrap();
        assert_eq!(eff.omega_m, p.omega_m0);
        assert_eq!(eff.iterations, 1);

        // g/2π ≈ 20 kHz from a ~1e7 sqrt(photons/s) lower tone.
        let pump = PumpConfig::new(Complex::new(2.0e6, 0.0), Complex::new(6.0e5, 0.0));
        let eff = self_consistent_frequency(&p, &pump).unwrap();
        assert!(eff.iterations <= 5, "{}", eff.iterations);
        let res = frequency_residual(&p, &pump, eff.omega_m).unwrap();
        assert!(res.abs() < 1e-6 * p.gamma_m, "{res}");
    }

    #[test]
    fn two_tone_shifts_partially_cancel() {
        let p = device_like(0.0);
        let w = TAU * 530e3;
        let single = frequency_shift(&p, &field(20e3, 1.0), w).abs();
        let both = frequency_shift(&p, &field(20e3, 0.5), w).abs();
        assert!(both < single, "{both} vs {single}");
    }

    #[test]
    fn derive_all_reference_ratio_and_errors() {
        let p = device_like(200e3);
        let w = TAU * 530e3;
        let r = derive_from_field(&p, &field(2e3, 0.9), w).unwrap();
        assert!((r.s - 0.381).abs() < 1e-3, "{}", r.s);
        assert_eq!(r.gamma_eff, r.gamma_m + r.gamma_opt);
        assert!((r.gamma_plus - r.gamma_eff * (1.0 + r.s)).abs() < 1e-12 * r.gamma_eff);

        let red = derive_from_field(&p, &field(2e3, 1.0), w).unwrap();
        assert_eq!(red.s, 0.0);
        assert_eq!(red.gamma_plus, red.gamma_minus);

        // Weak total pump with a large blue share: Γ_par overtakes Γ_eff.
        let err = derive_from_field(&p, &field(2e3, 0.55), w).unwrap_err();
        assert!(err.is_instability(), "{err}");
    }
}
