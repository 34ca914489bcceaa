//! Static physical parameters of the cavity, the mechanical mode, the bath and
//! the two-tone pump.
//!
//! Every rate stored here is an angular rate in rad/s. Configuration files
//! quote frequencies in Hz; the conversion happens once, in [`crate::config`].

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams<T> {
    /// Cavity linewidth κ.
    pub kappa: T,
    /// Input coupling rate κ_in.
    pub kappa_in: T,
    /// Single-photon coupling g0.
    pub g0: T,
    /// Bare mechanical frequency Ω_m⁰.
    pub omega_m0: T,
    /// Intrinsic mechanical damping Γ_m.
    pub gamma_m: T,
    /// Mean detuning Δ of the two pump tones from the cavity (signed).
    pub delta: T,
    /// Thermal occupancy of the mechanical bath.
    pub n_th: T,
    /// Extra occupancy added to n̄ (probe back-action), default 0.
    pub n_extra: T,
    /// Bath temperature in kelvin, when n_th was derived from it.
    pub bath_temperature: Option<T>,
}

impl<T: Real> SystemParams<T> {
    /// Builds and validates a parameter set with κ_in = κ/2 and no extra
    /// occupancy.
    pub fn new(kappa: T, g0: T, omega_m0: T, gamma_m: T, delta: T, n_th: T) -> Result<Self> {
        Self {
            kappa,
            kappa_in: kappa * T::half(),
            g0,
            omega_m0,
            gamma_m,
            delta,
            n_th,
            n_extra: T::zero(),
            bath_temperature: None,
        }
        .validated()
    }

    pub fn with_kappa_in(mut self, kappa_in: T) -> Result<Self> {
        self.kappa_in = kappa_in;
        self.validated()
    }

    pub fn with_delta(mut self, delta: T) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_n_extra(mut self, n_extra: T) -> Result<Self> {
        self.n_extra = n_extra;
        self.validated()
    }

    /// Replaces n_th with the Bose-Einstein occupancy at `temperature` (K) and
    /// the bare mechanical frequency.
    pub fn with_temperature(mut self, temperature: T) -> Result<Self> {
        self.n_th = thermal_occupation(temperature, self.omega_m0)?;
        self.bath_temperature = Some(temperature);
        self.validated()
    }

    pub fn validated(self) -> Result<Self> {
        let finite = |name: &'static str, v: T| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, "must be finite"))
            }
        };
        finite("kappa", self.kappa)?;
        finite("kappa_in", self.kappa_in)?;
        finite("g0", self.g0)?;
        finite("omega_m0", self.omega_m0)?;
        finite("gamma_m", self.gamma_m)?;
        finite("delta", self.delta)?;
        finite("n_th", self.n_th)?;
        finite("n_extra", self.n_extra)?;
        if self.kappa <= T::zero() {
            return Err(Error::invalid("kappa", "must be > 0"));
        }
        if self.kappa_in <= T::zero() || self.kappa_in > self.kappa {
            return Err(Error::invalid("kappa_in", "must satisfy 0 < kappa_in <= kappa"));
        }
        if self.g0 < T::zero() {
            return Err(Error::invalid("g0", "must be >= 0"));
        }
        if self.omega_m0 <= T::zero() {
            return Err(Error::invalid("omega_m0", "must be > 0"));
        }
        if self.gamma_m <= T::zero() {
            return Err(Error::invalid("gamma_m", "must be > 0"));
        }
        if self.n_th < T::zero() {
            return Err(Error::invalid("n_th", "must be >= 0"));
        }
        if self.n_extra < T::zero() {
            return Err(Error::invalid("n_extra", "must be >= 0"));
        }
        Ok(self)
    }
}

/// Input amplitudes of the two pump tones at ω_L ∓ Ω_m, in √(photons/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpConfig<T> {
    pub alpha_in_minus: Complex<T>,
    pub alpha_in_plus: Complex<T>,
}

impl<T: Real> PumpConfig<T> {
    pub fn new(alpha_in_minus: Complex<T>, alpha_in_plus: Complex<T>) -> Self {
        Self {
            alpha_in_minus,
            alpha_in_plus,
        }
    }

    /// Builds a pump from (magnitude, phase in degrees) pairs.
    pub fn from_polar_deg(minus: (T, T), plus: (T, T)) -> Self {
        Self {
            alpha_in_minus: Complex::from_polar(minus.0, minus.1.to_radians()),
            alpha_in_plus: Complex::from_polar(plus.0, plus.1.to_radians()),
        }
    }

    /// Multiplies both amplitudes by a common complex factor.
    pub fn scaled(&self, factor: Complex<T>) -> Self {
        Self {
            alpha_in_minus: self.alpha_in_minus * factor,
            alpha_in_plus: self.alpha_in_plus * factor,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.alpha_in_minus.norm_sqr() == T::zero() && self.alpha_in_plus.norm_sqr() == T::zero()
    }
}

/// Intracavity amplitudes of the two tones and the derived total coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntracavityField<T> {
    pub alpha_minus: Complex<T>,
    pub alpha_plus: Complex<T>,
    /// Total coupling, g² = g0²(|α₋|² + |α₊|²).
    pub g: T,
    /// Fraction of intracavity power in the lower tone.
    pub epsilon_c: T,
}

impl<T: Real> IntracavityField<T> {
    pub fn from_amplitudes(g0: T, alpha_minus: Complex<T>, alpha_plus: Complex<T>) -> Result<Self> {
        let pm = alpha_minus.norm_sqr();
        let pp = alpha_plus.norm_sqr();
        let total = pm + pp;
        if total <= T::zero() {
            return Err(Error::ZeroPumpPower);
        }
        Ok(Self {
            alpha_minus,
            alpha_plus,
            g: g0 * total.sqrt(),
            epsilon_c: pm / total,
        })
    }

    /// Builds a field directly from (g, ε_c) with real, in-phase amplitudes.
    /// Useful when g is treated as a free axis.
    pub fn from_coupling(g0: T, g: T, epsilon_c: T) -> Result<Self> {
        if !(T::zero()..=T::one()).contains(&epsilon_c) {
            return Err(Error::invalid("epsilon_c", "must lie in [0, 1]"));
        }
        if g0 <= T::zero() || g < T::zero() {
            return Err(Error::invalid("g", "requires g0 > 0 and g >= 0"));
        }
        let total = (g / g0).powi(2);
        let am = (total * epsilon_c).sqrt();
        let ap = (total * (T::one() - epsilon_c)).sqrt();
        Ok(Self {
            alpha_minus: Complex::new(am, T::zero()),
            alpha_plus: Complex::new(ap, T::zero()),
            g,
            epsilon_c,
        })
    }

    /// Intracavity photon number summed over both tones.
    pub fn total_photons(&self) -> T {
        self.alpha_minus.norm_sqr() + self.alpha_plus.norm_sqr()
    }
}

/// Bose-Einstein occupancy of a mode at angular frequency `omega` (rad/s) in
/// a bath at `temperature` (K).
pub fn thermal_occupation<T: Real>(temperature: T, omega: T) -> Result<T> {
    if !(temperature > T::zero()) {
        return Err(Error::invalid("temperature", "must be > 0"));
    }
    if !(omega > T::zero()) {
        return Err(Error::invalid("omega", "must be > 0"));
    }
    let x = T::lit(HBAR) / T::lit(K_B) * omega / temperature;
    Ok(T::one() / x.exp_m1())
}
