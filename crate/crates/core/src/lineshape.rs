//! Closed-form sideband and quadrature spectra.
//!
//! Spectral densities follow the (1/2π)⟨·⟩ convention so that areas are taken
//! as ∫ dδΩ/2π; with that normalization the Stokes minus anti-Stokes area is
//! exactly one. Each sideband is a sum of two Lorentzians centred on the same
//! frequency with widths Γ₋ = Γ_eff(1−s) (narrow) and Γ₊ = Γ_eff(1+s) (broad).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rates::DerivedRates;
use crate::scalar::Real;

/// A Lorentzian `area · width / ((x − center)² + width²/4)`.
///
/// `area` is the signed integral over dx/2π, so a unit-area component has peak
/// value 4/width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lorentzian<T> {
    pub center: T,
    pub width: T,
    pub area: T,
}

impl<T: Real> Lorentzian<T> {
    pub fn new(center: T, width: T, area: T) -> Self {
        Self { center, width, area }
    }

    #[inline]
    pub fn eval(&self, x: T) -> T {
        let d = x - self.center;
        self.area * self.width / (d * d + self.width * self.width / T::lit(4.0))
    }

    pub fn peak(&self) -> T {
        T::lit(4.0) * self.area / self.width
    }

    pub fn shifted(&self, by: T) -> Self {
        Self {
            center: self.center + by,
            ..*self
        }
    }
}

/// Sum of Lorentzians on a constant floor, scaled by a detector calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumModel<T> {
    pub components: Vec<Lorentzian<T>>,
    pub floor: T,
    pub calibration: T,
}

impl<T: Real> SpectrumModel<T> {
    pub fn new(components: Vec<Lorentzian<T>>, floor: T, calibration: T) -> Result<Self> {
        if components.iter().any(|c| !(c.width > T::zero())) {
            return Err(Error::invalid("width", "Lorentzian widths must be > 0"));
        }
        if calibration < T::zero() {
            return Err(Error::invalid("calibration", "must be >= 0"));
        }
        Ok(Self {
            components,
            floor,
            calibration,
        })
    }

    #[inline]
    pub fn eval(&self, x: T) -> T {
        let sum = self.components.iter().fold(T::zero(), |acc, c| acc + c.eval(x));
        self.floor + self.calibration * sum
    }

    pub fn eval_grid(&self, grid: &[T]) -> Vec<T> {
        grid.iter().map(|&x| self.eval(x)).collect()
    }

    /// Evaluates on the grid and fails if any value is negative.
    pub fn eval_nonnegative(&self, grid: &[T]) -> Result<Vec<T>> {
        let values = self.eval_grid(grid);
        check_nonnegative(&values)?;
        Ok(values)
    }
}

fn check_nonnegative<T: Real>(values: &[T]) -> Result<()> {
    match values.iter().position(|v| *v < T::zero() || v.is_nan()) {
        Some(index) => Err(Error::NegativeSpectrum {
            index,
            value: values[index].as_f64(),
        }),
        None => Ok(()),
    }
}

/// The (Γ_eff, s, n̄) triple that fixes both sideband shapes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SidebandShape<T> {
    pub gamma_eff: T,
    /// Folded squeezing parameter, 0 ≤ s < 1.
    pub s: T,
    pub n_bar: T,
}

impl<T: Real> SidebandShape<T> {
    pub fn new(gamma_eff: T, s: T, n_bar: T) -> Result<Self> {
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
        Ok(Self {
            gamma_eff,
            s: s.abs(),
            n_bar,
        })
    }

    pub fn from_rates(rates: &DerivedRates<T>, n_bar: T) -> Result<Self> {
        Self::new(rates.gamma_eff, rates.s, n_bar)
    }

    pub fn gamma_narrow(&self) -> T {
        self.gamma_eff * (T::one() - self.s)
    }

    pub fn gamma_broad(&self) -> T {
        self.gamma_eff * (T::one() + self.s)
    }

    /// Numerator weights (narrow, broad) of the Stokes sideband: 1+n̄∓s/2.
    pub fn stokes_weights(&self) -> (T, T) {
        let h = self.s * T::half();
        (T::one() + self.n_bar - h, T::one() + self.n_bar + h)
    }

    /// Numerator weights (narrow, broad) of the anti-Stokes sideband: n̄±s/2.
    /// The broad weight turns negative for s > 2n̄.
    pub fn antistokes_weights(&self) -> (T, T) {
        let h = self.s * T::half();
        (self.n_bar + h, self.n_bar - h)
    }

    fn pair(&self, weights: (T, T)) -> [Lorentzian<T>; 2] {
        let (gn, gb) = (self.gamma_narrow(), self.gamma_broad());
        let pre = self.gamma_eff * T::half();
        [
            Lorentzian::new(T::zero(), gn, pre * weights.0 / gn),
            Lorentzian::new(T::zero(), gb, pre * weights.1 / gb),
        ]
    }

    /// Stokes components `[narrow, broad]` centred at zero.
    pub fn stokes_components(&self) -> [Lorentzian<T>; 2] {
        self.pair(self.stokes_weights())
    }

    /// Anti-Stokes components `[narrow, broad]` centred at zero.
    pub fn antistokes_components(&self) -> [Lorentzian<T>; 2] {
        self.pair(self.antistokes_weights())
    }

    pub fn stokes_at(&self, d: T) -> T {
        let [a, b] = self.stokes_components();
        a.eval(d) + b.eval(d)
    }

    pub fn antistokes_at(&self, d: T) -> T {
        let [a, b] = self.antistokes_components();
        a.eval(d) + b.eval(d)
    }

    pub fn areas(&self) -> SidebandAreas<T> {
        let [sn, sb] = self.stokes_components();
        let [an, ab] = self.antistokes_components();
        SidebandAreas {
            stokes_narrow: sn.area,
            stokes_broad: sb.area,
            antistokes_narrow: an.area,
            antistokes_broad: ab.area,
        }
    }
}

/// Areas (∫ dδΩ/2π) of the four Lorentzian components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SidebandAreas<T> {
    pub stokes_narrow: T,
    pub stokes_broad: T,
    pub antistokes_narrow: T,
    pub antistokes_broad: T,
}

impl<T: Real> SidebandAreas<T> {
    pub fn stokes(&self) -> T {
        self.stokes_narrow + self.stokes_broad
    }

    pub fn antistokes(&self) -> T {
        self.antistokes_narrow + self.antistokes_broad
    }

    pub fn ratios(&self) -> Ratios<T> {
        Ratios {
            r0: self.stokes() / self.antistokes(),
            r_plus: self.stokes_broad / self.antistokes_broad,
            r_minus: self.stokes_narrow / self.antistokes_narrow,
        }
    }
}

/// Stokes sideband S(δΩ) = ⟨b_R(−δΩ) b_R†(δΩ)⟩/2π on a grid of offsets.
pub fn stokes_spectrum<T: Real>(rates: &DerivedRates<T>, n_bar: T, grid: &[T]) -> Result<Vec<T>> {
    let shape = SidebandShape::from_rates(rates, n_bar)?;
    Ok(grid.iter().map(|&d| shape.stokes_at(d)).collect())
}

/// Anti-Stokes sideband S(δΩ) = ⟨b_R†(−δΩ) b_R(δΩ)⟩/2π on a grid of offsets.
pub fn antistokes_spectrum<T: Real>(rates: &DerivedRates<T>, n_bar: T, grid: &[T]) -> Result<Vec<T>> {
    let shape = SidebandShape::from_rates(rates, n_bar)?;
    let values: Vec<T> = grid.iter().map(|&d| shape.antistokes_at(d)).collect();
    check_nonnegative(&values)?;
    Ok(values)
}

/// Y-quadrature spectrum Γ_eff(2n̄+1)/(4(δΩ²+Γ₊²/4)).
pub fn yy_spectrum_at<T: Real>(shape: &SidebandShape<T>, d: T) -> T {
    let g = shape.gamma_broad();
    shape.gamma_eff * (T::two() * shape.n_bar + T::one()) / (T::lit(4.0) * (d * d + g * g / T::lit(4.0)))
}

/// X-quadrature spectrum Γ_eff(2n̄+1)/(4(δΩ²+Γ₋²/4)).
pub fn xx_spectrum_at<T: Real>(shape: &SidebandShape<T>, d: T) -> T {
    let g = shape.gamma_narrow();
    shape.gamma_eff * (T::two() * shape.n_bar + T::one()) / (T::lit(4.0) * (d * d + g * g / T::lit(4.0)))
}

/// Symmetrized spectrum of X_θ = (e^{iθ} b_R + e^{−iθ} b_R†)/2.
///
/// Writing χ = θ + φ/2, X_θ = cos χ·Y + sin χ·X. Besides the Y and X
/// Lorentzians the anomalous input correlator c contributes through
/// ρ = Re(e^{−iφ}c) (to Y and X) and K = Im(e^{−iφ}c) (to the Y-X
/// cross-spectrum). With the phase convention used here ρ vanishes.
pub fn quadrature_spectrum<T: Real>(rates: &DerivedRates<T>, n_bar: T, theta: T, grid: &[T]) -> Result<Vec<T>> {
    let shape = SidebandShape::from_rates(rates, n_bar)?;
    // A negative s is the same dynamics with φ shifted by π.
    let phi = if rates.s < T::zero() { rates.phi + T::PI() } else { rates.phi };
    let rotated = rates.anomalous * num_complex::Complex::from_polar(T::one(), -phi);
    let (rho, k) = (rotated.re, rotated.im);
    let chi = theta + phi * T::half();
    let (sin, cos) = chi.sin_cos();
    let gp = shape.gamma_broad();
    let gm = shape.gamma_narrow();
    let q = T::lit(4.0);
    Ok(grid
        .iter()
        .map(|&d| {
            let dp = d * d + gp * gp / q;
            let dm = d * d + gm * gm / q;
            let yy = yy_spectrum_at(&shape, d) + T::two() * rho / (q * dp);
            let xx = xx_spectrum_at(&shape, d) - T::two() * rho / (q * dm);
            let cross = -(T::two() * sin * cos) * k * (d * d + gp * gm / q) / (T::two() * dp * dm);
            cos * cos * yy + sin * sin * xx + cross
        })
        .collect())
}

/// Quadrature variances in absolute units: (σ_X², σ_Y², σ₀²).
pub fn quadrature_variances<T: Real>(n_bar: T, s: T) -> (T, T, T) {
    let sigma0 = (T::two() * n_bar + T::one()) / T::lit(4.0);
    let s = s.abs();
    (sigma0 / (T::one() - s), sigma0 / (T::one() + s), sigma0)
}

/// Sideband asymmetry ratios of the whole sidebands (R₀) and of their broad
/// (R₊) and narrow (R₋) components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratios<T> {
    pub r0: T,
    pub r_plus: T,
    pub r_minus: T,
}

impl<T: Real> Ratios<T> {
    /// Applies an external multiplicative correction to every ratio.
    pub fn corrected(&self, factor: T) -> Self {
        Self {
            r0: self.r0 * factor,
            r_plus: self.r_plus * factor,
            r_minus: self.r_minus * factor,
        }
    }
}

pub fn sideband_ratios<T: Real>(n_bar: T, s: T) -> Ratios<T> {
    let h = s.abs() * T::half();
    let r0 = if n_bar == T::zero() {
        T::infinity()
    } else {
        (n_bar + T::one()) / n_bar
    };
    Ratios {
        r0,
        r_plus: (n_bar + T::one() + h) / (n_bar - h),
        r_minus: (n_bar + T::one() - h) / (n_bar + h),
    }
}

/// n̄ implied by a measured thermal asymmetry R₀ = 1 + 1/n̄.
pub fn n_bar_from_r0<T: Real>(r0: T) -> T {
    T::one() / (r0 - T::one())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezingCriterion<T> {
    /// True when the squeezed quadrature is below the zero-point level.
    pub below_zero_point: bool,
    /// s − 2n̄.
    pub margin: T,
}

/// Squeezing below the zero-point level: σ_Y² < 1/4, equivalently s > 2n̄.
pub fn squeezing_criterion<T: Real>(n_bar: T, s: T) -> SqueezingCriterion<T> {
    let margin = s - T::two() * n_bar;
    SqueezingCriterion {
        below_zero_point: margin > T::zero(),
        margin,
    }
}

/// Heterodyne spectrum with the Stokes sideband at Ω_m + Δ_LO and the
/// anti-Stokes sideband at Ω_m − Δ_LO, on absolute angular frequencies.
pub fn heterodyne_composite<T: Real>(
    rates: &DerivedRates<T>,
    n_bar: T,
    delta_lo: T,
    calibration: T,
    floor: T,
    grid: &[T],
) -> Result<(SpectrumModel<T>, Vec<T>)> {
    if !(delta_lo > T::zero()) {
        return Err(Error::invalid("delta_lo", "must be > 0"));
    }
    let shape = SidebandShape::from_rates(rates, n_bar)?;
    let stokes_center = rates.omega_m + delta_lo;
    let anti_center = rates.omega_m - delta_lo;
    let (lo, hi) = grid
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    if !(lo < anti_center && hi > stokes_center) {
        return Err(Error::GridTooNarrow(format!(
            "grid [{lo}, {hi}] must contain {anti_center} and {stokes_center}"
        )));
    }
    let mut components: Vec<Lorentzian<T>> =
        shape.stokes_components().iter().map(|c| c.shifted(stokes_center)).collect();
    components.extend(shape.antistokes_components().iter().map(|c| c.shifted(anti_center)));
    let model = SpectrumModel::new(components, floor, calibration)?;
    let values = model.eval_nonnegative(grid)?;
    Ok((model, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(n: f64, s: f64) -> SidebandShape<f64> {
        SidebandShape::new(1.0, s, n).unwrap()
    }

    fn rates(n: f64, s: f64) -> DerivedRates<f64> {
        DerivedRates::phenomenological(1.0, s, n).unwrap()
    }

    #[test]
    fn thermal_sidebands_are_single_lorentzians() {
        let sh = shape(5.8, 0.0);
        let a = sh.areas();
        assert!((a.stokes() - 6.8).abs() < 1e-12);
        assert!((a.antistokes() - 5.8).abs() < 1e-12);
        assert!((sh.stokes_at(0.0) - 4.0 * 6.8 / 1.0).abs() < 1e-12);
        let g = [-3.0, -0.2, 0.0, 0.7, 2.0];
        let single = Lorentzian::new(0.0, 1.0, 6.8);
        for (v, d) in stokes_spectrum(&rates(5.8, 0.0), 5.8, &g).unwrap().iter().zip(g) {
            assert!((v - single.eval(d)).abs() < 1e-12);
        }
    }

    #[test]
    fn squeezed_component_areas() {
        let a = shape(5.8, 0.53).areas();
        assert!((a.stokes_narrow - 6.952_127_659_574_469).abs() < 1e-12);
        assert!((a.stokes_broad - 2.308_823_529_411_764_5).abs() < 1e-12);
        assert!((a.stokes() - a.antistokes() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn negative_broad_component_below_zero_point() {
        let sh = shape(0.12, 0.4);
        let (_, broad) = sh.antistokes_weights();
        assert!((broad + 0.08).abs() < 1e-15);
        let grid: Vec<f64> = (-500..=500).map(|i| i as f64 * 0.01).collect();
        let v = antistokes_spectrum(&rates(0.12, 0.4), 0.12, &grid).unwrap();
        assert!(v.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn ratios_reference_values() {
        let r = sideband_ratios(5.8_f64, 0.0);
        assert!((r.r0 - 1.172_413_793).abs() < 1e-6);
        assert_eq!(r.r_plus, r.r0);
        assert_eq!(r.r_minus, r.r0);
        let r = sideband_ratios(5.8_f64, 0.53);
        assert!((r.r_plus - 1.276_422_764_227_642_2).abs() < 1e-12);
        assert!((r.r_minus - 1.077_493_816_982_687_8).abs() < 1e-12);
        let r = sideband_ratios(0.12_f64, 0.4);
        assert!((r.r_plus + 16.5).abs() < 1e-9);
        assert!(sideband_ratios(0.0_f64, 0.0).r0.is_infinite());
        assert!((n_bar_from_r0(1.172_413_793_103_448_3_f64) - 5.8).abs() < 1e-9);
    }

    #[test]
    fn criterion_cases() {
        let c = squeezing_criterion(0.12_f64, 0.4);
        assert!(c.below_zero_point);
        assert!((c.margin - 0.16).abs() < 1e-15);
        assert!(!squeezing_criterion(5.8, 0.53).below_zero_point);
        assert!(!squeezing_criterion(0.0, 0.0).below_zero_point);
        let (_, sy, _) = quadrature_variances(0.12_f64, 0.4);
        assert!(sy < 0.25);
    }

    #[test]
    fn variances_reference_values() {
        let (sx, sy, s0) = quadrature_variances(5.8_f64, 0.53);
        assert!((sy - 2.058_823_529).abs() < 1e-8);
        assert!((sx - 6.702_127_659).abs() < 1e-8);
        assert!((s0 - 3.15).abs() < 1e-12);
    }

    #[test]
    fn quadrature_at_y_and_x_angles() {
        let r = rates(5.8, 0.53);
        let grid = [-2.0, -0.1, 0.0, 0.3, 1.5];
        let sh = SidebandShape::from_rates(&r, 5.8).unwrap();
        let y = quadrature_spectrum(&r, 5.8, -r.phi / 2.0, &grid).unwrap();
        let x = quadrature_spectrum(&r, 5.8, -r.phi / 2.0 + std::f64::consts::FRAC_PI_2, &grid).unwrap();
        for i in 0..grid.len() {
            assert!((y[i] - yy_spectrum_at(&sh, grid[i])).abs() < 1e-12);
            assert!((x[i] - xx_spectrum_at(&sh, grid[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn thermal_quadratures_are_isotropic() {
        let r = rates(3.0, 0.0);
        let grid = [-1.0, 0.0, 0.5];
        let a = quadrature_spectrum(&r, 3.0, 0.1, &grid).unwrap();
        let b = quadrature_spectrum(&r, 3.0, 1.3, &grid).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn heterodyne_composite_places_sidebands() {
        let r = rates(5.8, 0.0);
        let mut r = r;
        r.omega_m = 1000.0;
        let grid: Vec<f64> = (0..=4000).map(|i| 900.0 + i as f64 * 0.05).collect();
        let (model, values) = heterodyne_composite(&r, 5.8, 11.0, 2.0, 0.5, &grid).unwrap();
        assert_eq!(model.components.len(), 4);
        assert_eq!(model.components[0].center - model.components[2].center, 22.0);
        let stokes: f64 = model.components[..2].iter().map(|c| c.area).sum();
        let anti: f64 = model.components[2..].iter().map(|c| c.area).sum();
        assert!((stokes / anti - 6.8 / 5.8).abs() < 1e-12);
        assert!(values.iter().all(|&v| v >= 0.5));

        let (_, flat) = heterodyne_composite(&r, 5.8, 11.0, 0.0, 0.5, &grid).unwrap();
        assert!(flat.iter().all(|&v| v == 0.5));

        let narrow: Vec<f64> = (0..100).map(|i| 995.0 + i as f64 * 0.1).collect();
        assert!(matches!(
            heterodyne_composite(&r, 5.8, 11.0, 1.0, 0.0, &narrow),
            Err(Error::GridTooNarrow(_))
        ));
    }
}
