//! Frequency-domain covariance propagation through the rotating-frame 2×2
//! system. Nothing here uses the closed-form lineshapes: every spectrum is a
//! contraction of the numerically inverted transfer matrix with the input
//! noise correlators.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rates::DerivedRates;
use crate::scalar::Real;

/// Γ₊/Γ₋ above which the determinant at δΩ = 0 is treated as ill-conditioned.
pub const CONDITION_LIMIT: f64 = 1e6;

/// System matrix
/// `[[−iδΩ + Γ_eff/2, (Γ_par/2)e^{iφ}], [(Γ_par/2)e^{−iφ}, −iδΩ + Γ_eff/2]]`
/// acting on (b̃_R, b̃_R†).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMatrix<T> {
    pub gamma_eff: T,
    pub gamma_par: T,
    pub phi: T,
}

impl<T: Real> TransferMatrix<T> {
    pub fn from_rates(rates: &DerivedRates<T>) -> Self {
        Self {
            gamma_eff: rates.gamma_eff,
            gamma_par: rates.gamma_par,
            phi: rates.phi,
        }
    }

    pub fn system(&self, d: T) -> [[Complex<T>; 2]; 2] {
        let diag = Complex::new(self.gamma_eff * T::half(), -d);
        let h = self.gamma_par * T::half();
        [
            [diag, Complex::from_polar(h, self.phi)],
            [Complex::from_polar(h, -self.phi), diag],
        ]
    }

    pub fn determinant(&self, d: T) -> Complex<T> {
        let m = self.system(d);
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    /// Rows of the inverse system: b̃_R = r₀ b̃_in + r₁ b̃_in† and
    /// b̃_R† = t₀ b̃_in + t₁ b̃_in†.
    pub fn solve(&self, d: T) -> ([Complex<T>; 2], [Complex<T>; 2]) {
        let m = self.system(d);
        let det = self.determinant(d);
        ([m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det])
    }
}

/// Input noise correlators (per unit bandwidth) in the ordering
/// (b̃_in, b̃_in†).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseCorrelators<T> {
    /// ⟨b̃_in b̃_in†⟩.
    pub c_bbdag: T,
    /// ⟨b̃_in† b̃_in⟩.
    pub c_bdagb: T,
    /// ⟨b̃_in b̃_in⟩.
    pub c_anom: Complex<T>,
}

impl<T: Real> NoiseCorrelators<T> {
    /// Bath plus optical scattering: Γ_m(n̄_th+1)+A⁻ and Γ_m n̄_th+A⁺. Any
    /// occupancy in `n_bar` beyond the one set by these rates (probe
    /// back-action) enters as extra white noise Γ_eff·n_extra on both.
    pub fn from_rates(rates: &DerivedRates<T>, n_bar: T) -> Self {
        let bath = rates.gamma_m * rates.n_th;
        let extra = rates.gamma_eff * n_bar - (bath + rates.a_plus);
        let extra = if extra > T::zero() { extra } else { T::zero() };
        Self {
            c_bbdag: bath + rates.gamma_m + rates.a_minus + extra,
            c_bdagb: bath + rates.a_plus + extra,
            c_anom: rates.anomalous,
        }
    }

    pub fn without_anomalous(self) -> Self {
        Self {
            c_anom: Complex::new(T::zero(), T::zero()),
            ..self
        }
    }

    /// Contracts A(−δΩ) with B(δΩ) given their coefficients on
    /// (b̃_in, b̃_in†) at −δΩ and δΩ.
    fn contract(&self, a: [Complex<T>; 2], b: [Complex<T>; 2]) -> Complex<T> {
        let bbd = Complex::new(self.c_bbdag, T::zero());
        let bdb = Complex::new(self.c_bdagb, T::zero());
        a[0] * b[0] * self.c_anom + a[0] * b[1] * bbd + a[1] * b[0] * bdb + a[1] * b[1] * self.c_anom.conj()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OracleWarning {
    /// Γ₊/Γ₋ exceeds [`CONDITION_LIMIT`]; the determinant nearly vanishes at δΩ = 0.
    IllConditioned { ratio: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSpectra<T> {
    /// ⟨b̃_R(−δΩ) b̃_R†(δΩ)⟩, including the dispersive part from the anomalous
    /// correlator.
    pub stokes: Vec<T>,
    /// ⟨b̃_R†(−δΩ) b̃_R(δΩ)⟩.
    pub antistokes: Vec<T>,
    /// δΩ-even parts (S(δΩ) + S(−δΩ))/2 of the two sidebands.
    pub stokes_even: Vec<T>,
    pub antistokes_even: Vec<T>,
    /// Symmetrized quadrature spectra, one vector per requested angle.
    pub quadratures: Vec<(T, Vec<T>)>,
    pub warnings: Vec<OracleWarning>,
}

struct Sample<T> {
    stokes: T,
    antistokes: T,
    quadratures: Vec<T>,
}

fn sample<T: Real>(tm: &TransferMatrix<T>, noise: &NoiseCorrelators<T>, d: T, thetas: &[T]) -> Sample<T> {
    let (r_p, t_p) = tm.solve(d);
    let (r_m, t_m) = tm.solve(-d);
    let stokes = noise.contract(r_m, t_p).re;
    let antistokes = noise.contract(t_m, r_p).re;
    let quadratures = thetas
        .iter()
        .map(|&theta| {
            let e = Complex::from_polar(T::one(), theta);
            let ec = e.conj();
            let half = T::half();
            let x = |r: [Complex<T>; 2], t: [Complex<T>; 2]| {
                [(e * r[0] + ec * t[0]) * half, (e * r[1] + ec * t[1]) * half]
            };
            let (xp, xm) = (x(r_p, t_p), x(r_m, t_m));
            (noise.contract(xm, xp).re + noise.contract(xp, xm).re) * half
        })
        .collect();
    Sample {
        stokes,
        antistokes,
        quadratures,
    }
}

/// Sideband and symmetrized quadrature spectra on a grid of offsets δΩ
/// (rad/s). X_θ = (e^{iθ} b_R + e^{−iθ} b_R†)/2.
pub fn propagate_spectra<T: Real>(
    rates: &DerivedRates<T>,
    noise: &NoiseCorrelators<T>,
    grid: &[T],
    thetas: &[T],
) -> Result<OracleSpectra<T>> {
    if !(rates.s.abs() < T::one()) {
        return Err(Error::ParametricInstability { s: rates.s.as_f64() });
    }
    if !(rates.gamma_eff > T::zero()) {
        return Err(Error::AntiDamping {
            gamma_eff: rates.gamma_eff.as_f64(),
        });
    }
    let tm = TransferMatrix::from_rates(rates);
    let mut warnings = Vec::new();
    let gp = (rates.gamma_eff + rates.gamma_par.abs()).as_f64();
    let gm = (rates.gamma_eff - rates.gamma_par.abs()).as_f64();
    if gp > CONDITION_LIMIT * gm {
        warnings.push(OracleWarning::IllConditioned { ratio: gp / gm });
    }
    let n = grid.len();
    let mut out = OracleSpectra {
        stokes: Vec::with_capacity(n),
        antistokes: Vec::with_capacity(n),
        stokes_even: Vec::with_capacity(n),
        antistokes_even: Vec::with_capacity(n),
        quadratures: thetas.iter().map(|&t| (t, Vec::with_capacity(n))).collect(),
        warnings,
    };
    for &d in grid {
        let plus = sample(&tm, noise, d, thetas);
        let minus = sample(&tm, noise, -d, &[]);
        out.stokes.push(plus.stokes);
        out.antistokes.push(plus.antistokes);
        out.stokes_even.push((plus.stokes + minus.stokes) * T::half());
        out.antistokes_even.push((plus.antistokes + minus.antistokes) * T::half());
        for (slot, v) in out.quadratures.iter_mut().zip(plus.quadratures) {
            slot.1.push(v);
        }
    }
    Ok(out)
}
