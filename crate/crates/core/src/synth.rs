//! Synthetic measurement data: noisy averaged periodograms, heterodyne time
//! series, lock-in demodulation and drive-on/drive-off pairs.

use num_complex::Complex64;
use rand::RngCore;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::lineshape::{heterodyne_composite, SidebandShape, SpectrumModel};
use crate::oracle::welch::{averaged_periodogram, one_sided, two_sided, Window};
use crate::params::{PumpConfig, SystemParams};
use crate::rates::{derive_all, DerivedRates};
use crate::scalar::{hz_to_rad, rad_to_hz};
use crate::seed;
use crate::spectrum::SpectrumData;

/// Seed of child task `index` of a run seeded with `root`.
pub fn child_seed(root: u64, index: u64) -> u64 {
    seed::stream(root, index).next_u64()
}

/// Draws each bin as model·G/n_avg with G ~ Gamma(n_avg, 1), the law of an
/// average of `n_avg` periodograms of a Gaussian process. The model is
/// evaluated at angular frequency 2π·f.
pub fn synth_periodogram(model: &SpectrumModel<f64>, freq_hz: &[f64], n_avg: usize, seed: u64) -> Result<SpectrumData> {
    if n_avg == 0 {
        return Err(Error::invalid("n_avg", "must be >= 1"));
    }
    let mean: Vec<f64> = freq_hz.iter().map(|&f| model.eval(hz_to_rad(f))).collect();
    if let Some(index) = mean.iter().position(|v| !(*v >= 0.0)) {
        return Err(Error::NegativeSpectrum {
            index,
            value: mean[index],
        });
    }
    let gamma = Gamma::new(n_avg as f64, 1.0).map_err(|e| Error::invalid("n_avg", e.to_string()))?;
    let mut rng = seed::stream(seed, 0);
    let scale = 1.0 / n_avg as f64;
    let psd = mean.iter().map(|m| m * gamma.sample(&mut rng) * scale).collect();
    Ok(SpectrumData::new(freq_hz.to_vec(), psd, n_avg)?.with_meta("seed", seed))
}

/// Acquisition and analysis settings for synthetic heterodyne spectra.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Detection {
    /// LO offset; Stokes sits at Ω_m + Δ_LO, anti-Stokes at Ω_m − Δ_LO.
    pub delta_lo_hz: f64,
    /// Native periodogram resolution (1/segment length).
    pub resolution_hz: f64,
    /// Number of averaged periodograms.
    pub n_avg: usize,
    /// Adjacent native bins summed into one analysis bin. The sum of k
    /// Gamma(n) variates of equal mean is Gamma(k·n), so spectra are drawn
    /// directly on the coarse grid with n_avg·k averages.
    pub rebin: usize,
    pub calibration: f64,
    /// Stokes peak-to-floor ratio of the drive-off spectrum. Overrides `floor`.
    pub snr: Option<f64>,
    pub floor: f64,
    /// The grid covers Ω_m ± (Δ_LO + span_linewidths·Γ_eff).
    pub span_linewidths: f64,
    /// Emit the model itself instead of a noisy draw.
    pub noiseless: bool,
}

impl Default for Detection {
    fn default() -> Self {
        Self {
            delta_lo_hz: 11e3,
            resolution_hz: 0.2,
            n_avg: 10,
            rebin: 100,
            calibration: 1.0,
            snr: Some(30.0),
            floor: 0.0,
            span_linewidths: 6.0,
            noiseless: false,
        }
    }
}

impl Detection {
    pub fn analysis_resolution_hz(&self) -> f64 {
        self.resolution_hz * self.rebin as f64
    }

    pub fn analysis_n_avg(&self) -> usize {
        self.n_avg * self.rebin
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_lo_hz > 0.0) {
            return Err(Error::invalid("delta_lo_hz", "must be > 0"));
        }
        if !(self.resolution_hz > 0.0) || self.n_avg == 0 || self.rebin == 0 {
            return Err(Error::invalid("resolution_hz", "resolution, n_avg and rebin must be positive"));
        }
        if self.snr.is_some_and(|s| !(s > 0.0)) || self.floor < 0.0 || !(self.calibration >= 0.0) {
            return Err(Error::invalid("snr", "snr must be > 0, floor and calibration >= 0"));
        }
        if !(self.span_linewidths > 0.0) {
            return Err(Error::invalid("span_linewidths", "must be > 0"));
        }
        Ok(())
    }

    /// Analysis grid centred on `center_hz`.
    pub fn grid_hz(&self, center_hz: f64, gamma_eff_hz: f64) -> Vec<f64> {
        let res = self.analysis_resolution_hz();
        let half = self.delta_lo_hz + self.span_linewidths * gamma_eff_hz;
        let m = (half / res).ceil() as usize;
        (0..2 * m + 1).map(|i| center_hz + (i as f64 - m as f64) * res).collect()
    }

    /// Floor for a drive-off sideband shape.
    pub fn floor_for(&self, off: &SidebandShape<f64>) -> f64 {
        match self.snr {
            Some(snr) => self.calibration * off.stokes_at(0.0) / snr,
            None => self.floor,
        }
    }
}

/// Drive-on and drive-off spectra sharing one grid and average count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnOffPair {
    pub drive_on: SpectrumData,
    pub drive_off: SpectrumData,
    /// Physical parameters the pair was generated from, if any.
    pub shared_params: Option<SystemParams<f64>>,
    /// Γ_eff of the off spectrum, rad/s.
    pub gamma_eff_off: f64,
}

/// Pair generated from rate sets. The off member uses `off` with Γ_par
/// forced to zero. Ω_m is taken from `on`.
pub fn make_onoff_pair_from_rates(
    on: &DerivedRates<f64>,
    off: &DerivedRates<f64>,
    detection: &Detection,
    seed: u64,
) -> Result<OnOffPair> {
    detection.validate()?;
    let off = off.without_parametric();
    let on_shape = SidebandShape::from_rates(on, on.n_bar)?;
    let off_shape = SidebandShape::from_rates(&off, off.n_bar)?;
    let floor = detection.floor_for(&off_shape);
    let center_hz = rad_to_hz(on.omega_m);
    let grid_hz = detection.grid_hz(center_hz, rad_to_hz(on.gamma_eff.max(off.gamma_eff)));
    let grid: Vec<f64> = grid_hz.iter().map(|&f| hz_to_rad(f)).collect();
    let delta_lo = hz_to_rad(detection.delta_lo_hz);
    let n_avg = detection.analysis_n_avg();
    let (on_model, _) = heterodyne_composite(on, on.n_bar, delta_lo, detection.calibration, floor, &grid)?;
    let (off_model, _) = heterodyne_composite(&off.with_omega_m(on.omega_m), off.n_bar, delta_lo, detection.calibration, floor, &grid)?;
    let meta = |r: &DerivedRates<f64>, shape: &SidebandShape<f64>| {
        json!({
            "gamma_eff_hz": rad_to_hz(r.gamma_eff),
            "n_bar": shape.n_bar,
            "s": shape.s,
            "center_hz": center_hz,
            "delta_lo_hz": detection.delta_lo_hz,
            "floor": floor,
            "calibration": detection.calibration,
            "native_resolution_hz": detection.resolution_hz,
            "native_n_avg": detection.n_avg,
        })
    };
    let draw = |model: &SpectrumModel<f64>, seed: u64| {
        if detection.noiseless {
            let psd = model.eval_nonnegative(&grid)?;
            Ok(SpectrumData::new(grid_hz.clone(), psd, n_avg)?.with_meta("seed", seed))
        } else {
            synth_periodogram(model, &grid_hz, n_avg, seed)
        }
    };
    let drive_off = draw(&off_model, child_seed(seed, 0))?
        .with_meta("truth", meta(&off, &off_shape))
        .with_meta("drive", "off");
    let drive_on = draw(&on_model, child_seed(seed, 1))?
        .with_meta("truth", meta(on, &on_shape))
        .with_meta("drive", "on");
    Ok(OnOffPair {
        drive_on,
        drive_off,
        shared_params: None,
        gamma_eff_off: off.gamma_eff,
    })
}

/// Pair generated from physical parameters. The off member is derived from
/// `pump_off` when given (for instance the detuned-tone configuration), else
/// from `pump`; in both cases its coherent parametric coupling is removed
/// while the cooling of both tones is kept.
pub fn make_onoff_pair(
    params: &SystemParams<f64>,
    pump: &PumpConfig<f64>,
    pump_off: Option<&PumpConfig<f64>>,
    detection: &Detection,
    seed: u64,
) -> Result<OnOffPair> {
    let on = derive_all(params, pump)?;
    let off = match pump_off {
        Some(p) => derive_all(params, p)?,
        None => on,
    };
    let mut pair = make_onoff_pair_from_rates(&on, &off, detection, seed)?;
    pair.shared_params = Some(*params);
    Ok(pair)
}

/// Complex heterodyne-analog series, baseband relative to `center_hz`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeterodyneSeries {
    pub samples: Vec<Complex64>,
    pub fs: f64,
    /// Absolute frequency of baseband zero (Ω_m/2π).
    pub center_hz: f64,
    pub seed: u64,
}

fn complex_normal(rng: &mut seed::Rng) -> Complex64 {
    let a: f64 = StandardNormal.sample(rng);
    let b: f64 = StandardNormal.sample(rng);
    Complex64::new(a, b) * std::f64::consts::FRAC_1_SQRT_2
}

/// Lower Cholesky factor of a 2×2 Hermitian positive semidefinite matrix.
fn cholesky2(c: [[Complex64; 2]; 2]) -> [[Complex64; 2]; 2] {
    let zero = Complex64::new(0.0, 0.0);
    let l11 = c[0][0].re.max(0.0).sqrt();
    let l21 = if l11 > 0.0 { c[1][0] / l11 } else { zero };
    let l22 = (c[1][1].re - l21.norm_sqr()).max(0.0).sqrt();
    [[Complex64::new(l11, 0.0), zero], [l21, Complex64::new(l22, 0.0)]]
}

/// Synthetic heterodyne series z(t) = e^{iΔ_LO t} q(t) + e^{−iΔ_LO t} p*(t) + w(t).
///
/// (p, q) is a classical pair obeying the same linear dynamics as (b_R, b_R†),
/// driven by independent circular white noises of intensities ⟨b_in†b_in⟩ and
/// ⟨b_in b_in†⟩. Their spectra are then exactly the ordered anti-Stokes and
/// Stokes sidebands. The anomalous input correlator is not included, so the
/// sidebands carry no dispersive part. The process is advanced with its exact
/// discrete-time transition in the eigenbasis, started from the stationary
/// state. `floor` is the two-sided PSD of the white measurement noise w.
pub fn synth_timeseries(
    rates: &DerivedRates<f64>,
    n_bar: f64,
    delta_lo: f64,
    fs: f64,
    duration: f64,
    floor: f64,
    seed: u64,
) -> Result<HeterodyneSeries> {
    let delta_lo_hz = rad_to_hz(delta_lo);
    if !(fs > 4.0 * delta_lo_hz) {
        return Err(Error::Aliasing { fs, delta_lo: delta_lo_hz });
    }
    if !(duration > 0.0) || floor < 0.0 {
        return Err(Error::invalid("duration", "duration must be > 0 and floor >= 0"));
    }
    SidebandShape::from_rates(rates, n_bar)?;
    let noise = crate::oracle::NoiseCorrelators::from_rates(rates, n_bar);
    let dt = 1.0 / fs;
    let n = (duration * fs).round() as usize;

    // Eigenbasis of [[Γe/2, h e^{iφ}], [h e^{−iφ}, Γe/2]]: v± = (e^{iφ/2}, ±e^{−iφ/2})/√2.
    let h = rates.gamma_par / 2.0;
    let lam = [rates.gamma_eff / 2.0 + h, rates.gamma_eff / 2.0 - h];
    let e = Complex64::from_polar(std::f64::consts::FRAC_1_SQRT_2, rates.phi / 2.0);
    let u = [[e, e], [e.conj(), -e.conj()]];
    let n_diag = [noise.c_bdagb, noise.c_bbdag];
    // Σ' = U† N U
    let mut sigma = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            sigma[i][j] = (0..2).map(|k| u[k][i].conj() * n_diag[k] * u[k][j]).sum();
        }
    }
    let mut stationary = sigma;
    let mut step_cov = sigma;
    for i in 0..2 {
        for j in 0..2 {
            let l = lam[i] + lam[j];
            stationary[i][j] = sigma[i][j] / l;
            step_cov[i][j] = sigma[i][j] * (-(-l * dt).exp_m1()) / l;
        }
    }
    let decay = [(-lam[0] * dt).exp(), (-lam[1] * dt).exp()];
    let l0 = cholesky2(stationary);
    let ls = cholesky2(step_cov);
    let white = (floor * fs).sqrt();

    let mut rng = seed::stream(seed, 0);
    let draw = |l: &[[Complex64; 2]; 2], rng: &mut seed::Rng| {
        let (a, b) = (complex_normal(rng), complex_normal(rng));
        [l[0][0] * a, l[1][0] * a + l[1][1] * b]
    };
    let mut y = draw(&l0, &mut rng);
    let rot = Complex64::from_polar(1.0, delta_lo * dt);
    let mut phase = Complex64::new(1.0, 0.0);
    let mut samples = Vec::with_capacity(n);
    for k in 0..n {
        let p = u[0][0] * y[0] + u[0][1] * y[1];
        let q = u[1][0] * y[0] + u[1][1] * y[1];
        let z = phase * q + phase.conj() * p.conj() + complex_normal(&mut rng) * white;
        samples.push(z);
        let w = draw(&ls, &mut rng);
        y = [y[0] * decay[0] + w[0], y[1] * decay[1] + w[1]];
        // Renormalize the rotating phasor now and then to stop drift.
        phase = if k % 1024 == 1023 {
            Complex64::from_polar(1.0, delta_lo * dt * (k + 1) as f64)
        } else {
            phase * rot
        };
    }
    Ok(HeterodyneSeries {
        samples,
        fs,
        center_hz: rad_to_hz(rates.omega_m),
        seed,
    })
}

/// Lock-in output o(t) = Re[e^{−iθ} z(t) e^{−2πi(f_demod − center)t}]/√2,
/// brick-wall low-passed at `lowpass_cutoff` Hz. With f_demod at the series
/// centre its one-sided PSD near Δ_LO is the quadrature spectrum S_θ(ω − Δ_LO).
pub fn lockin_demodulate(series: &HeterodyneSeries, f_demod: f64, theta: f64, lowpass_cutoff: f64) -> Result<Vec<f64>> {
    if !(lowpass_cutoff > 0.0 && lowpass_cutoff < f_demod) {
        return Err(Error::invalid("lowpass_cutoff", "must satisfy 0 < cutoff < f_demod"));
    }
    let shift = f_demod - series.center_hz;
    let dt = 1.0 / series.fs;
    let e = Complex64::from_polar(std::f64::consts::FRAC_1_SQRT_2, -theta);
    let mut buf: Vec<Complex64> = series
        .samples
        .iter()
        .enumerate()
        .map(|(k, z)| {
            let ref_phase = Complex64::from_polar(1.0, -std::f64::consts::TAU * shift * dt * k as f64);
            Complex64::new((e * z * ref_phase).re, 0.0)
        })
        .collect();
    let n = buf.len();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let df = series.fs / n as f64;
    for (k, b) in buf.iter_mut().enumerate() {
        let f = if k <= n / 2 { k as f64 * df } else { (n - k) as f64 * df };
        if f > lowpass_cutoff {
            *b = Complex64::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    Ok(buf.iter().map(|b| b.re / n as f64).collect())
}

fn segment_len(fs: f64, segment_seconds: f64, resolution_hz: f64) -> Result<usize> {
    if !(segment_seconds > 0.0) || ((1.0 / segment_seconds) - resolution_hz).abs() > 1e-9 * resolution_hz {
        return Err(Error::invalid("resolution_hz", "must equal 1/segment_seconds"));
    }
    let len = segment_seconds * fs;
    if (len - len.round()).abs() > 1e-6 || len < 1.0 {
        return Err(Error::invalid(
            "segment_seconds",
            format!("segment of {segment_seconds} s is not a whole number of samples at {fs} Hz"),
        ));
    }
    Ok(len.round() as usize)
}

/// Non-overlapping rectangular-window periodograms of a heterodyne series,
/// averaged; two-sided, on absolute frequencies.
pub fn segment_average(series: &HeterodyneSeries, segment_seconds: f64, resolution_hz: f64) -> Result<SpectrumData> {
    let len = segment_len(series.fs, segment_seconds, resolution_hz)?;
    let (p, count) = averaged_periodogram(&series.samples, series.fs, len, len, Window::Rectangular)?;
    let base = two_sided(&p, series.fs, count)?;
    let freq = base.freq_hz.iter().map(|f| f + series.center_hz).collect();
    Ok(SpectrumData::new(freq, base.psd, count)?.with_meta("seed", series.seed))
}

/// Same estimator for a real series (lock-in output); one-sided.
pub fn segment_average_real(x: &[f64], fs: f64, segment_seconds: f64, resolution_hz: f64) -> Result<SpectrumData> {
    let len = segment_len(fs, segment_seconds, resolution_hz)?;
    let z: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let (p, count) = averaged_periodogram(&z, fs, len, len, Window::Rectangular)?;
    one_sided(&p, fs, count)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(level: f64) -> SpectrumModel<f64> {
        SpectrumModel::new(vec![], level, 1.0).unwrap()
    }

    #[test]
    fn periodogram_is_reproducible() {
        let grid = SpectrumData::grid(0.0, 1.0, 100);
        let a = synth_periodogram(&flat(2.0), &grid, 10, 3).unwrap();
        let b = synth_periodogram(&flat(2.0), &grid, 10, 3).unwrap();
        let c = synth_periodogram(&flat(2.0), &grid, 10, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.psd, c.psd);
    }

    #[test]
    fn periodogram_noise_law() {
        let grid = SpectrumData::grid(0.0, 1.0, 10_000);
        let d = synth_periodogram(&flat(2.0), &grid, 10, 11).unwrap();
        let mean = d.psd.iter().sum::<f64>() / d.len() as f64;
        let var = d.psd.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (d.len() - 1) as f64;
        assert!((mean / 2.0 - 1.0).abs() < 0.01);
        assert!((var.sqrt() / mean / 0.1_f64.sqrt() - 1.0).abs() < 0.05);
        let big = synth_periodogram(&flat(2.0), &grid[..100], 1_000_000, 1).unwrap();
        assert!(big.psd.iter().all(|v| (v / 2.0 - 1.0).abs() < 0.005));
    }

    #[test]
    fn pair_shares_grid() {
        let on = DerivedRates::phenomenological(hz_to_rad(4500.0), 0.53, 5.8).unwrap().with_omega_m(hz_to_rad(530e3));
        let off = on.without_parametric();
        let p = make_onoff_pair_from_rates(&on, &off, &Detection::default(), 1).unwrap();
        assert_eq!(p.drive_on.freq_hz, p.drive_off.freq_hz);
        assert_eq!(p.drive_on.n_avg, 1000);
        assert!((p.drive_on.resolution_hz - 20.0).abs() < 1e-9);
    }

    #[test]
    fn aliasing_and_filter_preconditions() {
        let r = DerivedRates::phenomenological(100.0, 0.0, 1.0).unwrap();
        assert!(matches!(
            synth_timeseries(&r, 1.0, hz_to_rad(1000.0), 3000.0, 1.0, 0.0, 1),
            Err(Error::Aliasing { .. })
        ));
        let s = synth_timeseries(&r, 1.0, hz_to_rad(100.0), 1000.0, 1.0, 0.0, 1).unwrap();
        assert!(lockin_demodulate(&s, 10.0, 0.0, 20.0).is_err());
    }

    #[test]
    fn floor_only_series_is_flat() {
        let mut r = DerivedRates::phenomenological(1.0, 0.0, 0.0).unwrap();
        r.gamma_m = 1e-12;
        let s = synth_timeseries(&r, 0.0, hz_to_rad(100.0), 1000.0, 200.0, 0.5, 2).unwrap();
        let spec = segment_average(&s, 1.0, 1.0).unwrap();
        let mean = spec.psd.iter().sum::<f64>() / spec.len() as f64;
        assert!((mean / 0.5 - 1.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn segment_resolution_must_match() {
        let r = DerivedRates::phenomenological(10.0, 0.0, 1.0).unwrap();
        let s = synth_timeseries(&r, 1.0, hz_to_rad(100.0), 1000.0, 100.0, 0.0, 2).unwrap();
        assert!(segment_average(&s, 5.0, 0.3).is_err());
        let d = segment_average(&s, 5.0, 0.2).unwrap();
        assert_eq!(d.n_avg, 20);
        assert!((d.resolution_hz - 0.2).abs() < 1e-12);
    }
}
