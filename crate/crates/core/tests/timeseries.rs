use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use omsqueeze::fit::{fit_single_pair, FitOptions};
use omsqueeze::lineshape::{self, SidebandShape};
use omsqueeze::rates::DerivedRates;
use omsqueeze::synth::{lockin_demodulate, segment_average, segment_average_real, synth_timeseries, HeterodyneSeries};
use omsqueeze::hz_to_rad;

const CENTER_HZ: f64 = 40e3;
const LO_HZ: f64 = 1000.0;

fn rates(s: f64) -> DerivedRates<f64> {
    DerivedRates::phenomenological(hz_to_rad(50.0), s, 3.0)
        .unwrap()
        .with_omega_m(hz_to_rad(CENTER_HZ))
}

// Mean of data/model over bins within `half` Hz of `center`.
fn band_ratio(freq: &[f64], psd: &[f64], model: impl Fn(f64) -> f64, center: f64, half: f64) -> f64 {
    let r: Vec<f64> = freq
        .iter()
        .zip(psd)
        .filter(|(f, _)| (**f - center).abs() <= half)
        .map(|(f, p)| p / model(*f))
        .collect();
    r.iter().sum::<f64>() / r.len() as f64
}

#[test]
fn heterodyne_series_reproduces_composite_spectrum() {
    let r = rates(0.5);
    let floor = 1e-3;
    let series = synth_timeseries(&r, 3.0, hz_to_rad(LO_HZ), 8000.0, 400.0, floor, 17).unwrap();
    let spec = segment_average(&series, 1.0, 1.0).unwrap();
    assert_eq!(spec.n_avg, 400);
    let grid: Vec<f64> = spec.freq_hz.iter().map(|&f| hz_to_rad(f)).collect();
    let (model, _) = lineshape::heterodyne_composite(&r, 3.0, hz_to_rad(LO_HZ), 1.0, floor, &grid).unwrap();
    let m = |f: f64| model.eval(hz_to_rad(f));
    for c in [CENTER_HZ + LO_HZ, CENTER_HZ - LO_HZ] {
        for half in [10.0, 150.0] {
            let ratio = band_ratio(&spec.freq_hz, &spec.psd, m, c, half);
            assert!((ratio - 1.0).abs() < 0.03, "band {c}±{half}: {ratio}");
        }
    }
    let far = band_ratio(&spec.freq_hz, &spec.psd, m, CENTER_HZ + 3000.0, 300.0);
    assert!((far - 1.0).abs() < 0.02, "{far}");
}

#[test]
fn lockin_quadratures_follow_closed_forms() {
    let r = rates(0.5);
    let series = synth_timeseries(&r, 3.0, hz_to_rad(LO_HZ), 8000.0, 400.0, 0.0, 5).unwrap();
    let shape = SidebandShape::from_rates(&r, 3.0).unwrap();
    // Y sits at θ = −φ/2 and X a quarter turn away.
    for (theta, exact) in [
        (-r.phi / 2.0, lineshape::yy_spectrum_at as fn(&SidebandShape<f64>, f64) -> f64),
        (-r.phi / 2.0 + FRAC_PI_2, lineshape::xx_spectrum_at),
    ] {
        let o = lockin_demodulate(&series, CENTER_HZ, theta, 2.0 * LO_HZ).unwrap();
        let spec = segment_average_real(&o, series.fs, 1.0, 1.0).unwrap();
        let m = |f: f64| exact(&shape, hz_to_rad(f - LO_HZ));
        let ratio = band_ratio(&spec.freq_hz, &spec.psd, m, LO_HZ, 100.0);
        assert!((ratio - 1.0).abs() < 0.03, "theta {theta}: {ratio}");
    }
}

#[test]
fn lockin_period_is_half_turn() {
    let r = rates(0.5);
    let series = synth_timeseries(&r, 3.0, hz_to_rad(LO_HZ), 8000.0, 20.0, 1e-3, 2).unwrap();
    let psd = |theta: f64| {
        let o = lockin_demodulate(&series, CENTER_HZ, theta, 2.0 * LO_HZ).unwrap();
        segment_average_real(&o, series.fs, 1.0, 1.0).unwrap().psd
    };
    let (a, b) = (psd(0.3), psd(0.3 + std::f64::consts::PI));
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-9 * x.abs().max(1e-30), "{x} {y}");
    }
}

#[test]
fn thermal_quadratures_are_indistinguishable() {
    let r = rates(0.0);
    let series = synth_timeseries(&r, 3.0, hz_to_rad(LO_HZ), 8000.0, 400.0, 1e-4, 8).unwrap();
    let spec = |theta: f64| {
        let o = lockin_demodulate(&series, CENTER_HZ, theta, 2.0 * LO_HZ).unwrap();
        segment_average_real(&o, series.fs, 1.0, 1.0).unwrap()
    };
    let (x, y) = (spec(0.0), spec(FRAC_PI_2));
    let band = |s: &omsqueeze::SpectrumData| -> f64 {
        s.freq_hz.iter().zip(&s.psd).filter(|(f, _)| (**f - LO_HZ).abs() <= 100.0).map(|(_, p)| p).sum()
    };
    let ratio = band(&x) / band(&y);
    assert!((ratio - 1.0).abs() < 0.03, "{ratio}");
}

#[test]
fn protocol_segmenting() {
    let r = rates(0.0);
    let series = synth_timeseries(&r, 3.0, hz_to_rad(LO_HZ), 8000.0, 100.0, 1e-3, 3).unwrap();
    let spec = segment_average(&series, 5.0, 0.2).unwrap();
    assert_eq!(spec.n_avg, 20);
    assert!((spec.resolution_hz / 0.2 - 1.0).abs() < 1e-9);
}

#[test]
fn constant_signal_is_all_dc() {
    let series = HeterodyneSeries {
        samples: vec![Complex64::new(0.7, -0.2); 4000],
        fs: 400.0,
        center_hz: CENTER_HZ,
        seed: 0,
    };
    let spec = segment_average(&series, 1.0, 1.0).unwrap();
    let dc = spec.bin_of(CENTER_HZ);
    let total: f64 = spec.psd.iter().sum();
    assert!(spec.psd[dc] > 0.0);
    assert!((spec.psd[dc] / total - 1.0).abs() < 1e-12);
}

#[test]
fn thermal_sidebands_fit_with_drive_off_model() {
    let r = rates(0.0);
    let series = synth_timeseries(&r, 3.0, hz_to_rad(LO_HZ), 8000.0, 400.0, 1e-3, 13).unwrap();
    let spec = segment_average(&series, 1.0, 1.0).unwrap().window(CENTER_HZ - 1600.0, CENTER_HZ + 1600.0).unwrap();
    let fit = fit_single_pair(&spec, None, &FitOptions::default()).unwrap();
    assert!(fit.converged);
    let g = fit.gamma_eff_hz;
    assert!((g.value - 50.0).abs() < 3.0 * g.sigma, "{} ± {}", g.value, g.sigma);
    let n = fit.n_bar;
    assert!((n.value - 3.0).abs() < 3.0 * n.sigma, "{} ± {}", n.value, n.sigma);
}
