//! Monte Carlo campaigns: synthesize drive-on/off pairs from known truth,
//! fit them and collect the distribution of the fitted s.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_double_pair, fit_single_pair, FitOptions, FitResult, BOUND_TOLERANCE};
use crate::error::{Error, Result};
use crate::hz_to_rad;
use crate::rates::DerivedRates;
use crate::synth::{child_seed, make_onoff_pair_from_rates, Detection, OnOffPair};

/// Fraction of failed trials above which a study is marked invalid.
pub const MAX_FAILED_FRACTION: f64 = 0.05;
/// Width of the histogram bins of the fitted s.
pub const HISTOGRAM_BIN: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Truth {
    pub gamma_eff_hz: f64,
    pub n_bar: f64,
    pub s: f64,
    pub center_hz: f64,
}

impl Default for Truth {
    fn default() -> Self {
        Self {
            gamma_eff_hz: 4500.0,
            n_bar: 5.8,
            s: 0.0,
            center_hz: 530e3,
        }
    }
}

impl Truth {
    /// (drive-on, drive-off) rate sets.
    pub fn rates(&self) -> Result<(DerivedRates<f64>, DerivedRates<f64>)> {
        let on = DerivedRates::phenomenological(hz_to_rad(self.gamma_eff_hz), self.s, self.n_bar)?
            .with_omega_m(hz_to_rad(self.center_hz));
        Ok((on, on.without_parametric()))
    }

    pub fn pair(&self, detection: &Detection, seed: u64) -> Result<OnOffPair> {
        let (on, off) = self.rates()?;
        make_onoff_pair_from_rates(&on, &off, detection, seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub truth: Truth,
    pub detection: Detection,
    pub trials: usize,
    pub seed: u64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            truth: Truth::default(),
            detection: Detection::default(),
            trials: 6000,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub index: usize,
    pub seed: u64,
    pub off: FitResult,
    pub on: FitResult,
}

impl TrialOutcome {
    pub fn converged(&self) -> bool {
        self.off.converged && self.on.converged
    }

    pub fn s(&self) -> f64 {
        self.on.s.map_or(f64::NAN, |e| e.value)
    }
}

/// Fits a synthesized pair: single model on the drive-off member, then the
/// double model on the drive-on member with Γ_eff and centres taken from it.
pub fn fit_pair(pair: &OnOffPair, opts: &FitOptions) -> Result<(FitResult, FitResult)> {
    let off = fit_single_pair(&pair.drive_off, None, opts)?;
    let on = fit_double_pair(&pair.drive_on, off.gamma_eff_hz.value, Some(&off.hint()), opts)?;
    Ok((off, on))
}

pub fn run_trial(cfg: &StudyConfig, index: usize, opts: &FitOptions) -> Result<TrialOutcome> {
    let seed = child_seed(cfg.seed, index as u64);
    let pair = cfg.truth.pair(&cfg.detection, seed)?;
    let (off, on) = fit_pair(&pair, opts)?;
    Ok(TrialOutcome { index, seed, off, on })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub config: StudyConfig,
    pub trials: usize,
    /// Trials whose fits both converged; the statistics use only these.
    pub used: usize,
    pub failed: usize,
    pub failed_fraction: f64,
    /// More than 5% of the trials failed.
    pub invalid: bool,
    pub mean_s: f64,
    pub std_s: f64,
    pub skewness_s: f64,
    /// Fraction of used trials with s on the lower bound.
    pub fraction_at_zero: f64,
    pub mean_gamma_eff_hz: f64,
    pub mean_n_bar: f64,
    pub histogram: Vec<HistogramBin>,
    pub s_values: Vec<f64>,
}

impl StudyReport {
    pub fn write_histogram_csv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "s_lo,s_hi,count")?;
        for b in &self.histogram {
            writeln!(w, "{},{},{}", b.lo, b.hi, b.count)?;
        }
        Ok(())
    }
}

fn moments(v: &[f64]) -> (f64, f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let m2 = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m3 = v.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
    let std = (m2 * n / (n - 1.0)).sqrt();
    let skew = if m2 > 0.0 { m3 / m2.powf(1.5) } else { 0.0 };
    (mean, std, skew)
}

fn histogram(v: &[f64]) -> Vec<HistogramBin> {
    let top = v.iter().cloned().fold(0.0, f64::max);
    let bins = ((top / HISTOGRAM_BIN).floor() as usize + 1).max(1);
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|k| HistogramBin {
            lo: k as f64 * HISTOGRAM_BIN,
            hi: (k + 1) as f64 * HISTOGRAM_BIN,
            count: 0,
        })
        .collect();
    for x in v {
        let k = ((x / HISTOGRAM_BIN).floor() as usize).min(bins - 1);
        out[k].count += 1;
    }
    out
}

/// Runs `cfg.trials` independent trials in parallel. Trial i uses the seed
/// `child_seed(cfg.seed, i)`, so results do not depend on the thread count.
pub fn monte_carlo(cfg: &StudyConfig, opts: &FitOptions) -> Result<StudyReport> {
    if cfg.trials < 2 {
        return Err(Error::invalid("trials", "need at least 2"));
    }
    cfg.detection.validate()?;
    cfg.truth.rates()?;
    let outcomes: Vec<Option<TrialOutcome>> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| run_trial(cfg, i, opts).ok())
        .collect();
    let good: Vec<&TrialOutcome> = outcomes.iter().flatten().filter(|t| t.converged()).collect();
    let failed = cfg.trials - good.len();
    let failed_fraction = failed as f64 / cfg.trials as f64;
    let s_values: Vec<f64> = good.iter().map(|t| t.s()).collect();
    if s_values.len() < 2 {
        return Err(Error::Fit(format!("only {} of {} trials converged", s_values.len(), cfg.trials)));
    }
    let (mean_s, std_s, skewness_s) = moments(&s_values);
    let used = s_values.len();
    let mean_of = |f: &dyn Fn(&TrialOutcome) -> f64| good.iter().map(|t| f(t)).sum::<f64>() / used as f64;
    Ok(StudyReport {
        config: cfg.clone(),
        trials: cfg.trials,
        used,
        failed,
        failed_fraction,
        invalid: failed_fraction > MAX_FAILED_FRACTION,
        mean_s,
        std_s,
        skewness_s,
        fraction_at_zero: s_values.iter().filter(|&&s| s < BOUND_TOLERANCE).count() as f64 / used as f64,
        mean_gamma_eff_hz: mean_of(&|t| t.off.gamma_eff_hz.value),
        mean_n_bar: mean_of(&|t| t.off.n_bar.value),
        histogram: histogram(&s_values),
        s_values,
    })
}

/// Fewest trials for which a bias study reports moments.
pub const MIN_BIAS_TRIALS: usize = 100;

/// Monte Carlo with s = 0 truth: the distribution of the fitted s measures
/// the bias of the two-stage procedure.
pub fn bias_study(cfg: &StudyConfig, opts: &FitOptions) -> Result<StudyReport> {
    if cfg.trials < MIN_BIAS_TRIALS {
        return Err(Error::invalid("trials", format!("a bias study needs at least {MIN_BIAS_TRIALS}")));
    }
    if cfg.truth.s != 0.0 {
        return Err(Error::invalid("s", "a bias study needs s = 0 truth"));
    }
    monte_carlo(cfg, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_counts_everything() {
        let h = histogram(&[0.0, 0.001, 0.0051, 0.02]);
        assert_eq!(h.iter().map(|b| b.count).sum::<usize>(), 4);
        assert_eq!(h[0].count, 2);
    }

    #[test]
    fn trial_is_deterministic() {
        let cfg = StudyConfig::default();
        let a = run_trial(&cfg, 3, &FitOptions::default()).unwrap();
        let b = run_trial(&cfg, 3, &FitOptions::default()).unwrap();
        // NaN sigmas compare unequal, so compare the serialized form.
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
