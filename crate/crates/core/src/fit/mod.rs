//! Two-stage Lorentzian fitting of heterodyne sideband pairs.
//!
//! The drive-off spectrum is fitted with one Lorentzian per sideband (common
//! width Γ_eff). The drive-on spectrum is then fitted with two Lorentzians
//! per sideband of widths Γ_eff(1∓s), Γ_eff held at the drive-off value.
//! Bins are weighted by σ = model/√n_avg, iterated to self-consistency.

pub mod lm;
pub mod model;
pub mod peak;
pub mod study;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::spectrum::SpectrumData;
use lm::{minimize, LeastSquares, LmOptions};
pub use model::{Form, PairKind, PairProblem, S_MAX};
use model::{ds_du, s_of_u, u_of_s};

pub use peak::{fit_lorentzian, PeakFit};
pub use study::{bias_study, monte_carlo, run_trial, StudyConfig, StudyReport, TrialOutcome, Truth};

/// s below this is reported as sitting on the lower bound.
pub const BOUND_TOLERANCE: f64 = 1e-6;
/// Masked fraction of a peak region above which a warning is attached.
pub const MASK_WARNING_FRACTION: f64 = 0.8;

fn nan_as_null<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() { s.serialize_f64(*v) } else { s.serialize_none() }
}

fn null_as_nan<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

/// Value with a one-standard-error uncertainty. Non-finite numbers are
/// written as `null`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    #[serde(serialize_with = "nan_as_null", deserialize_with = "null_as_nan")]
    pub value: f64,
    #[serde(serialize_with = "nan_as_null", deserialize_with = "null_as_nan")]
    pub sigma: f64,
}

impl Estimate {
    pub fn new(value: f64, sigma: f64) -> Self {
        Self { value, sigma }
    }
}

/// Starting values for a fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitHint {
    pub stokes_center_hz: f64,
    pub antistokes_center_hz: f64,
    pub gamma_hz: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub lm: LmOptions,
    pub max_reweights: usize,
    /// Multiplies every fitted area ratio (external asymmetry calibration).
    pub ratio_correction: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            lm: LmOptions::default(),
            max_reweights: 4,
            ratio_correction: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub kind: PairKind,
    pub stokes_center_hz: Estimate,
    pub antistokes_center_hz: Estimate,
    /// Fitted (single) or imposed (double, σ = null) linewidth.
    pub gamma_eff_hz: Estimate,
    pub s: Option<Estimate>,
    /// One area per sideband for the single model, `[narrow, broad]` for
    /// the double model.
    pub stokes_areas: Vec<Estimate>,
    pub antistokes_areas: Vec<Estimate>,
    pub floor: Estimate,
    pub r0: Estimate,
    pub r_plus: Option<Estimate>,
    pub r_minus: Option<Estimate>,
    /// 1/(R₀ − 1).
    pub n_bar: Estimate,
    pub chi2_reduced: f64,
    pub n_bins: usize,
    pub converged: bool,
    pub iterations: usize,
    /// max_j |∂C/∂p_j|·scale_j at the solution relative to the start.
    pub gradient: f64,
    pub s_at_bound: bool,
    pub warnings: Vec<String>,
}

impl FitResult {
    pub fn hint(&self) -> FitHint {
        FitHint {
            stokes_center_hz: self.stokes_center_hz.value,
            antistokes_center_hz: self.antistokes_center_hz.value,
            gamma_hz: Some(self.gamma_eff_hz.value),
        }
    }

    /// Fitted Lorentzians as (centre, width, area), Hz, Stokes first. The
    /// double model lists narrow before broad.
    pub fn components(&self) -> Vec<(f64, f64, f64)> {
        let g = self.gamma_eff_hz.value;
        let widths = match self.s {
            Some(s) => vec![g * (1.0 - s.value), g * (1.0 + s.value)],
            None => vec![g],
        };
        let mut out = Vec::new();
        for (c, areas) in [(self.stokes_center_hz.value, &self.stokes_areas), (self.antistokes_center_hz.value, &self.antistokes_areas)] {
            out.extend(widths.iter().zip(areas.iter()).map(|(&w, a)| (c, w, a.value)));
        }
        out
    }

    /// Fitted model at `f_hz`, floor included.
    pub fn model_at(&self, f_hz: f64) -> f64 {
        self.floor.value + self.components().iter().map(|&(c, w, a)| lorentz_hz(f_hz - c, w, a)).sum::<f64>()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Lorentzian of FWHM `w` and area `a` (∫ df) at offset `x`, all in Hz.
pub fn lorentz_hz(x: f64, w: f64, a: f64) -> f64 {
    a * w / (std::f64::consts::TAU * (x * x + 0.25 * w * w))
}

/// Copy of `spectrum` with every bin inside one of the `[lo, hi]` ranges
/// (Hz) excluded from fits. Existing mask bits are kept.
pub fn apply_mask(spectrum: &SpectrumData, ranges: &[(f64, f64)]) -> SpectrumData {
    let mut out = spectrum.clone();
    for (m, f) in out.mask.iter_mut().zip(&spectrum.freq_hz) {
        if ranges.iter().any(|&(lo, hi)| *f >= lo && *f <= hi) {
            *m = true;
        }
    }
    out
}

fn moving_average(y: &[f64], half: usize) -> Vec<f64> {
    let n = y.len();
    let mut prefix = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + y[i];
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

fn percentile(v: &[f64], q: f64) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    s[((s.len() - 1) as f64 * q).round() as usize]
}

/// Smoothed data with masked bins replaced by the median.
fn smoothed(spec: &SpectrumData) -> Vec<f64> {
    let kept: Vec<f64> = spec.psd.iter().zip(&spec.mask).filter(|(_, m)| !**m).map(|(v, _)| *v).collect();
    let median = percentile(&kept, 0.5);
    let y: Vec<f64> = spec.psd.iter().zip(&spec.mask).map(|(v, m)| if *m { median } else { *v }).collect();
    moving_average(&y, (spec.len() / 400).max(2))
}

struct Peak {
    fwhm: f64,
}

fn peak_at(ys: &[f64], floor: f64, index: usize, res: f64) -> Peak {
    let half = floor + 0.5 * (ys[index] - floor);
    let mut l = index;
    while l > 0 && ys[l] > half {
        l -= 1;
    }
    let mut r = index;
    while r + 1 < ys.len() && ys[r] > half {
        r += 1;
    }
    Peak {
        fwhm: ((r - l) as f64 * res).max(2.0 * res),
    }
}

fn argmax(ys: &[f64], allowed: impl Fn(usize) -> bool) -> Option<usize> {
    (0..ys.len()).filter(|&i| allowed(i)).max_by(|&a, &b| ys[a].total_cmp(&ys[b]))
}

/// ∫ (ys − floor) df over |f − c| ≤ 2Γ, scaled to the full Lorentzian area.
fn area_near(spec: &SpectrumData, ys: &[f64], floor: f64, center: f64, gamma: f64) -> f64 {
    let inside = (2.0 / std::f64::consts::PI) * (4.0_f64).atan();
    let sum: f64 = spec
        .freq_hz
        .iter()
        .zip(ys)
        .filter(|(f, _)| (**f - center).abs() <= 2.0 * gamma)
        .map(|(_, y)| y - floor)
        .sum();
    (sum * spec.resolution_hz / inside).max(1e-12 * floor.abs().max(f64::MIN_POSITIVE))
}

struct Guess {
    stokes: f64,
    anti: f64,
    gamma: f64,
    area_stokes: f64,
    area_anti: f64,
    floor: f64,
    smooth: Vec<f64>,
}

fn initial_guess(spec: &SpectrumData, hint: Option<&FitHint>) -> Result<Guess> {
    let ys = smoothed(spec);
    let floor = percentile(&ys, 0.1);
    let res = spec.resolution_hz;
    let (stokes, anti, gamma) = match hint {
        Some(h) => {
            let gamma = match h.gamma_hz {
                Some(g) => g,
                None => peak_at(&ys, floor, spec.bin_of(h.stokes_center_hz), res).fwhm,
            };
            (h.stokes_center_hz, h.antistokes_center_hz, gamma)
        }
        None => {
            let i1 = argmax(&ys, |_| true).ok_or_else(|| Error::Fit("empty spectrum".into()))?;
            if !(ys[i1] > floor) {
                return Err(Error::Fit("no sideband peak above the floor".into()));
            }
            let p1 = peak_at(&ys, floor, i1, res);
            let exclusion = 3.0 * p1.fwhm;
            let i2 = argmax(&ys, |i| (spec.freq_hz[i] - spec.freq_hz[i1]).abs() > exclusion)
                .filter(|&i| ys[i] > floor)
                .ok_or_else(|| Error::Fit("only one sideband peak found".into()))?;
            let (hi, lo) = if i1 > i2 { (i1, i2) } else { (i2, i1) };
            (spec.freq_hz[hi], spec.freq_hz[lo], p1.fwhm)
        }
    };
    if !(gamma > 0.0) {
        return Err(Error::Fit("non-positive initial linewidth".into()));
    }
    Ok(Guess {
        stokes,
        anti,
        gamma,
        area_stokes: area_near(spec, &ys, floor, stokes, gamma),
        area_anti: area_near(spec, &ys, floor, anti, gamma),
        floor,
        smooth: ys,
    })
}

fn mask_warnings(spec: &SpectrumData, g: &Guess) -> Vec<String> {
    let mut out = Vec::new();
    for (name, c) in [("Stokes", g.stokes), ("anti-Stokes", g.anti)] {
        let (mut total, mut masked) = (0usize, 0usize);
        for (f, m) in spec.freq_hz.iter().zip(&spec.mask) {
            if (f - c).abs() <= g.gamma {
                total += 1;
                masked += *m as usize;
            }
        }
        if total > 0 && masked as f64 > MASK_WARNING_FRACTION * total as f64 {
            out.push(format!("{:.0}% of the {name} peak region is masked", 100.0 * masked as f64 / total as f64));
        }
    }
    out
}

fn build_problem(spec: &SpectrumData, form: Form, g: &Guess, gamma: f64) -> Result<PairProblem> {
    let keep: Vec<usize> = (0..spec.len()).filter(|&i| !spec.mask[i]).collect();
    if keep.len() < 2 * form.n_params() {
        return Err(Error::InsufficientData(format!(
            "{} unmasked bins for a {}-parameter fit",
            keep.len(),
            form.n_params()
        )));
    }
    let root_n = (spec.n_avg as f64).sqrt();
    Ok(PairProblem {
        form,
        freq: keep.iter().map(|&i| spec.freq_hz[i]).collect(),
        data: keep.iter().map(|&i| spec.psd[i]).collect(),
        weight: keep.iter().map(|&i| root_n / g.smooth[i].max(1e-300)).collect(),
        ref_stokes: g.stokes,
        ref_anti: g.anti,
        gamma,
    })
}

/// Sets weights from a model evaluation; returns the largest relative change.
fn reweight(problem: &mut PairProblem, p: &[f64], n_avg: usize) -> f64 {
    let root_n = (n_avg as f64).sqrt();
    let model = problem.model(p);
    let mut change: f64 = 0.0;
    for (w, m) in problem.weight.iter_mut().zip(model) {
        // A non-positive model value cannot set a weight; keep the old one.
        if m > 0.0 {
            let new = root_n / m;
            change = change.max((new / *w - 1.0).abs());
            *w = new;
        }
    }
    change
}

fn cost_of(problem: &PairProblem, p: &[f64]) -> f64 {
    let mut r = DVector::zeros(problem.n_residuals());
    problem.evaluate(p, &mut r, None);
    r.norm_squared()
}

struct Solved {
    params: Vec<f64>,
    cov: Option<DMatrix<f64>>,
    /// Σr² with the final weights.
    cost: f64,
    chi2_reduced: f64,
    converged: bool,
    iterations: usize,
    gradient: f64,
    /// The problem carrying the final weights.
    problem: PairProblem,
}

fn solve(mut problem: PairProblem, p0: Vec<f64>, scale: &[f64], n_avg: usize, opts: &FitOptions) -> Solved {
    let mut p = p0;
    let mut iterations = 0;
    let mut reference = None;
    let mut last = None;
    for _ in 0..=opts.max_reweights {
        let out = minimize(&problem, &p, scale, &opts.lm, reference);
        reference.get_or_insert(out.initial_gradient);
        iterations += out.iterations;
        p = out.params.clone();
        let change = reweight(&mut problem, &p, n_avg);
        last = Some(out);
        if change < 1e-3 {
            break;
        }
    }
    let out = last.expect("at least one pass");
    let cost = cost_of(&problem, &p);
    let dof = (problem.n_residuals() - problem.n_params()) as f64;
    Solved {
        cov: out.normal.clone().cholesky().map(|c| c.inverse()),
        cost,
        chi2_reduced: cost / dof,
        converged: out.converged,
        gradient: out.gradient,
        iterations,
        params: p,
        problem,
    }
}

fn sigma(cov: &Option<DMatrix<f64>>, i: usize) -> f64 {
    cov.as_ref().map_or(f64::NAN, |c| c[(i, i)].max(0.0).sqrt())
}

/// Standard error of a function with the given gradient entries.
fn propagate(cov: &Option<DMatrix<f64>>, grad: &[(usize, f64)]) -> f64 {
    let Some(c) = cov else { return f64::NAN };
    let mut v = 0.0;
    for &(i, gi) in grad {
        for &(j, gj) in grad {
            v += gi * gj * c[(i, j)];
        }
    }
    v.max(0.0).sqrt()
}

/// Ratio num/den of sums of parameters, with its standard error.
fn ratio(cov: &Option<DMatrix<f64>>, p: &[f64], num: &[usize], den: &[usize], factor: f64) -> Estimate {
    let a: f64 = num.iter().map(|&i| p[i]).sum();
    let b: f64 = den.iter().map(|&i| p[i]).sum();
    let r = a / b;
    let mut grad: Vec<(usize, f64)> = num.iter().map(|&i| (i, 1.0 / b)).collect();
    grad.extend(den.iter().map(|&i| (i, -r / b)));
    Estimate::new(factor * r, factor * propagate(cov, &grad))
}

fn n_bar_of(r0: Estimate) -> Estimate {
    let d = r0.value - 1.0;
    if d > 0.0 {
        Estimate::new(1.0 / d, r0.sigma / (d * d))
    } else {
        Estimate::new(f64::NAN, f64::NAN)
    }
}

/// Single-Lorentzian-per-sideband fit of a drive-off spectrum.
pub fn fit_single_pair(spec: &SpectrumData, hint: Option<&FitHint>, opts: &FitOptions) -> Result<FitResult> {
    let g = initial_guess(spec, hint)?;
    let warnings = mask_warnings(spec, &g);
    let problem = build_problem(spec, Form::Single, &g, g.gamma)?;
    let n_bins = problem.n_residuals();
    let p0 = vec![0.0, 0.0, g.gamma, g.area_stokes, g.area_anti, g.floor];
    let scale = [g.gamma, g.gamma, g.gamma, g.area_stokes, g.area_anti, g.floor.abs().max(1e-300)];
    let sol = solve(problem, p0, &scale, spec.n_avg, opts);
    let (p, cov) = (&sol.params, &sol.cov);
    if !(p[2] > 0.0) {
        return Err(Error::Fit(format!("negative fitted linewidth {} Hz", p[2])));
    }
    let r0 = ratio(cov, p, &[3], &[4], opts.ratio_correction);
    Ok(FitResult {
        kind: PairKind::Single,
        stokes_center_hz: Estimate::new(g.stokes + p[0], sigma(cov, 0)),
        antistokes_center_hz: Estimate::new(g.anti + p[1], sigma(cov, 1)),
        gamma_eff_hz: Estimate::new(p[2], sigma(cov, 2)),
        s: None,
        stokes_areas: vec![Estimate::new(p[3], sigma(cov, 3))],
        antistokes_areas: vec![Estimate::new(p[4], sigma(cov, 4))],
        floor: Estimate::new(p[5], sigma(cov, 5)),
        r0,
        r_plus: None,
        r_minus: None,
        n_bar: n_bar_of(r0),
        chi2_reduced: sol.chi2_reduced,
        n_bins,
        converged: sol.converged,
        iterations: sol.iterations,
        gradient: sol.gradient,
        s_at_bound: false,
        warnings,
    })
}

/// Grid of s values scanned for the double-fit starting point.
const S_SCAN: std::ops::Range<usize> = 0..49;
fn s_scan(k: usize) -> f64 {
    0.01 + 0.02 * k as f64
}
/// Step used to probe the curvature of the cost in s at s = 0.
const S_PROBE: f64 = 1e-3;

/// With centres (and s) fixed both the double and the limit model are
/// linear in their remaining parameters; returns the weighted cost and
/// those parameters.
fn project(problem: &PairProblem, s: f64) -> Option<(f64, [f64; 5])> {
    let first = match problem.form {
        Form::Double => 3,
        Form::Limit => 2,
        Form::Single => return None,
    };
    let mut p = [0.0; 8];
    p[2] = u_of_s(s);
    let mut a = nalgebra::Matrix5::<f64>::zeros();
    let mut b = nalgebra::Vector5::<f64>::zeros();
    let mut g = [0.0; 8];
    let mut rows = Vec::with_capacity(problem.freq.len());
    for (i, &f) in problem.freq.iter().enumerate() {
        problem.model_at(&p, f, Some(&mut g));
        let w = problem.weight[i];
        let x = nalgebra::Vector5::from_column_slice(&g[first..first + 5]) * w;
        a += x * x.transpose();
        b += x * (problem.data[i] * w);
        rows.push(x);
    }
    let sol = a.cholesky()?.solve(&b);
    let cost = rows
        .iter()
        .zip(&problem.data)
        .zip(&problem.weight)
        .map(|((x, y), w)| (x.dot(&sol) - y * w).powi(2))
        .sum();
    Some((cost, [sol[0], sol[1], sol[2], sol[3], sol[4]]))
}

/// Double-model parameters equal to limit parameters `q` at squeezing `s`.
fn limit_to_double(q: &[f64], s: f64) -> Vec<f64> {
    vec![
        q[0],
        q[1],
        u_of_s(s),
        (q[2] - q[3] / s) / 2.0,
        (q[2] + q[3] / s) / 2.0,
        (q[4] - q[5] / s) / 2.0,
        (q[4] + q[5] / s) / 2.0,
        q[6],
    ]
}

/// Two-Lorentzian-per-sideband fit of a drive-on spectrum with Γ_eff fixed
/// (typically the drive-off fit value).
///
/// The cost is even in s, so s = 0 is always stationary. Its s → 0 limit is
/// fitted separately; when the cost curves upward in s there and no scanned
/// s does better, s = 0 is reported. The two components then coincide and
/// each sideband's total area is split evenly between them.
pub fn fit_double_pair(spec: &SpectrumData, gamma_eff_hz: f64, hint: Option<&FitHint>, opts: &FitOptions) -> Result<FitResult> {
    if !(gamma_eff_hz > 0.0) {
        return Err(Error::invalid("gamma_eff_hz", "must be > 0"));
    }
    let hint = hint.map(|h| FitHint {
        gamma_hz: Some(gamma_eff_hz),
        ..*h
    });
    let g = initial_guess(spec, hint.as_ref())?;
    let warnings = mask_warnings(spec, &g);
    let interior = build_problem(spec, Form::Double, &g, gamma_eff_hz)?;
    let limit = PairProblem {
        form: Form::Limit,
        ..interior.clone()
    };
    let n_bins = interior.n_residuals();
    let singular = || Error::Fit("singular linear subproblem".into());
    let (scan_cost, s0, lin) = S_SCAN
        .filter_map(|k| project(&interior, s_scan(k)).map(|(c, l)| (c, s_scan(k), l)))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .ok_or_else(singular)?;
    let (limit_scan_cost, lin0) = project(&limit, 0.0).ok_or_else(singular)?;

    let (sa, aa) = (g.area_stokes, g.area_anti);
    let fl = g.floor.abs().max(1e-300);
    let lim = solve(
        limit,
        vec![0.0, 0.0, lin0[0], lin0[1], lin0[2], lin0[3], lin0[4]],
        &[g.gamma, g.gamma, sa, sa, aa, aa, fl],
        spec.n_avg,
        opts,
    );
    let probe = PairProblem {
        form: Form::Double,
        ..lim.problem.clone()
    };
    let boundary_is_min = cost_of(&probe, &limit_to_double(&lim.params, S_PROBE)) >= lim.cost;

    let int = (!boundary_is_min || scan_cost < limit_scan_cost).then(|| {
        solve(
            interior,
            vec![0.0, 0.0, u_of_s(s0), lin[0], lin[1], lin[2], lin[3], lin[4]],
            &[g.gamma, g.gamma, 1.0, sa, sa, aa, aa, fl],
            spec.n_avg,
            opts,
        )
    });
    let int = int.filter(|i| !(boundary_is_min && (lim.cost <= i.cost || s_of_u(i.params[2]) < BOUND_TOLERANCE)));

    let iterations = lim.iterations + int.as_ref().map_or(0, |i| i.iterations);
    let base = |sol: &Solved| FitResult {
        kind: PairKind::Double,
        stokes_center_hz: Estimate::new(g.stokes + sol.params[0], sigma(&sol.cov, 0)),
        antistokes_center_hz: Estimate::new(g.anti + sol.params[1], sigma(&sol.cov, 1)),
        gamma_eff_hz: Estimate::new(gamma_eff_hz, f64::NAN),
        s: None,
        stokes_areas: vec![],
        antistokes_areas: vec![],
        floor: Estimate::new(f64::NAN, f64::NAN),
        r0: Estimate::new(f64::NAN, f64::NAN),
        r_plus: None,
        r_minus: None,
        n_bar: Estimate::new(f64::NAN, f64::NAN),
        chi2_reduced: sol.chi2_reduced,
        n_bins,
        converged: sol.converged,
        iterations,
        gradient: sol.gradient,
        s_at_bound: false,
        warnings: warnings.clone(),
    };
    let c = opts.ratio_correction;
    Ok(match int {
        Some(sol) => {
            let (p, cov) = (&sol.params, &sol.cov);
            let s = s_of_u(p[2]);
            let at_bound = s < BOUND_TOLERANCE || s > S_MAX * (1.0 - BOUND_TOLERANCE);
            let s_sigma = if at_bound { f64::NAN } else { ds_du(p[2]).abs() * sigma(cov, 2) };
            let r0 = ratio(cov, p, &[3, 4], &[5, 6], c);
            FitResult {
                s: Some(Estimate::new(s, s_sigma)),
                stokes_areas: vec![Estimate::new(p[3], sigma(cov, 3)), Estimate::new(p[4], sigma(cov, 4))],
                antistokes_areas: vec![Estimate::new(p[5], sigma(cov, 5)), Estimate::new(p[6], sigma(cov, 6))],
                floor: Estimate::new(p[7], sigma(cov, 7)),
                r0,
                r_plus: Some(ratio(cov, p, &[4], &[6], c)),
                r_minus: Some(ratio(cov, p, &[3], &[5], c)),
                n_bar: n_bar_of(r0),
                s_at_bound: at_bound,
                ..base(&sol)
            }
        }
        None => {
            let (p, cov) = (&lim.params, &lim.cov);
            let half = |i: usize| Estimate::new(p[i] / 2.0, sigma(cov, i) / 2.0);
            let r0 = ratio(cov, p, &[2], &[4], c);
            FitResult {
                s: Some(Estimate::new(0.0, f64::NAN)),
                stokes_areas: vec![half(2), half(2)],
                antistokes_areas: vec![half(4), half(4)],
                floor: Estimate::new(p[6], sigma(cov, 6)),
                r0,
                r_plus: Some(r0),
                r_minus: Some(r0),
                n_bar: n_bar_of(r0),
                s_at_bound: true,
                ..base(&lim)
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lineshape::heterodyne_composite;
    use crate::rates::DerivedRates;
    use crate::{hz_to_rad, synth};

    const CENTER: f64 = 530e3;

    fn noiseless(s: f64, n_avg: usize) -> SpectrumData {
        let r = DerivedRates::phenomenological(hz_to_rad(4500.0), s, 5.8).unwrap().with_omega_m(hz_to_rad(CENTER));
        let det = synth::Detection::default();
        let f = det.grid_hz(CENTER, 4500.0);
        let w: Vec<f64> = f.iter().map(|&x| hz_to_rad(x)).collect();
        let (_, v) = heterodyne_composite(&r, 5.8, hz_to_rad(11e3), 1.0, 2e-5, &w).unwrap();
        SpectrumData::new(f, v, n_avg).unwrap()
    }

    #[test]
    fn single_fit_recovers_noiseless_truth() {
        let fit = fit_single_pair(&noiseless(0.0, 1000), None, &FitOptions::default()).unwrap();
        assert!(fit.converged);
        assert!((fit.gamma_eff_hz.value - 4500.0).abs() < 1e-6);
        assert!((fit.stokes_center_hz.value - (CENTER + 11e3)).abs() < 1e-6);
        assert!((fit.r0.value - 6.8 / 5.8).abs() < 1e-9);
        assert!((fit.n_bar.value - 5.8).abs() < 1e-7);
        assert!(fit.chi2_reduced < 1e-12);
    }

    #[test]
    fn double_fit_recovers_noiseless_truth() {
        for s in [0.0, 0.3, 0.53] {
            let fit = fit_double_pair(&noiseless(s, 1000), 4500.0, None, &FitOptions::default()).unwrap();
            let got = fit.s.unwrap().value;
            assert!(fit.converged, "s = {s}");
            assert!((got - s).abs() < 1e-6, "s = {s}: {got}");
            assert_eq!(fit.s_at_bound, s == 0.0);
        }
    }

    #[test]
    fn mask_excludes_bins_and_warns() {
        let spec = noiseless(0.0, 1000);
        let masked = apply_mask(&spec, &[(CENTER + 11e3 - 5000.0, CENTER + 11e3 + 5000.0)]);
        let fit = fit_single_pair(&masked, Some(&FitHint { stokes_center_hz: CENTER + 11e3, antistokes_center_hz: CENTER - 11e3, gamma_hz: Some(4000.0) }), &FitOptions::default()).unwrap();
        assert!(fit.n_bins < spec.len());
        assert_eq!(fit.warnings.len(), 1);
    }

    #[test]
    fn nan_serializes_as_null() {
        let e = Estimate::new(1.0, f64::NAN);
        let j = serde_json::to_string(&e).unwrap();
        assert_eq!(j, r#"{"value":1.0,"sigma":null}"#);
        let back: Estimate = serde_json::from_str(&j).unwrap();
        assert!(back.sigma.is_nan());
    }
}
