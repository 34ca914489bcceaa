//! Single Lorentzian plus floor, for quadrature and envelope spectra.
//! Parameters `[centre, width, area, floor]`, or `[width, area, floor]` when
//! the centre is held.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::lm::{minimize, LeastSquares};
use super::{Estimate, FitOptions};
use crate::error::{Error, Result};
use crate::spectrum::SpectrumData;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakFit {
    pub center_hz: Estimate,
    /// FWHM.
    pub width_hz: Estimate,
    /// ∫ S df of the Lorentzian.
    pub area: Estimate,
    pub floor: Estimate,
    pub chi2_reduced: f64,
    pub converged: bool,
    pub iterations: usize,
}

struct PeakProblem {
    fixed_center: Option<f64>,
    freq: Vec<f64>,
    data: Vec<f64>,
    weight: Vec<f64>,
}

impl PeakProblem {
    fn full(&self, p: &[f64]) -> [f64; 4] {
        match self.fixed_center {
            Some(c) => [c, p[0], p[1], p[2]],
            None => [p[0], p[1], p[2], p[3]],
        }
    }

    fn model_at(&self, q: &[f64; 4], f: f64, grad: Option<&mut [f64; 4]>) -> f64 {
        let [c, w, a, floor] = *q;
        let x = f - c;
        let d = x * x + 0.25 * w * w;
        let l = w / (std::f64::consts::TAU * d);
        if let Some(g) = grad {
            g[0] = a * 2.0 * x * l / d;
            g[1] = a * (x * x - 0.25 * w * w) / (std::f64::consts::TAU * d * d);
            g[2] = l;
            g[3] = 1.0;
        }
        a * l + floor
    }
}

impl LeastSquares for PeakProblem {
    fn n_params(&self) -> usize {
        if self.fixed_center.is_some() { 3 } else { 4 }
    }

    fn n_residuals(&self) -> usize {
        self.freq.len()
    }

    fn evaluate(&self, p: &[f64], r: &mut DVector<f64>, jac: Option<&mut DMatrix<f64>>) {
        let q = self.full(p);
        let skip = 4 - self.n_params();
        let mut g = [0.0; 4];
        match jac {
            None => {
                for i in 0..self.freq.len() {
                    r[i] = (self.model_at(&q, self.freq[i], None) - self.data[i]) * self.weight[i];
                }
            }
            Some(j) => {
                for i in 0..self.freq.len() {
                    let w = self.weight[i];
                    r[i] = (self.model_at(&q, self.freq[i], Some(&mut g)) - self.data[i]) * w;
                    for k in skip..4 {
                        j[(i, k - skip)] = g[k] * w;
                    }
                }
            }
        }
    }

    fn data_norm_sq(&self) -> f64 {
        self.data.iter().zip(&self.weight).map(|(y, w)| (y * w).powi(2)).sum()
    }
}

/// Fits one Lorentzian and a floor to the unmasked bins of `spec`. With
/// `center_hz` given the centre is held there (a one-sided spectrum of a
/// baseband process is centred at 0).
pub fn fit_lorentzian(spec: &SpectrumData, center_hz: Option<f64>, opts: &FitOptions) -> Result<PeakFit> {
    let keep: Vec<usize> = (0..spec.len()).filter(|&i| !spec.mask[i] && spec.psd[i] > 0.0).collect();
    if keep.len() < 8 {
        return Err(Error::InsufficientData(format!("{} usable bins for a peak fit", keep.len())));
    }
    let freq: Vec<f64> = keep.iter().map(|&i| spec.freq_hz[i]).collect();
    let data: Vec<f64> = keep.iter().map(|&i| spec.psd[i]).collect();

    let mut sorted = data.clone();
    sorted.sort_by(f64::total_cmp);
    let floor = sorted[sorted.len() / 10];
    let top = (0..data.len()).max_by(|&a, &b| data[a].total_cmp(&data[b])).unwrap();
    let c0 = center_hz.unwrap_or(freq[top]);
    let height = (data[top] - floor).max(f64::MIN_POSITIVE);
    let half = floor + 0.5 * height;
    let right = (top..data.len()).find(|&i| data[i] < half).unwrap_or(data.len() - 1);
    let w0 = (2.0 * (freq[right] - c0).abs()).max(spec.resolution_hz);
    let a0 = height * std::f64::consts::PI * w0 / 2.0;

    let root_n = (spec.n_avg as f64).sqrt();
    let mut problem = PeakProblem {
        fixed_center: center_hz,
        weight: data.iter().map(|y| root_n / y).collect(),
        freq,
        data,
    };
    let mut p: Vec<f64> = match center_hz {
        Some(_) => vec![w0, a0, floor],
        None => vec![c0, w0, a0, floor],
    };
    let mut scale: Vec<f64> = vec![w0, a0, floor.abs().max(1e-300)];
    if center_hz.is_none() {
        scale.insert(0, w0);
    }

    let mut reference = None;
    let mut iterations = 0;
    let mut last = None;
    for _ in 0..=opts.max_reweights {
        let out = minimize(&problem, &p, &scale, &opts.lm, reference);
        reference.get_or_insert(out.initial_gradient);
        iterations += out.iterations;
        p = out.params.clone();
        let q = problem.full(&p);
        let mut change: f64 = 0.0;
        for (w, &f) in problem.weight.iter_mut().zip(&problem.freq) {
            let m = problem_model(&q, f);
            if m > 0.0 {
                change = change.max((root_n / m / *w - 1.0).abs());
                *w = root_n / m;
            }
        }
        last = Some(out);
        if change < 1e-3 {
            break;
        }
    }
    let out = last.expect("at least one pass");
    let mut r = DVector::zeros(problem.n_residuals());
    problem.evaluate(&p, &mut r, None);
    let dof = (problem.n_residuals() - problem.n_params()) as f64;
    let cov = out.normal.clone().cholesky().map(|c| c.inverse());
    let sd = |i: usize| cov.as_ref().map_or(f64::NAN, |c| c[(i, i)].max(0.0).sqrt());
    let q = problem.full(&p);
    let off = usize::from(center_hz.is_none());
    if q[1] <= 0.0 {
        return Err(Error::Fit(format!("negative fitted width {}", q[1])));
    }
    Ok(PeakFit {
        center_hz: Estimate::new(q[0], if off == 1 { sd(0) } else { f64::NAN }),
        width_hz: Estimate::new(q[1], sd(off)),
        area: Estimate::new(q[2], sd(off + 1)),
        floor: Estimate::new(q[3], sd(off + 2)),
        chi2_reduced: r.norm_squared() / dof,
        converged: out.converged,
        iterations,
    })
}

fn problem_model(q: &[f64; 4], f: f64) -> f64 {
    let x = f - q[0];
    q[2] * q[1] / (std::f64::consts::TAU * (x * x + 0.25 * q[1] * q[1])) + q[3]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spectrum(c: f64, w: f64, a: f64, floor: f64) -> SpectrumData {
        let f = SpectrumData::grid(0.0, 0.5, 400);
        let psd = f.iter().map(|&f| problem_model(&[c, w, a, floor], f)).collect();
        SpectrumData::new(f, psd, 20).unwrap()
    }

    #[test]
    fn recovers_free_centre() {
        let fit = fit_lorentzian(&spectrum(80.0, 6.0, 30.0, 0.01), None, &FitOptions::default()).unwrap();
        assert!(fit.converged);
        assert!((fit.center_hz.value - 80.0).abs() < 1e-8);
        assert!((fit.width_hz.value / 6.0 - 1.0).abs() < 1e-8);
        assert!((fit.area.value / 30.0 - 1.0).abs() < 1e-8);
    }

    #[test]
    fn recovers_half_line_at_dc() {
        let fit = fit_lorentzian(&spectrum(0.0, 9.0, 5.0, 0.002), Some(0.0), &FitOptions::default()).unwrap();
        assert!((fit.width_hz.value / 9.0 - 1.0).abs() < 1e-8);
        assert!(fit.center_hz.sigma.is_nan());
    }
}
