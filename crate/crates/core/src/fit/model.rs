//! Sideband-pair models on a Hz grid.
//!
//! Single: `[δc_S, δc_A, Γ, A_S, A_A, floor]`.
//! Double: `[δc_S, δc_A, u, A_S⁻, A_S⁺, A_A⁻, A_A⁺, floor]` with
//! s = S_MAX·sin²u, widths Γ(1∓s) and Γ fixed.
//! Limit: `[δc_S, δc_A, T_S, E_S, T_A, E_A, floor]`, the s → 0 limit of the
//! double model with areas (T ∓ E/s)/2, i.e. T·L + E·Γ∂L/∂Γ.
//! Centres are offsets from the reference centres; areas are ∫ S df.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::lm::LeastSquares;

/// Upper end of the squeezing-parameter box.
pub const S_MAX: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairKind {
    Single,
    Double,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Form {
    Single,
    Double,
    Limit,
}

impl Form {
    pub fn n_params(self) -> usize {
        match self {
            Form::Single => 6,
            Form::Double => 8,
            Form::Limit => 7,
        }
    }
}

/// Unit-area Lorentzian in Hz and its derivatives with respect to the centre
/// and the width.
#[inline]
fn lorentz(x: f64, w: f64) -> (f64, f64, f64) {
    let d = x * x + 0.25 * w * w;
    let k = 1.0 / (std::f64::consts::TAU * d);
    let v = w * k;
    (v, 2.0 * x * v / d, (x * x - 0.25 * w * w) * k / d)
}

/// w·∂L/∂w of the unit-area Lorentzian and its derivative with respect to
/// the centre.
#[inline]
fn width_mode(x: f64, w: f64) -> (f64, f64) {
    let q = 0.25 * w * w;
    let d = x * x + q;
    let k = w / (std::f64::consts::TAU * d * d);
    (k * (x * x - q), -k * 2.0 * x * (3.0 * q - x * x) / d)
}

pub fn s_of_u(u: f64) -> f64 {
    S_MAX * u.sin().powi(2)
}

pub fn ds_du(u: f64) -> f64 {
    S_MAX * (2.0 * u).sin()
}

pub fn u_of_s(s: f64) -> f64 {
    (s / S_MAX).clamp(0.0, 1.0).sqrt().asin()
}

#[derive(Debug, Clone)]
pub struct PairProblem {
    pub form: Form,
    pub freq: Vec<f64>,
    pub data: Vec<f64>,
    /// 1/σ per bin.
    pub weight: Vec<f64>,
    pub ref_stokes: f64,
    pub ref_anti: f64,
    /// Fixed Γ of the double model, Hz.
    pub gamma: f64,
}

impl PairProblem {
    /// Model value and, if `grad` is given, its gradient at frequency `f`.
    pub fn model_at(&self, p: &[f64], f: f64, grad: Option<&mut [f64]>) -> f64 {
        let xs = f - self.ref_stokes - p[0];
        let xa = f - self.ref_anti - p[1];
        match self.form {
            Form::Single => {
                let (ls, dls_c, dls_w) = lorentz(xs, p[2]);
                let (la, dla_c, dla_w) = lorentz(xa, p[2]);
                if let Some(g) = grad {
                    g[0] = p[3] * dls_c;
                    g[1] = p[4] * dla_c;
                    g[2] = p[3] * dls_w + p[4] * dla_w;
                    g[3] = ls;
                    g[4] = la;
                    g[5] = 1.0;
                }
                p[3] * ls + p[4] * la + p[5]
            }
            Form::Limit => {
                let (ls, ls_c, _) = lorentz(xs, self.gamma);
                let (la, la_c, _) = lorentz(xa, self.gamma);
                let (ms, ms_c) = width_mode(xs, self.gamma);
                let (ma, ma_c) = width_mode(xa, self.gamma);
                if let Some(g) = grad {
                    g[0] = p[2] * ls_c + p[3] * ms_c;
                    g[1] = p[4] * la_c + p[5] * ma_c;
                    g[2] = ls;
                    g[3] = ms;
                    g[4] = la;
                    g[5] = ma;
                    g[6] = 1.0;
                }
                p[2] * ls + p[3] * ms + p[4] * la + p[5] * ma + p[6]
            }
            Form::Double => {
                let s = s_of_u(p[2]);
                let (wn, wb) = (self.gamma * (1.0 - s), self.gamma * (1.0 + s));
                let (sn, sn_c, sn_w) = lorentz(xs, wn);
                let (sb, sb_c, sb_w) = lorentz(xs, wb);
                let (an, an_c, an_w) = lorentz(xa, wn);
                let (ab, ab_c, ab_w) = lorentz(xa, wb);
                if let Some(g) = grad {
                    g[0] = p[3] * sn_c + p[4] * sb_c;
                    g[1] = p[5] * an_c + p[6] * ab_c;
                    let dw = self.gamma * ds_du(p[2]);
                    g[2] = dw * (-(p[3] * sn_w + p[5] * an_w) + p[4] * sb_w + p[6] * ab_w);
                    g[3] = sn;
                    g[4] = sb;
                    g[5] = an;
                    g[6] = ab;
                    g[7] = 1.0;
                }
                p[3] * sn + p[4] * sb + p[5] * an + p[6] * ab + p[7]
            }
        }
    }

    pub fn model(&self, p: &[f64]) -> Vec<f64> {
        self.freq.iter().map(|&f| self.model_at(p, f, None)).collect()
    }
}

impl LeastSquares for PairProblem {
    fn n_params(&self) -> usize {
        self.form.n_params()
    }

    fn n_residuals(&self) -> usize {
        self.freq.len()
    }

    fn evaluate(&self, p: &[f64], r: &mut DVector<f64>, jac: Option<&mut DMatrix<f64>>) {
        match jac {
            None => {
                for i in 0..self.freq.len() {
                    r[i] = (self.model_at(p, self.freq[i], None) - self.data[i]) * self.weight[i];
                }
            }
            Some(j) => {
                let mut g = [0.0; 8];
                let np = self.n_params();
                for i in 0..self.freq.len() {
                    let w = self.weight[i];
                    r[i] = (self.model_at(p, self.freq[i], Some(&mut g[..np])) - self.data[i]) * w;
                    for k in 0..np {
                        j[(i, k)] = g[k] * w;
                    }
                }
            }
        }
    }

    fn data_norm_sq(&self) -> f64 {
        self.data.iter().zip(&self.weight).map(|(y, w)| (y * w).powi(2)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(form: Form) -> PairProblem {
        let freq: Vec<f64> = (0..200).map(|i| 900.0 + i as f64).collect();
        PairProblem {
            form,
            data: vec![0.0; freq.len()],
            weight: freq.iter().map(|f| 1.0 + f * 1e-3).collect(),
            freq,
            ref_stokes: 1040.0,
            ref_anti: 960.0,
            gamma: 12.0,
        }
    }

    #[test]
    fn unit_area() {
        let sum: f64 = (-200_000..=200_000).map(|i| lorentz(i as f64 * 0.01, 3.0).0 * 0.01).sum();
        assert!((sum - 1.0).abs() < 1e-3);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        for (kind, p) in [
            (Form::Single, vec![0.3, -0.2, 11.0, 50.0, 40.0, 0.1]),
            (Form::Double, vec![0.3, -0.2, 0.6, 30.0, 25.0, 20.0, 10.0, 0.1]),
            (Form::Limit, vec![0.3, -0.2, 50.0, 4.0, 40.0, -3.0, 0.1]),
        ] {
            let pr = problem(kind);
            let n = pr.freq.len();
            let mut r = DVector::zeros(n);
            let mut j = DMatrix::zeros(n, p.len());
            pr.evaluate(&p, &mut r, Some(&mut j));
            for k in 0..p.len() {
                let h = 1e-6 * p[k].abs().max(1e-3);
                let (mut a, mut b) = (p.clone(), p.clone());
                a[k] += h;
                b[k] -= h;
                let (mut ra, mut rb) = (DVector::zeros(n), DVector::zeros(n));
                pr.evaluate(&a, &mut ra, None);
                pr.evaluate(&b, &mut rb, None);
                for i in 0..n {
                    let fd = (ra[i] - rb[i]) / (2.0 * h);
                    assert!((fd - j[(i, k)]).abs() <= 1e-6 * (1.0 + fd.abs()), "{kind:?} param {k} bin {i}: {fd} vs {}", j[(i, k)]);
                }
            }
        }
    }

    #[test]
    fn limit_is_small_s_double() {
        let pr = problem(Form::Limit);
        let dbl = PairProblem { form: Form::Double, ..pr.clone() };
        let (t_s, e_s, t_a, e_a) = (50.0, 4.0, 40.0, -3.0);
        let s = 1e-4;
        let u = u_of_s(s);
        let pd = [0.3, -0.2, u, (t_s - e_s / s) / 2.0, (t_s + e_s / s) / 2.0, (t_a - e_a / s) / 2.0, (t_a + e_a / s) / 2.0, 0.1];
        let pl = [0.3, -0.2, t_s, e_s, t_a, e_a, 0.1];
        for &f in &pr.freq {
            let (a, b) = (pr.model_at(&pl, f, None), dbl.model_at(&pd, f, None));
            assert!((a - b).abs() < 1e-6 * a.abs(), "{f}: {a} {b}");
        }
    }

    #[test]
    fn squeezing_parameterization() {
        assert_eq!(s_of_u(0.0), 0.0);
        assert!((s_of_u(std::f64::consts::FRAC_PI_2) - S_MAX).abs() < 1e-15);
        assert!((s_of_u(u_of_s(0.53)) - 0.53).abs() < 1e-14);
    }
}
