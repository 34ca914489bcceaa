//! Levenberg–Marquardt for small dense weighted least-squares problems.

use nalgebra::{DMatrix, DVector};

pub trait LeastSquares {
    fn n_params(&self) -> usize;
    fn n_residuals(&self) -> usize;
    /// Fills the weighted residuals and, if requested, the Jacobian.
    fn evaluate(&self, p: &[f64], r: &mut DVector<f64>, jac: Option<&mut DMatrix<f64>>);
    /// Σ (weighted data)², the reference for an exact fit.
    fn data_norm_sq(&self) -> f64;
}

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop when max_j |∂C/∂p_j|·scale_j falls below this fraction of its
    /// value at the starting point.
    pub gradient_tolerance: f64,
    /// Stop when C ≤ tol·Σ(weighted data)².
    pub exact_tolerance: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            gradient_tolerance: 1e-10,
            exact_tolerance: 1e-24,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    /// Σr² at `params`.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    /// max_j |g_j|·scale_j at `params` relative to the reference.
    pub gradient: f64,
    /// max_j |g_j|·scale_j at the starting point.
    pub initial_gradient: f64,
    /// JᵀJ at `params`.
    pub normal: DMatrix<f64>,
}

const LAMBDA_MAX: f64 = 1e16;
/// Cost changes below this multiple of ε·C are rounding noise.
pub const COST_ROUNDING: f64 = 64.0 * f64::EPSILON;

/// Minimizes Σr² from `p0`. The gradient test is relative to `reference`
/// when given (a restart of an earlier minimization), else to the gradient
/// at `p0`.
///
/// Steps must lower the cost, except once the predicted reduction itself is
/// below the rounding level of C: a step is then taken if it raises the
/// computed cost by no more than that level.
pub fn minimize(problem: &impl LeastSquares, p0: &[f64], scale: &[f64], opts: &LmOptions, reference: Option<f64>) -> LmOutcome {
    let np = problem.n_params();
    let nr = problem.n_residuals();
    let mut p = DVector::from_column_slice(p0);
    let mut r = DVector::zeros(nr);
    let mut jac = DMatrix::zeros(nr, np);
    let mut trial_r = DVector::zeros(nr);
    problem.evaluate(p.as_slice(), &mut r, Some(&mut jac));
    let mut cost = r.norm_squared();
    let mut a = jac.tr_mul(&jac);
    let mut g = jac.tr_mul(&r);
    let data = problem.data_norm_sq();
    let mut lambda = 1e-3;
    let mut iterations = 0;

    let scaled = |g: &DVector<f64>| g.iter().zip(scale).map(|(gi, s)| (gi * s).abs()).fold(0.0, f64::max);
    let initial_gradient = scaled(&g);
    let reference = reference.unwrap_or(initial_gradient);
    let grad_ratio = |g: &DVector<f64>| {
        let m = scaled(g);
        if reference > 0.0 { m / reference } else if m == 0.0 { 0.0 } else { f64::INFINITY }
    };
    let done = |g: &DVector<f64>, cost: f64| cost <= opts.exact_tolerance * data || grad_ratio(g) <= opts.gradient_tolerance;

    let mut converged = done(&g, cost);
    while !converged && iterations < opts.max_iterations {
        iterations += 1;
        let max_diag = a.diagonal().max().max(f64::MIN_POSITIVE);
        let diag: Vec<f64> = a.diagonal().iter().map(|d| d.max(1e-12 * max_diag)).collect();
        let mut improved = false;
        while lambda < LAMBDA_MAX {
            let mut m = a.clone();
            for (j, d) in diag.iter().enumerate() {
                m[(j, j)] += lambda * d;
            }
            let Some(chol) = m.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step = chol.solve(&(-&g));
            let trial = &p + &step;
            problem.evaluate(trial.as_slice(), &mut trial_r, None);
            let trial_cost = trial_r.norm_squared();
            let predicted = -(g.dot(&step) + 0.5 * step.dot(&(&a * &step)));
            let noise = COST_ROUNDING * cost;
            if trial_cost < cost || (predicted <= noise && trial_cost <= cost + noise) {
                p = trial;
                lambda = (lambda / 3.0).max(1e-15);
                improved = true;
                break;
            }
            lambda *= 2.0;
        }
        if !improved {
            break;
        }
        problem.evaluate(p.as_slice(), &mut r, Some(&mut jac));
        cost = r.norm_squared();
        a = jac.tr_mul(&jac);
        g = jac.tr_mul(&r);
        converged = done(&g, cost);
    }
    LmOutcome {
        params: p.as_slice().to_vec(),
        cost,
        iterations,
        converged,
        gradient: grad_ratio(&g),
        initial_gradient,
        normal: a,
    }
}
