//! Parameter sweeps of the derived observables.
//!
//! * `parametric_gain_s`: s varies, Γ_eff and n̄ from `[truth]`.
//! * `gamma_eff`: Γ_eff varies at fixed Γ_par = s₀Γ₀, so s = s₀Γ₀/Γ_eff, and
//!   n̄ = n̄₀Γ₀/Γ_eff; an `s_override` table replaces s(Γ_eff).
//! * `detuning_delta`: Δ varies at fixed input tones; every point is a full
//!   derivation from the physical parameters.
//!
//! Points that are unstable, or fail to derive, are kept with `stable = false`.

use omsqueeze::config::{Config, Observable, Sweep, SweepAxis};
use omsqueeze::lineshape::{quadrature_variances, sideband_ratios, squeezing_criterion};
use omsqueeze::rates::derive_all;
use omsqueeze::{hz_to_rad, rad_to_hz, Error, Result};
use rayon::prelude::*;
use serde::Serialize;

use crate::table::{Cell, Table};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub x: f64,
    pub stable: bool,
    /// Signed s as derived; `s` is its magnitude.
    pub s_signed: f64,
    pub s: f64,
    pub gamma_eff_hz: f64,
    pub n_bar: f64,
    pub r0: f64,
    pub r_plus: f64,
    pub r_minus: f64,
    pub var_x: f64,
    pub var_y: f64,
    pub below_zero_point: bool,
    pub margin: f64,
    pub note: String,
}

impl SweepRow {
    fn stable(x: f64, s_signed: f64, gamma_eff_hz: f64, n_bar: f64) -> Self {
        let s = s_signed.abs();
        let r = sideband_ratios(n_bar, s);
        let (var_x, var_y, _) = quadrature_variances(n_bar, s);
        let c = squeezing_criterion(n_bar, s);
        Self {
            x,
            stable: true,
            s_signed,
            s,
            gamma_eff_hz,
            n_bar,
            r0: r.r0,
            r_plus: r.r_plus,
            r_minus: r.r_minus,
            var_x,
            var_y,
            below_zero_point: c.below_zero_point,
            margin: c.margin,
            note: String::new(),
        }
    }

    fn unstable(x: f64, note: String) -> Self {
        let nan = f64::NAN;
        Self {
            x,
            stable: false,
            s_signed: nan,
            s: nan,
            gamma_eff_hz: nan,
            n_bar: nan,
            r0: nan,
            r_plus: nan,
            r_minus: nan,
            var_x: nan,
            var_y: nan,
            below_zero_point: false,
            margin: nan,
            note,
        }
    }
}

/// Evenly spaced points from `start` to `stop`; a single point is `start`.
/// Values within rounding of zero are set to exactly zero.
pub fn axis_points(start: f64, stop: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![start];
    }
    let scale = start.abs().max(stop.abs());
    (0..n)
        .map(|i| {
            let x = start + (stop - start) * i as f64 / (n - 1) as f64;
            if x.abs() <= 1e-12 * scale { 0.0 } else { x }
        })
        .collect()
}

fn interpolate(table: &[[f64; 2]], x: f64) -> f64 {
    match table.iter().position(|p| p[0] >= x) {
        None => table[table.len() - 1][1],
        Some(0) => table[0][1],
        Some(k) => {
            let (a, b) = (table[k - 1], table[k]);
            a[1] + (b[1] - a[1]) * (x - a[0]) / (b[0] - a[0])
        }
    }
}

pub fn axis_column(axis: SweepAxis) -> &'static str {
    match axis {
        SweepAxis::ParametricGainS => "s_axis",
        SweepAxis::GammaEff => "gamma_eff_hz_axis",
        SweepAxis::DetuningDelta => "delta_hz",
    }
}

pub fn run_sweep(cfg: &Config, sweep: &Sweep) -> Result<Vec<SweepRow>> {
    let xs = axis_points(sweep.start, sweep.stop, sweep.n_points);
    let truth = cfg.truth();
    let rows = match sweep.axis {
        SweepAxis::ParametricGainS => xs
            .iter()
            .map(|&s| {
                if s.abs() < 1.0 {
                    SweepRow::stable(s, s, truth.gamma_eff_hz, truth.n_bar)
                } else {
                    SweepRow::unstable(s, Error::ParametricInstability { s }.to_string())
                }
            })
            .collect(),
        SweepAxis::GammaEff => xs
            .iter()
            .map(|&g| {
                if !(g > 0.0) {
                    return SweepRow::unstable(g, Error::AntiDamping { gamma_eff: hz_to_rad(g) }.to_string());
                }
                let s = if sweep.s_override.is_empty() {
                    truth.s * truth.gamma_eff_hz / g
                } else {
                    interpolate(&sweep.s_override, g)
                };
                if !(s.abs() < 1.0) {
                    return SweepRow::unstable(g, Error::ParametricInstability { s }.to_string());
                }
                SweepRow::stable(g, s, g, truth.n_bar * truth.gamma_eff_hz / g)
            })
            .collect(),
        SweepAxis::DetuningDelta => {
            let params = cfg.system_params()?;
            let pump = cfg.pump()?;
            xs.par_iter()
                .map(|&d| match derive_all(&params.with_delta(hz_to_rad(d)), &pump) {
                    Ok(r) => SweepRow::stable(d, r.s, rad_to_hz(r.gamma_eff), r.n_bar),
                    Err(e) => SweepRow::unstable(d, e.to_string()),
                })
                .collect()
        }
    };
    Ok(rows)
}

pub fn sweep_table(axis: SweepAxis, outputs: &[Observable], rows: &[SweepRow]) -> Table {
    let mut columns = vec![axis_column(axis), "stable", "gamma_eff_hz", "n_bar"];
    for o in Observable::ALL.iter().filter(|o| outputs.contains(o)) {
        columns.extend_from_slice(match o {
            Observable::S => &["s", "s_signed"][..],
            Observable::R0 => &["r0"],
            Observable::RPlus => &["r_plus"],
            Observable::RMinus => &["r_minus"],
            Observable::Variances => &["var_x", "var_y"],
            Observable::Criterion => &["below_zero_point", "margin"],
        });
    }
    columns.push("note");
    let mut t = Table::new(&columns);
    for r in rows {
        let row = columns
            .iter()
            .map(|c| -> Cell {
                match *c {
                    "stable" => r.stable.into(),
                    "gamma_eff_hz" => r.gamma_eff_hz.into(),
                    "n_bar" => r.n_bar.into(),
                    "s" => r.s.into(),
                    "s_signed" => r.s_signed.into(),
                    "r0" => r.r0.into(),
                    "r_plus" => r.r_plus.into(),
                    "r_minus" => r.r_minus.into(),
                    "var_x" => r.var_x.into(),
                    "var_y" => r.var_y.into(),
                    "below_zero_point" => r.below_zero_point.into(),
                    "margin" => r.margin.into(),
                    "note" => r.note.clone().into(),
                    _ => r.x.into(),
                }
            })
            .collect();
        t.push(row);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_hits_zero_exactly() {
        let xs = axis_points(-300e3, 300e3, 61);
        assert!(xs.contains(&0.0));
        assert!(xs.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(axis_points(2.0, 5.0, 1), vec![2.0]);
    }

    #[test]
    fn override_table_interpolates() {
        let t = [[100.0, 0.2], [200.0, 0.4]];
        assert_eq!(interpolate(&t, 50.0), 0.2);
        assert!((interpolate(&t, 150.0) - 0.3).abs() < 1e-15);
        assert_eq!(interpolate(&t, 300.0), 0.4);
    }

    #[test]
    fn s_sweep_flags_threshold() {
        let cfg = Config::default();
        let sweep = Sweep {
            axis: SweepAxis::ParametricGainS,
            start: 0.0,
            stop: 1.2,
            n_points: 7,
            outputs: Observable::ALL.to_vec(),
            s_override: Vec::new(),
        };
        let rows = run_sweep(&cfg, &sweep).unwrap();
        assert_eq!(rows.len(), 7);
        assert!(rows[0].stable && (rows[0].r_plus - rows[0].r0).abs() < 1e-15);
        assert!(!rows[5].stable && !rows[6].stable);
    }
}
