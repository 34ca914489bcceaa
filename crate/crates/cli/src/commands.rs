//! The subcommands. Each one writes its artifacts through [`Context`] and
//! returns `Some(error)` when outputs were written but the run still has to
//! exit non-zero.

use omsqueeze::config::{Config, Observable, Sweep};
use omsqueeze::fit::study::fit_pair;
use omsqueeze::fit::{apply_mask, bias_study, fit_double_pair, fit_single_pair, lorentz_hz, FitOptions, FitResult, StudyConfig};
use omsqueeze::lineshape::{heterodyne_composite, quadrature_variances, sideband_ratios, squeezing_criterion, SidebandShape};
use omsqueeze::rates::derive_all;
use omsqueeze::synth::{child_seed, make_onoff_pair, OnOffPair};
use omsqueeze::{hz_to_rad, rad_to_hz, Rates, SpectrumData};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::context::{null_if_nan, Context, Format};
use crate::error::{CliError, CliResult};
use crate::sweep::{axis_column, run_sweep, sweep_table};
use crate::table::{PlotSpec, Table};

pub type Outcome = CliResult<Option<CliError>>;

fn plot(x: &str, ys: &[&str]) -> Option<PlotSpec> {
    Some(PlotSpec {
        x: x.into(),
        ys: ys.iter().map(|s| s.to_string()).collect(),
        log_y: false,
    })
}

fn fit_options(cfg: &Config) -> FitOptions {
    FitOptions {
        ratio_correction: cfg.run.ratio_correction,
        ..FitOptions::default()
    }
}

fn config_masks(cfg: &Config) -> Vec<(f64, f64)> {
    cfg.run.mask_hz.iter().map(|m| (m[0], m[1])).collect()
}

/// Drive-on and drive-off rate sets: from `[truth]` when present or when no
/// physical parameters are given, else derived.
fn on_off_rates(cfg: &Config) -> CliResult<(Rates, Rates, &'static str)> {
    if cfg.truth.is_some() || !cfg.has_physics() {
        let (on, off) = cfg.truth().rates()?;
        return Ok((on, off, "truth"));
    }
    let params = cfg.system_params()?;
    let on = derive_all(&params, &cfg.pump()?)?;
    let off = match cfg.pump_off()? {
        Some(p) => derive_all(&params, &p)?,
        None => on,
    };
    Ok((on, off.without_parametric().with_omega_m(on.omega_m), "physics"))
}

fn make_pair(cfg: &Config, seed: u64) -> CliResult<OnOffPair> {
    let pair = if cfg.truth.is_some() || !cfg.has_physics() {
        cfg.truth().pair(&cfg.detection, seed)?
    } else {
        let params = cfg.system_params()?;
        make_onoff_pair(&params, &cfg.pump()?, cfg.pump_off()?.as_ref(), &cfg.detection, seed)?
    };
    let masks = config_masks(cfg);
    Ok(OnOffPair {
        drive_on: apply_mask(&pair.drive_on, &masks),
        drive_off: apply_mask(&pair.drive_off, &masks),
        ..pair
    })
}

fn rates_json(r: &Rates) -> Value {
    let ratios = sideband_ratios(r.n_bar, r.s.abs());
    let (var_x, var_y, zero_point) = quadrature_variances(r.n_bar, r.s.abs());
    let c = squeezing_criterion(r.n_bar, r.s.abs());
    json!({
        "stable": true,
        "omega_m_hz": rad_to_hz(r.omega_m),
        "gamma_m_hz": rad_to_hz(r.gamma_m),
        "n_th": r.n_th,
        "g_hz": rad_to_hz(r.g),
        "epsilon_c": r.epsilon_c,
        "gamma_opt_hz": rad_to_hz(r.gamma_opt),
        "gamma_eff_hz": rad_to_hz(r.gamma_eff),
        "gamma_par_hz": rad_to_hz(r.gamma_par),
        "phi_rad": r.phi,
        "s": r.s,
        "s_folded": r.s_folded(),
        "gamma_plus_hz": rad_to_hz(r.gamma_plus),
        "gamma_minus_hz": rad_to_hz(r.gamma_minus),
        "a_minus_hz": rad_to_hz(r.a_minus),
        "a_plus_hz": rad_to_hz(r.a_plus),
        "n_ba": r.n_ba.map_or(Value::Null, null_if_nan),
        "n_bar": r.n_bar,
        "anomalous": [r.anomalous.re, r.anomalous.im],
        "frequency_iterations": r.iterations,
        "ratios": { "r0": ratios.r0, "r_plus": ratios.r_plus, "r_minus": ratios.r_minus },
        "variances": { "x": var_x, "y": var_y, "zero_point": zero_point },
        "criterion": { "below_zero_point": c.below_zero_point, "margin": c.margin },
    })
}

pub fn rates(ctx: &mut Context) -> Outcome {
    let params = ctx.config.system_params()?;
    let pump = ctx.config.pump()?;
    let r = match derive_all(&params, &pump) {
        Ok(r) => r,
        Err(e) if e.is_instability() => {
            println!("unstable: {e}");
            ctx.write_json("rates.json", &json!({ "stable": false, "error": e.to_string() }))?;
            return Ok(Some(CliError::Instability(e.to_string())));
        }
        Err(e) => return Err(e.into()),
    };
    let report = rates_json(&r);
    let mut t = Table::new(&["quantity", "value"]);
    for (k, v) in report.as_object().into_iter().flatten() {
        if let Some(x) = v.as_f64() {
            t.push(vec![k.as_str().into(), x.into()]);
            println!("{k:<22} {x:.9e}");
        }
    }
    ctx.write_json("rates.json", &report)?;
    ctx.emit_table("rates_table", &t, None)?;
    Ok(None)
}

pub fn spectrum(ctx: &mut Context) -> Outcome {
    let cfg = ctx.config.clone();
    let det = &cfg.detection;
    let (on, off, source) = on_off_rates(&cfg)?;
    let shape = SidebandShape::from_rates(&on, on.n_bar)?;
    let off_shape = SidebandShape::from_rates(&off, off.n_bar)?;
    let floor = det.floor_for(&off_shape);
    let gamma_hz = rad_to_hz(on.gamma_eff);
    let center_hz = rad_to_hz(on.omega_m);

    let grid_hz = det.grid_hz(center_hz, gamma_hz);
    let grid: Vec<f64> = grid_hz.iter().map(|&f| hz_to_rad(f)).collect();
    let (_, psd) = heterodyne_composite(&on, on.n_bar, hz_to_rad(det.delta_lo_hz), det.calibration, floor, &grid)?;
    let mut model = Table::new(&["frequency_hz", "psd"]);
    for (f, p) in grid_hz.iter().zip(&psd) {
        model.push(vec![(*f).into(), (*p).into()]);
    }

    let columns = ["offset_hz", "stokes", "antistokes", "stokes_narrow", "stokes_broad", "antistokes_narrow", "antistokes_broad"];
    let mut sidebands = Table::new(&columns);
    let half = (det.span_linewidths * 40.0).round() as i64;
    let mut min_antistokes = f64::INFINITY;
    for k in -half..=half {
        let f = k as f64 * gamma_hz / 40.0;
        let d = hz_to_rad(f);
        let [sn, sb] = shape.stokes_components();
        let [an, ab] = shape.antistokes_components();
        let anti = shape.antistokes_at(d);
        min_antistokes = min_antistokes.min(anti);
        sidebands.push(vec![
            f.into(),
            shape.stokes_at(d).into(),
            anti.into(),
            sn.eval(d).into(),
            sb.eval(d).into(),
            an.eval(d).into(),
            ab.eval(d).into(),
        ]);
    }

    let areas = shape.areas();
    let ratios = areas.ratios();
    let (var_x, var_y, zero_point) = quadrature_variances(shape.n_bar, shape.s.abs());
    let c = squeezing_criterion(shape.n_bar, shape.s.abs());
    let report = json!({
        "source": source,
        "center_hz": center_hz,
        "gamma_eff_hz": gamma_hz,
        "s": on.s,
        "n_bar": on.n_bar,
        "delta_lo_hz": det.delta_lo_hz,
        "floor": floor,
        "calibration": det.calibration,
        "weights": {
            "stokes": <[f64; 2]>::from(shape.stokes_weights()),
            "antistokes": <[f64; 2]>::from(shape.antistokes_weights()),
        },
        "areas": {
            "stokes_narrow": areas.stokes_narrow,
            "stokes_broad": areas.stokes_broad,
            "antistokes_narrow": areas.antistokes_narrow,
            "antistokes_broad": areas.antistokes_broad,
            "stokes": areas.stokes(),
            "antistokes": areas.antistokes(),
            "difference": areas.stokes() - areas.antistokes(),
        },
        "ratios": { "r0": ratios.r0, "r_plus": ratios.r_plus, "r_minus": ratios.r_minus },
        "variances": { "x": var_x, "y": var_y, "zero_point": zero_point },
        "criterion": { "below_zero_point": c.below_zero_point, "margin": c.margin },
        "min_antistokes": min_antistokes,
        "min_psd": psd.iter().cloned().fold(f64::INFINITY, f64::min),
        "n_bins": psd.len(),
    });
    println!(
        "{source}: gamma_eff {gamma_hz:.6e} Hz, s {:.6}, n_bar {:.6}, R0 {:.6}, R+ {:.6}, R- {:.6}",
        on.s, on.n_bar, ratios.r0, ratios.r_plus, ratios.r_minus
    );
    ctx.write_json("spectrum.json", &report)?;
    ctx.emit_table("spectrum_model", &model, plot("frequency_hz", &["psd"]))?;
    ctx.emit_table("sidebands", &sidebands, plot("offset_hz", &columns[1..]))?;
    Ok(None)
}

fn emit_spectrum(ctx: &mut Context, stem: &str, s: &SpectrumData) -> CliResult<()> {
    match ctx.format {
        Format::Json => ctx.write_json(&format!("{stem}.json"), s),
        fmt => {
            let mut buf = Vec::new();
            s.write_csv(&mut buf)?;
            let csv = String::from_utf8(buf).map_err(|e| CliError::Other(e.to_string()))?;
            ctx.write(&format!("{stem}.csv"), &csv)?;
            if fmt == Format::Svg {
                let spec = PlotSpec {
                    x: "freq_hz".into(),
                    ys: vec!["psd".into()],
                    log_y: ctx.log_y,
                };
                let svg = crate::table::svg_from_csv(&csv, &spec).map_err(CliError::Other)?;
                ctx.write(&format!("{stem}.svg"), &svg)?;
            }
            Ok(())
        }
    }
}

pub fn synth(ctx: &mut Context) -> Outcome {
    let cfg = ctx.config.clone();
    let pair = make_pair(&cfg, ctx.seed)?;
    emit_spectrum(ctx, "drive_on", &pair.drive_on)?;
    emit_spectrum(ctx, "drive_off", &pair.drive_off)?;
    let report = json!({
        "seed": ctx.seed,
        "n_bins": pair.drive_on.len(),
        "n_avg": pair.drive_on.n_avg,
        "resolution_hz": pair.drive_on.resolution_hz,
        "gamma_eff_off_hz": rad_to_hz(pair.gamma_eff_off),
        "drive_on": pair.drive_on.meta,
        "drive_off": pair.drive_off.meta,
    });
    ctx.write_json("synth.json", &report)?;
    println!("{} bins, n_avg {}, seed {}", pair.drive_on.len(), pair.drive_on.n_avg, ctx.seed);
    Ok(None)
}

fn component_names(fit: &FitResult) -> Vec<String> {
    let sides = ["stokes", "antistokes"];
    if fit.s.is_some() {
        sides.iter().flat_map(|s| [format!("{s}_narrow"), format!("{s}_broad")]).collect()
    } else {
        sides.iter().map(|s| s.to_string()).collect()
    }
}

/// Data, fitted model and each fitted component on the data grid.
fn overlay(spec: &SpectrumData, fit: &FitResult) -> (Table, Vec<String>) {
    let names = component_names(fit);
    let mut cols = vec!["frequency_hz".to_string(), "psd".into(), "masked".into(), "model".into()];
    cols.extend(names.iter().cloned());
    let refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut t = Table::new(&refs);
    let comps = fit.components();
    for i in 0..spec.len() {
        let f = spec.freq_hz[i];
        let mut row = vec![f.into(), spec.psd[i].into(), spec.mask[i].into(), fit.model_at(f).into()];
        row.extend(comps.iter().map(|&(c, w, a)| lorentz_hz(f - c, w, a).into()));
        t.push(row);
    }
    let mut ys = vec!["psd".to_string(), "model".into()];
    ys.extend(names);
    (t, ys)
}

fn emit_overlay(ctx: &mut Context, stem: &str, spec: &SpectrumData, fit: &FitResult) -> CliResult<()> {
    let (t, ys) = overlay(spec, fit);
    let ys: Vec<&str> = ys.iter().map(String::as_str).collect();
    ctx.emit_table(stem, &t, plot("frequency_hz", &ys))
}

fn load_spectrum(path: &std::path::Path) -> CliResult<SpectrumData> {
    SpectrumData::load_csv(path).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))
}

pub fn fit(ctx: &mut Context, off: &std::path::Path, on: Option<&std::path::Path>, masks: &[(f64, f64)]) -> Outcome {
    let mut ranges = config_masks(&ctx.config);
    ranges.extend_from_slice(masks);
    let opts = fit_options(&ctx.config);
    let off_data = apply_mask(&load_spectrum(off)?, &ranges);
    let off_fit = fit_single_pair(&off_data, None, &opts)?;
    let on_fit = match on {
        Some(path) => {
            let on_data = apply_mask(&load_spectrum(path)?, &ranges);
            let f = fit_double_pair(&on_data, off_fit.gamma_eff_hz.value, Some(&off_fit.hint()), &opts)?;
            Some((on_data, f))
        }
        None => None,
    };
    emit_overlay(ctx, "fit_off", &off_data, &off_fit)?;
    if let Some((data, f)) = &on_fit {
        emit_overlay(ctx, "fit_on", data, f)?;
    }
    let on_result = on_fit.as_ref().map(|(_, f)| f);
    ctx.write_json("fit.json", &json!({ "off": off_fit, "on": on_result }))?;
    println!(
        "off: gamma_eff {:.6e} Hz, n_bar {:.4} +- {:.4}, R0 {:.5}",
        off_fit.gamma_eff_hz.value, off_fit.n_bar.value, off_fit.n_bar.sigma, off_fit.r0.value
    );
    if let Some(f) = on_result {
        if let (Some(s), Some(rp), Some(rm)) = (f.s, f.r_plus, f.r_minus) {
            println!("on:  s {:.5} +- {:.5}, R+ {:.5}, R- {:.5}", s.value, s.sigma, rp.value, rm.value);
        }
    }
    let unconverged: Vec<&str> = [("off", Some(&off_fit)), ("on", on_result)]
        .iter()
        .filter(|(_, f)| f.is_some_and(|f| !f.converged))
        .map(|(n, _)| *n)
        .collect();
    if unconverged.is_empty() {
        Ok(None)
    } else {
        Ok(Some(CliError::FitFailure(format!("fit did not converge: {}", unconverged.join(", ")))))
    }
}

pub fn sweep(ctx: &mut Context, sweep: &Sweep) -> Outcome {
    let rows = run_sweep(&ctx.config, sweep)?;
    let t = sweep_table(sweep.axis, &sweep.outputs, &rows);
    let x = axis_column(sweep.axis);
    let ys: Vec<&str> = ["r0", "r_plus", "r_minus"]
        .into_iter()
        .filter(|c| t.columns.iter().any(|k| k == c))
        .collect();
    let ys = if ys.is_empty() { vec![if sweep.outputs.contains(&Observable::S) { "s" } else { "n_bar" }] } else { ys };
    ctx.emit_table("sweep_curves", &t, plot(x, &ys))?;
    let unstable = rows.iter().filter(|r| !r.stable).count();
    ctx.write_json(
        "sweep.json",
        &json!({ "sweep": sweep, "points": rows.len(), "unstable": unstable, "rows": t.to_json()["rows"] }),
    )?;
    println!("{} points, {} unstable", rows.len(), unstable);
    Ok(None)
}

#[derive(Default)]
struct Stats {
    values: Vec<f64>,
}

impl Stats {
    fn push(&mut self, v: f64) {
        if v.is_finite() {
            self.values.push(v);
        }
    }

    fn summary(&self, truth: Option<f64>) -> Value {
        let n = self.values.len() as f64;
        if self.values.is_empty() {
            return json!({ "n": 0 });
        }
        let mean = self.values.iter().sum::<f64>() / n;
        let std = if n > 1.0 {
            (self.values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            f64::NAN
        };
        let mut v = json!({ "n": self.values.len(), "mean": mean, "std": null_if_nan(std) });
        if let Some(t) = truth {
            let bias = mean - t;
            v["truth"] = json!(t);
            v["bias"] = json!(bias);
            v["bias_over_std"] = null_if_nan(bias / std);
            v["bias_over_stderr"] = null_if_nan(bias / (std / n.sqrt()));
        }
        v
    }
}

/// Fraction of failed repeats above which `experiment` exits with code 4.
pub const MAX_FAILED_REPEATS: f64 = 0.05;

pub fn experiment(ctx: &mut Context, repeats: usize) -> Outcome {
    let cfg = ctx.config.clone();
    let (on, _, source) = on_off_rates(&cfg)?;
    let opts = fit_options(&cfg);
    let root = ctx.seed;
    let results: Vec<(u64, CliResult<(OnOffPair, FitResult, FitResult)>)> = (0..repeats)
        .into_par_iter()
        .map(|i| {
            let seed = child_seed(root, i as u64);
            let r = make_pair(&cfg, seed).and_then(|pair| {
                let (off, on) = fit_pair(&pair, &opts)?;
                Ok((pair, off, on))
            });
            (seed, r)
        })
        .collect();

    let cols = [
        "repeat", "seed", "converged", "s", "s_sigma", "s_at_bound", "r0", "r_plus", "r_minus", "n_bar", "gamma_eff_hz",
        "antistokes_broad", "error",
    ];
    let mut t = Table::new(&cols);
    let [mut s, mut s_sigma, mut r0, mut rp, mut rm, mut nb, mut g]: [Stats; 7] = Default::default();
    let mut failures = Vec::new();
    let mut negative_broad = 0usize;
    let mut used = 0usize;
    for (i, (seed, r)) in results.iter().enumerate() {
        match r {
            Ok((_, off, onf)) => {
                let converged = off.converged && onf.converged;
                let est = |e: Option<omsqueeze::fit::Estimate>| e.map_or(f64::NAN, |e| e.value);
                let broad = onf.antistokes_areas.get(1).map_or(f64::NAN, |a| a.value);
                t.push(vec![
                    i.into(),
                    (*seed).into(),
                    converged.into(),
                    est(onf.s).into(),
                    onf.s.map_or(f64::NAN, |e| e.sigma).into(),
                    onf.s_at_bound.into(),
                    off.r0.value.into(),
                    est(onf.r_plus).into(),
                    est(onf.r_minus).into(),
                    off.n_bar.value.into(),
                    off.gamma_eff_hz.value.into(),
                    broad.into(),
                    "".into(),
                ]);
                if !converged {
                    failures.push(json!({ "repeat": i, "seed": seed, "error": "fit did not converge" }));
                    continue;
                }
                used += 1;
                s.push(est(onf.s));
                s_sigma.push(onf.s.map_or(f64::NAN, |e| e.sigma));
                r0.push(off.r0.value);
                rp.push(est(onf.r_plus));
                rm.push(est(onf.r_minus));
                nb.push(off.n_bar.value);
                g.push(off.gamma_eff_hz.value);
                if broad < 0.0 {
                    negative_broad += 1;
                }
            }
            Err(e) => {
                let nan = || f64::NAN.into();
                let mut row = vec![i.into(), (*seed).into(), false.into(), nan(), nan(), false.into()];
                row.extend((0..6).map(|_| nan()));
                row.push(e.to_string().into());
                t.push(row);
                failures.push(json!({ "repeat": i, "seed": seed, "error": e.to_string() }));
            }
        }
    }

    let truth_s = on.s.abs();
    let truth_ratios = sideband_ratios(on.n_bar, truth_s);
    let failed_fraction = failures.len() as f64 / repeats.max(1) as f64;
    let report = json!({
        "source": source,
        "repeats": repeats,
        "seed": root,
        "used": used,
        "failed": failures.len(),
        "failed_fraction": failed_fraction,
        "failures": failures,
        "truth": {
            "gamma_eff_hz": rad_to_hz(on.gamma_eff),
            "n_bar": on.n_bar,
            "s": truth_s,
            "r0": truth_ratios.r0,
            "r_plus": truth_ratios.r_plus,
            "r_minus": truth_ratios.r_minus,
        },
        "recovered": {
            "s": s.summary(Some(truth_s)),
            "s_fit_sigma": s_sigma.summary(None),
            "r0": r0.summary(Some(truth_ratios.r0)),
            "r_plus": rp.summary(Some(truth_ratios.r_plus)),
            "r_minus": rm.summary(Some(truth_ratios.r_minus)),
            "n_bar": nb.summary(Some(on.n_bar)),
            "gamma_eff_hz": g.summary(Some(rad_to_hz(on.gamma_eff))),
        },
        "negative_broad_antistokes_fraction": if used > 0 { json!(negative_broad as f64 / used as f64) } else { Value::Null },
    });
    ctx.write_json("experiment.json", &report)?;
    ctx.emit_table("experiment_repeats", &t, plot("repeat", &["s"]))?;
    if let Some((_, Ok((pair, off, onf)))) = results.first() {
        emit_overlay(ctx, "overlay_off", &pair.drive_off, off)?;
        emit_overlay(ctx, "overlay_on", &pair.drive_on, onf)?;
    }
    println!(
        "{used}/{repeats} repeats used; s = {} (truth {truth_s:.4})",
        report["recovered"]["s"]["mean"]
    );
    if failed_fraction > MAX_FAILED_REPEATS {
        return Ok(Some(CliError::FitFailure(format!(
            "{} of {repeats} repeats failed (limit {:.0}%)",
            failures.len(),
            100.0 * MAX_FAILED_REPEATS
        ))));
    }
    Ok(None)
}

pub fn bias(ctx: &mut Context, trials: Option<usize>) -> Outcome {
    let cfg = ctx.config.clone();
    let study = StudyConfig {
        truth: cfg.truth(),
        detection: cfg.detection.clone(),
        trials: trials.unwrap_or(cfg.run.trials),
        seed: ctx.seed,
    };
    let report = bias_study(&study, &fit_options(&cfg))?;
    let mut t = Table::new(&["s_lo", "s_hi", "count"]);
    for b in &report.histogram {
        t.push(vec![b.lo.into(), b.hi.into(), b.count.into()]);
    }
    ctx.write_json("bias.json", &report)?;
    ctx.emit_table("bias_histogram", &t, plot("s_lo", &["count"]))?;
    println!(
        "{} trials ({} used): mean s {:.5}, std {:.5}, skewness {:.3}, at zero {:.3}",
        report.trials, report.used, report.mean_s, report.std_s, report.skewness_s, report.fraction_at_zero
    );
    if report.invalid {
        return Ok(Some(CliError::FitFailure(format!(
            "{} of {} trials failed",
            report.failed, report.trials
        ))));
    }
    Ok(None)
}
