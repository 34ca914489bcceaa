use std::f64::consts::{FRAC_PI_2, TAU};

use num_complex::Complex64;
use omsqueeze::lineshape::{self, SidebandShape};
use omsqueeze::oracle::{propagate_spectra, NoiseCorrelators, TransferMatrix};
use omsqueeze::params::{IntracavityField, SystemParams};
use omsqueeze::rates::{derive_from_field, DerivedRates};
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

prop_compose! {
    fn physical_rates()(
        kappa_mhz in 0.3f64..5.0,
        omega_khz in 100.0f64..2000.0,
        delta_frac in -0.6f64..0.6,
        q in 1e4f64..1e7,
        n_th in 0.0f64..1e6,
        g_hz in 10.0f64..3e4,
        eps in 0.5f64..1.0,
        phase_m in 0.0f64..TAU,
        phase_p in 0.0f64..TAU,
        n_extra in 0.0f64..2.0,
    ) -> Option<(DerivedRates<f64>, f64)> {
        let omega = TAU * omega_khz * 1e3;
        let params = SystemParams::new(TAU * kappa_mhz * 1e6, TAU * 50.0, omega, omega / q, delta_frac * omega, n_th)
            .ok()?
            .with_n_extra(n_extra)
            .ok()?;
        let total = (TAU * g_hz / params.g0).powi(2);
        let field = IntracavityField::from_amplitudes(
            params.g0,
            Complex64::from_polar((total * eps).sqrt(), phase_m),
            Complex64::from_polar((total * (1.0 - eps)).sqrt(), phase_p),
        )
        .ok()?;
        let rates = derive_from_field(&params, &field, omega).ok()?;
        let n_bar = rates.n_bar;
        Some((rates, n_bar))
    }
}

fn grid_for(r: &DerivedRates<f64>) -> Vec<f64> {
    (-60..=60).map(|i| i as f64 * r.gamma_eff / 10.0).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn oracle_matches_closed_forms(case in physical_rates()) {
        prop_assume!(case.is_some());
        let (r, n) = case.unwrap();
        let grid = grid_for(&r);
        let y = -r.phi / 2.0 + if r.s < 0.0 { FRAC_PI_2 } else { 0.0 };
        let o = propagate_spectra(&r, &NoiseCorrelators::from_rates(&r, n), &grid, &[y, y + FRAC_PI_2, y + 0.37]).unwrap();
        let st = lineshape::stokes_spectrum(&r, n, &grid).unwrap();
        let an = lineshape::antistokes_spectrum(&r, n, &grid).unwrap();
        let sh = SidebandShape::from_rates(&r, n).unwrap();
        let general = lineshape::quadrature_spectrum(&r, n, y + 0.37, &grid).unwrap();
        for i in 0..grid.len() {
            prop_assert!(rel(o.stokes_even[i], st[i]) < 1e-9);
            prop_assert!(rel(o.antistokes_even[i], an[i]) < 1e-9);
            prop_assert!(rel(o.quadratures[0].1[i], lineshape::yy_spectrum_at(&sh, grid[i])) < 1e-9);
            prop_assert!(rel(o.quadratures[1].1[i], lineshape::xx_spectrum_at(&sh, grid[i])) < 1e-9);
            prop_assert!(rel(o.quadratures[2].1[i], general[i]) < 1e-9);
        }
    }

    #[test]
    fn without_anomalous_noise_sidebands_are_even(case in physical_rates()) {
        prop_assume!(case.is_some());
        let (r, n) = case.unwrap();
        let grid = grid_for(&r);
        let noise = NoiseCorrelators::from_rates(&r, n).without_anomalous();
        let o = propagate_spectra(&r, &noise, &grid, &[0.4]).unwrap();
        let st = lineshape::stokes_spectrum(&r, n, &grid).unwrap();
        let q = lineshape::quadrature_spectrum(&r.without_anomalous(), n, 0.4, &grid).unwrap();
        for i in 0..grid.len() {
            prop_assert!(rel(o.stokes[i], st[i]) < 1e-9);
            prop_assert!(rel(o.quadratures[0].1[i], q[i]) < 1e-9);
        }
    }

    #[test]
    fn determinant_factorization(case in physical_rates(), x in -50.0f64..50.0) {
        prop_assume!(case.is_some());
        let (r, _) = case.unwrap();
        let d = x * r.gamma_eff;
        let det = TransferMatrix::from_rates(&r).determinant(d);
        let f = Complex64::new(r.gamma_plus / 2.0, -d) * Complex64::new(r.gamma_minus / 2.0, -d);
        prop_assert!((det - f).norm() < 1e-12 * det.norm());
    }

    #[test]
    fn correlator_commutator(case in physical_rates()) {
        prop_assume!(case.is_some());
        let (r, n) = case.unwrap();
        let c = NoiseCorrelators::from_rates(&r, n);
        prop_assert!((c.c_bbdag - c.c_bdagb - r.gamma_eff).abs() < 1e-12 * c.c_bbdag);
    }
}

#[test]
fn anomalous_term_is_odd_and_area_free() {
    let r = DerivedRates::phenomenological(1.0, 0.4, 2.0).unwrap();
    let mut r = r;
    r.anomalous = Complex64::new(0.0, 0.3);
    let grid: Vec<f64> = (-4000..=4000).map(|i| i as f64 * 0.01).collect();
    let o = propagate_spectra(&r, &NoiseCorrelators::from_rates(&r, 2.0), &grid, &[]).unwrap();
    let odd: Vec<f64> = o.stokes.iter().zip(&o.stokes_even).map(|(a, b)| a - b).collect();
    assert!(odd.iter().any(|v| v.abs() > 1e-3));
    for i in 0..grid.len() {
        assert!((odd[i] + odd[grid.len() - 1 - i]).abs() < 1e-12);
    }
}
