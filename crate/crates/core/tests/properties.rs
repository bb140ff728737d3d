use std::f64::consts::{PI, TAU};

use epr_core::estimation::apply_calibration;
use epr_core::model::{wrap_phase, CavityParams, PumpParams, SeedParams};
use epr_core::nopo::{detuning_phase_offset, steady_state_closed_form, steady_state_linear_solve, ClosedFormVariant};
use epr_core::spectra::{
    build_covariance_model, duan_simon, orthogonal_variance, phase_noise_variance, spectrum_point, two_mode_variance,
    weighted_variance, PhaseNoiseMode, Sign, SpectrumVariant,
};
use epr_core::TimeSeries;
use proptest::prelude::*;

const COR: SpectrumVariant = SpectrumVariant::Corrected;

fn cavity(dn: f64) -> CavityParams {
    CavityParams::new(0.5e6, 13.5e6, 1.0e6, dn * 15e6).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn wrap_phase_lands_in_half_open_interval(x in -1e3f64..1e3) {
        let w = wrap_phase(x);
        prop_assert!(w > -PI && w <= PI);
        let k = ((x - w) / TAU).round();
        prop_assert!((x - w - k * TAU).abs() < 1e-9);
    }

    #[test]
    fn seed_scaling_is_linear(eps in 0.0f64..0.95, dn in -2.0f64..2.0, phi in 0.0f64..TAU, c in 0.1f64..10.0) {
        let cav = cavity(dn);
        let pump = PumpParams::new(eps, phi).unwrap();
        let a = steady_state_linear_solve(&cav, &pump, &SeedParams::new(1e6, 0.4).unwrap()).unwrap();
        let b = steady_state_linear_solve(&cav, &pump, &SeedParams::new(c * 1e6, 0.4).unwrap()).unwrap();
        prop_assert!((b.a_cls - c * a.a_cls).norm() <= 1e-12 * b.a_cls.norm());
        prop_assert!((b.a_cli - c * a.a_cli).norm() <= 1e-12 * b.a_cls.norm());
        prop_assert!(wrap_phase(b.phi_cls - a.phi_cls).abs() < 1e-12);
        if eps > 1e-3 {
            prop_assert!(wrap_phase(b.phi_cli - a.phi_cli).abs() < 1e-12);
        }
    }

    #[test]
    fn phase_sum_with_detuning_offset(eps in 0.01f64..0.99, dn in -3.0f64..3.0, phi in 0.0f64..TAU, seed_phase in 0.0f64..TAU) {
        let f = steady_state_linear_solve(
            &cavity(dn),
            &PumpParams::new(eps, phi).unwrap(),
            &SeedParams::new(7.3e6, seed_phase).unwrap(),
        ).unwrap();
        let residual = wrap_phase(f.phi_cls + f.phi_cli - phi - detuning_phase_offset(dn));
        prop_assert!(residual.abs() < 1e-9, "{}", residual);
    }

    #[test]
    fn pump_phase_moves_idler_only(eps in 0.01f64..0.99, phi in 0.0f64..TAU, delta in -PI..PI) {
        let cav = cavity(0.0);
        let seed = SeedParams::new(7.3e6, 0.7).unwrap();
        let a = steady_state_linear_solve(&cav, &PumpParams::new(eps, phi).unwrap(), &seed).unwrap();
        let b = steady_state_linear_solve(&cav, &PumpParams::new(eps, phi + delta).unwrap(), &seed).unwrap();
        prop_assert!(wrap_phase(b.phi_cls - a.phi_cls).abs() < 1e-12);
        prop_assert!(wrap_phase(b.phi_cli - a.phi_cli - delta).abs() < 1e-12);
    }

    #[test]
    fn amplitude_ratio(eps in 0.0f64..0.99, dn in -3.0f64..3.0, phi in 0.0f64..TAU) {
        let f = steady_state_linear_solve(&cavity(dn), &PumpParams::new(eps, phi).unwrap(), &SeedParams::default()).unwrap();
        let ratio = f.a_cli.norm() / f.a_cls.norm();
        prop_assert!((ratio - eps / (1.0 + dn * dn).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn closed_form_matches_linear_solve(eps in 0.0f64..0.99, dn in -3.0f64..3.0, phi in 0.0f64..TAU) {
        let cav = cavity(dn);
        let pump = PumpParams::new(eps, phi).unwrap();
        let seed = SeedParams::default();
        let lin = steady_state_linear_solve(&cav, &pump, &seed).unwrap();
        let cf = steady_state_closed_form(&cav, &pump, &seed, ClosedFormVariant::Corrected).unwrap();
        prop_assert!((cf.a_cls - lin.a_cls).norm() <= 1e-12 * lin.a_cls.norm());
        prop_assert!((cf.a_cli - lin.a_cli).norm() <= 1e-12 * lin.a_cls.norm());
    }

    #[test]
    fn minimum_uncertainty_product(eps in 0.0f64..=0.99, om in 0.0f64..=10.0) {
        let p = spectrum_point(eps, 1.0, om, COR).unwrap();
        prop_assert!((p.var_minus * p.var_plus - 1.0).abs() < 1e-12);
    }

    #[test]
    fn squeezing_improves_with_efficiency(eps in 0.01f64..0.99, om in 0.0f64..10.0, e1 in 0.0f64..1.0, e2 in 0.0f64..1.0) {
        prop_assume!((e1 - e2).abs() > 1e-9);
        let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
        let v_lo = two_mode_variance(eps, lo, om, Sign::Minus, COR).unwrap();
        let v_hi = two_mode_variance(eps, hi, om, Sign::Minus, COR).unwrap();
        prop_assert!(v_hi < v_lo);
    }

    #[test]
    fn squeezing_degrades_with_frequency(eps in 0.01f64..0.99, eta in 0.01f64..=1.0, o1 in 0.0f64..10.0, o2 in 0.0f64..10.0) {
        prop_assume!((o1 - o2).abs() > 1e-6);
        let (lo, hi) = if o1 < o2 { (o1, o2) } else { (o2, o1) };
        let v_lo = two_mode_variance(eps, eta, lo, Sign::Minus, COR).unwrap();
        let v_hi = two_mode_variance(eps, eta, hi, Sign::Minus, COR).unwrap();
        prop_assert!(v_hi > v_lo);
    }

    #[test]
    fn phase_noise_is_a_convex_mix(
        eps in 0.0f64..0.99,
        eta in 0.0f64..=1.0,
        sigma in 0.0f64..3.0,
        exact in any::<bool>(),
    ) {
        let mode = if exact { PhaseNoiseMode::ExactGaussian } else { PhaseNoiseMode::SmallAngle };
        let p = spectrum_point(eps, eta, 0.0, COR).unwrap();
        // Small-angle weights only stay in [0, 1] while σ ≤ 1.
        prop_assume!(exact || sigma <= 1.0);
        let v = phase_noise_variance(p.var_minus, p.var_plus, sigma, mode).unwrap();
        let slack = 1e-12 * p.var_plus;
        prop_assert!(v >= p.var_minus - slack && v <= p.var_plus + slack);
    }

    #[test]
    fn zero_pump_is_separability_boundary(eta in 0.0f64..=1.0, om in 0.0f64..10.0) {
        let p = spectrum_point(0.0, eta, om, COR).unwrap();
        let ds = duan_simon(p.var_minus, orthogonal_variance(p.var_plus, p.var_minus, Sign::Plus));
        prop_assert_eq!(ds.sum, 2.0);
        prop_assert!(!ds.entangled);
    }

    #[test]
    fn symmetric_unit_weight_reproduces_spectrum(eps in 0.0f64..0.99, eta in 0.0f64..=1.0, om in 0.0f64..10.0) {
        let model = build_covariance_model(eps, eta, eta, om).unwrap();
        for sign in [Sign::Minus, Sign::Plus] {
            let w = weighted_variance(&model, 1.0, sign);
            let v = two_mode_variance(eps, eta, om, sign, COR).unwrap();
            prop_assert!((w - v).abs() <= 1e-12 * v.max(1.0));
        }
    }

    #[test]
    fn calibration_is_linear(xs in prop::collection::vec(-10.0f64..10.0, 1..64), b1 in 1e-3f64..1e3, b2 in 1e-3f64..1e3, a in -5.0f64..5.0) {
        let s = TimeSeries::new(1.0, xs.clone(), "V").unwrap();
        let scaled: Vec<f64> = xs.iter().map(|x| a * x).collect();
        let lhs = apply_calibration(&TimeSeries::new(1.0, scaled, "V").unwrap(), b1).unwrap();
        let rhs = apply_calibration(&s, b1).unwrap();
        for (l, r) in lhs.samples.iter().zip(&rhs.samples) {
            prop_assert!((l - a * r).abs() <= 1e-12 * (1.0 + l.abs()));
        }
        let twice = apply_calibration(&apply_calibration(&s, b1).unwrap(), b2).unwrap();
        let once = apply_calibration(&s, b1 * b2).unwrap();
        for (t, o) in twice.samples.iter().zip(&once.samples) {
            prop_assert!((t - o).abs() <= 4.0 * f64::EPSILON * o.abs());
        }
    }
}

#[test]
fn exact_gaussian_tends_to_midpoint() {
    let p = spectrum_point(0.8, 0.89, 0.0, COR).unwrap();
    let v = phase_noise_variance(p.var_minus, p.var_plus, 20.0, PhaseNoiseMode::ExactGaussian).unwrap();
    assert!((v - 0.5 * (p.var_minus + p.var_plus)).abs() < 1e-12);
    let v0 = phase_noise_variance(p.var_minus, p.var_plus, 0.0, PhaseNoiseMode::ExactGaussian).unwrap();
    assert_eq!(v0, p.var_minus);
}
