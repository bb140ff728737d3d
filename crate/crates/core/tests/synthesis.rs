use epr_core::estimation::{band_power, welch_psd, Window};
use epr_core::locksim::{
    band_rms, run_closed_loop, synth_common_mode_phase, synth_epr_photocurrents, synth_shot_reference, Disturbances,
    EprSource, LoopConfig,
};
use epr_core::model::{CavityParams, PumpParams, SeedParams};
use epr_core::nopo::steady_state_linear_solve;
use epr_core::spectra::{degraded_variance, two_mode_variance, PhaseNoiseMode, Sign, SpectrumVariant};
use epr_core::TimeSeries;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const RATE: f64 = 200e3;
const GAMMA_HZ: f64 = 15e6;

fn source(epsilon: f64, eta: f64) -> EprSource {
    EprSource {
        epsilon,
        eta_s: eta,
        eta_i: eta,
        gamma_hz: GAMMA_HZ,
        dark_noise: false,
    }
}

fn constant(value: f64, n: usize) -> TimeSeries {
    TimeSeries::new(RATE, vec![value; n], "rad").unwrap()
}

fn sample_var(x: &[f64]) -> f64 {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
}

#[test]
fn full_band_covariance_matches_spectrum() {
    let n = 1_000_000;
    let (eps, eta) = (0.5, 0.9);
    let pc = synth_epr_photocurrents(&source(eps, eta), &constant(0.0, n), &constant(0.0, n), 21).unwrap();
    let qm = pc.combine(1.0, false).unwrap();
    let qp = pc.combine(1.0, true).unwrap();
    // Band average of 4ε/(Ω² + a²) over [0, Ω_max] is 4ε·atan(Ω_max/a)/(a·Ω_max).
    let om_max = RATE / 2.0 / GAMMA_HZ;
    let avg = |a: f64| 4.0 * eps * (om_max / a).atan() / (a * om_max);
    let expect_m = 1.0 - eta * avg(1.0 + eps);
    let expect_p = 1.0 + eta * avg(1.0 - eps);
    let vm = sample_var(&qm.samples);
    let vp = sample_var(&qp.samples);
    let se = |v: f64| v * (2.0 / n as f64).sqrt();
    assert!((vm - expect_m).abs() < 3.0 * se(expect_m), "{vm} vs {expect_m}");
    assert!((vp - expect_p).abs() < 3.0 * se(expect_p), "{vp} vs {expect_p}");
    let cov = qm
        .samples
        .iter()
        .zip(&qp.samples)
        .map(|(a, b)| a * b)
        .sum::<f64>()
        / n as f64;
    assert!(cov.abs() < 3.0 * (expect_m * expect_p / n as f64).sqrt(), "{cov}");
}

#[test]
fn headline_band_level() {
    let n = 1_000_000;
    let pc = synth_epr_photocurrents(&source(0.8, 0.89), &constant(0.0, n), &constant(0.0, n), 3).unwrap();
    let shot = synth_shot_reference(n as f64 / RATE, RATE, 4, false).unwrap();
    let v = band_rms(&pc.combine(1.0, false).unwrap(), 5e3, 15e3, &shot).unwrap();
    assert!((v - 0.121).abs() < 0.01, "{v}");
}

#[test]
fn doubled_amplitude_reads_four() {
    let shot = synth_shot_reference(2.0, RATE, 1, false).unwrap();
    let loud = TimeSeries::new(RATE, synth_shot_reference(2.0, RATE, 2, false).unwrap().samples.iter().map(|x| 2.0 * x).collect(), "snu").unwrap();
    let v = band_rms(&loud, 5e3, 15e3, &shot).unwrap();
    assert!((v - 4.0).abs() < 0.1, "{v}");
}

#[test]
fn differential_phase_offsets_are_invisible() {
    let n = 1_000_000;
    let src = source(0.8, 0.89);
    let d = 0.3;
    let shot = synth_shot_reference(n as f64 / RATE, RATE, 8, false).unwrap();
    let base = synth_epr_photocurrents(&src, &constant(0.0, n), &constant(0.0, n), 5).unwrap();
    let diff = synth_epr_photocurrents(&src, &constant(d, n), &constant(-d, n), 5).unwrap();
    // Relative 1σ of a 10 kHz band over 5 s, for each estimate.
    let tol = 3.0 * 2f64.sqrt() * (2.0 / (10e3 * 5.0) as f64).sqrt();
    for plus in [false, true] {
        let a = band_rms(&base.combine(1.0, plus).unwrap(), 5e3, 15e3, &shot).unwrap();
        let b = band_rms(&diff.combine(1.0, plus).unwrap(), 5e3, 15e3, &shot).unwrap();
        assert!((a / b - 1.0).abs() < tol, "{plus}: {a} vs {b}");
    }
    // The same offset applied in common mode is clearly visible.
    let common = synth_epr_photocurrents(&src, &constant(d, n), &constant(d, n), 5).unwrap();
    let a = band_rms(&base.combine(1.0, false).unwrap(), 5e3, 15e3, &shot).unwrap();
    let c = band_rms(&common.combine(1.0, false).unwrap(), 5e3, 15e3, &shot).unwrap();
    assert!(c > 3.0 * a);
}

#[test]
fn injected_jitter_matches_phase_noise_model() {
    let n = 1_000_000;
    let (eps, eta, sigma) = (0.8, 0.89, 0.1);
    let theta = synth_common_mode_phase(sigma, 2e3, n as f64 / RATE, RATE, 12).unwrap();
    let pc = synth_epr_photocurrents(&source(eps, eta), &theta, &theta, 13).unwrap();
    let shot = synth_shot_reference(n as f64 / RATE, RATE, 14, false).unwrap();
    let om = 10e3 / GAMMA_HZ;
    for (plus, sign) in [(false, Sign::Minus), (true, Sign::Plus)] {
        let measured = band_rms(&pc.combine(1.0, plus).unwrap(), 5e3, 15e3, &shot).unwrap();
        let model = degraded_variance(eps, eta, sigma, om, sign, PhaseNoiseMode::ExactGaussian).unwrap();
        assert!((measured / model - 1.0).abs() < 0.05, "{plus}: {measured} vs {model}");
    }
    let ideal = two_mode_variance(eps, eta, om, Sign::Minus, SpectrumVariant::Corrected).unwrap();
    let measured = band_rms(&pc.combine(1.0, false).unwrap(), 5e3, 15e3, &shot).unwrap();
    assert!(measured > 2.0 * ideal);
}

#[test]
fn photocurrents_are_reproducible() {
    let n = 4096;
    let theta = synth_common_mode_phase(0.01, 1e3, n as f64 / RATE, RATE, 1).unwrap();
    let a = synth_epr_photocurrents(&source(0.7, 0.9), &theta, &theta, 77).unwrap();
    let b = synth_epr_photocurrents(&source(0.7, 0.9), &theta, &theta, 77).unwrap();
    assert_eq!(a, b);
}

#[test]
fn closed_loop_is_reproducible() {
    let fields = steady_state_linear_solve(&CavityParams::default(), &PumpParams::default(), &SeedParams::default()).unwrap();
    let run = || {
        run_closed_loop(
            &LoopConfig::default(),
            &LoopConfig::idler_default(),
            &Disturbances::typical(4),
            &fields,
            0.05,
            500e3,
        )
        .unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    for k in 0..a.common_mode.len() {
        assert_eq!(a.common_mode.samples[k], 0.5 * (a.residual_s.samples[k] + a.residual_i.samples[k]));
    }
}

#[test]
fn psd_estimate_variance_halves_with_double_length() {
    let trials = 200;
    let seg = 256;
    let band = |len: usize, seed: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..len)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z
            })
            .collect();
        let s = TimeSeries::new(1e3, x, "u").unwrap();
        band_power(&welch_psd(&s, seg, 0.5, Window::Hann).unwrap(), 100.0, 200.0).unwrap()
    };
    let std = |v: Vec<f64>| sample_var(&v).sqrt();
    let short = std((0..trials).map(|t| band(8192, t)).collect());
    let long = std((0..trials).map(|t| band(16384, 10_000 + t)).collect());
    let ratio = short / long;
    assert!((ratio / 2f64.sqrt() - 1.0).abs() < 0.2, "{ratio}");
}
