use epr_core::model::{CavityParams, PumpParams, SeedParams};
use epr_core::nopo::{integrate_dynamics, output_fields, steady_state_linear_solve, max_growth_rate};
use epr_core::Error;
use num_complex::Complex64;

fn rel(a: Complex64, b: Complex64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).norm() / b.norm()
    }
}

/// Same grid as the fixed-horizon oracle check, but integrated for 50 time
/// constants of the slowest mode, `1/(γ(1 − ε))`.
#[test]
fn relaxation_scaled_horizon_reaches_steady_state() {
    let gamma = 15e6;
    let seed = SeedParams::default();
    let zero = Complex64::new(0.0, 0.0);
    for ke in 0..10 {
        let eps = ke as f64 / 10.0;
        for dn in [-2.0, -1.0, 0.0, 1.0, 2.0] {
            let cavity = CavityParams::new(0.5e6, 13.5e6, 1.0e6, dn * gamma).unwrap();
            let pump = PumpParams::new(eps, 0.3).unwrap();
            let decay = -max_growth_rate(&cavity, &pump);
            assert!((decay - gamma * (1.0 - eps)).abs() < 1e-6 * gamma);
            let lin = steady_state_linear_solve(&cavity, &pump, &seed).unwrap();
            let traj = integrate_dynamics(&cavity, &pump, &seed, 50.0 / decay, 0.05 / gamma, (zero, zero)).unwrap();
            let (_, s, i) = traj.last().unwrap();
            let ode = output_fields(&cavity, s, i);
            let err = rel(ode.a_cls, lin.a_cls).max(rel(ode.a_cli, lin.a_cli));
            assert!(err < 1e-6, "eps {eps} dn {dn}: {err:e}");
        }
    }
}

#[test]
fn above_threshold_is_reported() {
    let cavity = CavityParams::default();
    let pump = PumpParams { epsilon: 1.2, phi_p: 0.0 };
    let zero = Complex64::new(0.0, 0.0);
    let gamma = cavity.gamma_total();
    let r = integrate_dynamics(&cavity, &pump, &SeedParams::default(), 200.0 / gamma, 0.1 / gamma, (zero, zero));
    assert!(matches!(r, Err(Error::Diverged { .. }) | Err(Error::AboveThreshold(_))), "{r:?}");
}
