//! Joint weighted least-squares fit of detection efficiency `η` and common-mode
//! phase noise `σ_Θ` to squeezing/anti-squeezing data measured versus pump.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::spectra::{degraded_variance, PhaseNoiseMode, Sign};

/// Fitted `σ_Θ` below this is reported as sitting on the lower bound.
pub const SIGMA_BOUNDARY: f64 = 1e-4;

const ETA_STARTS: [f64; 3] = [0.6, 0.8, 0.95];
const SIGMA_STARTS: [f64; 3] = [0.002, 0.02, 0.08];
const RAW_CLAMP: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezingPoint {
    pub epsilon: f64,
    pub var_minus: f64,
    pub var_plus: f64,
    /// Fractional 1σ uncertainty applied to both branches; `None` falls back
    /// to equal weights on log-variance.
    pub uncertainty: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SqueezingDataset {
    pub points: Vec<SqueezingPoint>,
}

impl SqueezingDataset {
    pub fn new(points: Vec<SqueezingPoint>) -> Result<Self> {
        let d = Self { points };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        for (k, p) in self.points.iter().enumerate() {
            if !(0.0..1.0).contains(&p.epsilon) {
                return Err(Error::invalid(format!("point {k}: epsilon {} outside [0, 1)", p.epsilon)));
            }
            if !(p.var_minus > 0.0 && p.var_plus > 0.0) || !p.var_minus.is_finite() || !p.var_plus.is_finite() {
                return Err(Error::invalid(format!("point {k}: variances must be positive and finite")));
            }
            if let Some(u) = p.uncertainty {
                if !(u > 0.0) || !u.is_finite() {
                    return Err(Error::invalid(format!("point {k}: uncertainty must be > 0")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub mode: PhaseNoiseMode,
    /// Upper bound of the `σ_Θ` search (rad).
    pub sigma_max: f64,
    /// Number of bootstrap resamples; 0 disables the cross-check.
    pub bootstrap_resamples: usize,
    pub bootstrap_seed: u64,
    pub simplex: NelderMeadOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            mode: PhaseNoiseMode::SmallAngle,
            sigma_max: 0.5,
            bootstrap_resamples: 200,
            bootstrap_seed: 0x5eed,
            simplex: NelderMeadOptions {
                max_iterations: 4_000,
                x_tol: 1e-9,
                f_tol: 1e-16,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitResult {
    pub eta_hat: f64,
    pub sigma_hat: f64,
    /// 1σ from the Jacobian at the optimum, scaled by the reduced χ².
    pub eta_err: f64,
    /// NaN when `σ_Θ` is pinned at its bound and the Jacobian is singular.
    pub sigma_err: f64,
    pub eta_err_bootstrap: Option<f64>,
    pub sigma_err_bootstrap: Option<f64>,
    /// √(Σ r²) over both branches.
    pub residual_norm: f64,
    pub converged: bool,
    pub sigma_at_boundary: bool,
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

struct Problem<'a> {
    points: &'a [SqueezingPoint],
    omega_norm: f64,
    opts: &'a FitOptions,
}

impl Problem<'_> {
    fn to_physical(&self, raw: &[f64]) -> (f64, f64) {
        let u = raw[0].clamp(-RAW_CLAMP, RAW_CLAMP);
        let v = raw[1].clamp(-RAW_CLAMP, RAW_CLAMP);
        (logistic(u), self.opts.sigma_max * logistic(v))
    }

    fn residuals(&self, eta: f64, sigma: f64, out: &mut Vec<f64>) -> Result<()> {
        out.clear();
        for p in self.points {
            for (sign, measured) in [(Sign::Minus, p.var_minus), (Sign::Plus, p.var_plus)] {
                let model = degraded_variance(p.epsilon, eta, sigma, self.omega_norm, sign, self.opts.mode)?;
                let r = match p.uncertainty {
                    Some(u) => (model - measured) / (u * measured),
                    None => model.ln() - measured.ln(),
                };
                out.push(r);
            }
        }
        Ok(())
    }

    fn cost(&self, eta: f64, sigma: f64, buf: &mut Vec<f64>) -> f64 {
        match self.residuals(eta, sigma, buf) {
            Ok(()) => buf.iter().map(|r| r * r).sum(),
            Err(_) => f64::INFINITY,
        }
    }

    /// Best multi-start simplex solution: `(eta, sigma, cost, converged)`.
    fn solve(&self) -> (f64, f64, f64, bool) {
        let starts: Vec<(f64, f64)> = ETA_STARTS
            .iter()
            .flat_map(|&e| SIGMA_STARTS.iter().map(move |&s| (e, s)))
            .collect();
        let runs: Vec<_> = starts
            .par_iter()
            .map(|&(e0, s0)| {
                let mut buf = Vec::with_capacity(2 * self.points.len());
                let x0 = [logit(e0), logit(s0 / self.opts.sigma_max)];
                nelder_mead(
                    |raw| {
                        let (e, s) = self.to_physical(raw);
                        self.cost(e, s, &mut buf)
                    },
                    &x0,
                    &[0.5, 0.5],
                    self.opts.simplex,
                )
            })
            .collect();
        // Prefer converged runs; ties resolve to the lowest start index.
        let pick = |want_converged: bool| {
            runs.iter()
                .enumerate()
                .filter(|(_, r)| !want_converged || r.converged)
                .min_by(|a, b| a.1.value.total_cmp(&b.1.value).then(a.0.cmp(&b.0)))
                .map(|(_, r)| r)
        };
        let best = pick(true).or_else(|| pick(false)).expect("at least one start");
        let (e, s) = self.to_physical(&best.x);
        (e, s, best.value, best.converged)
    }

    fn jacobian_errors(&self, eta: f64, sigma: f64, cost: f64) -> (f64, f64) {
        let m = 2 * self.points.len();
        let dof = m.saturating_sub(2).max(1) as f64;
        let s2 = cost / dof;
        let mut plus = Vec::with_capacity(m);
        let mut minus = Vec::with_capacity(m);
        let mut column = |f: &dyn Fn(f64) -> (f64, f64), h: f64| -> Option<Vec<f64>> {
            let (ep, sp) = f(h);
            let (em, sm) = f(-h);
            self.residuals(ep, sp, &mut plus).ok()?;
            self.residuals(em, sm, &mut minus).ok()?;
            Some(plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * h)).collect())
        };
        let h_eta = 1e-6;
        let h_sigma = 1e-6;
        let Some(j_eta) = column(&|h| ((eta + h).min(1.0), sigma), h_eta) else {
            return (f64::NAN, f64::NAN);
        };
        let Some(j_sigma) = column(&|h| (eta, sigma + h), h_sigma) else {
            return (f64::NAN, f64::NAN);
        };
        let a: f64 = j_eta.iter().map(|x| x * x).sum();
        let b: f64 = j_eta.iter().zip(&j_sigma).map(|(x, y)| x * y).sum();
        let c: f64 = j_sigma.iter().map(|x| x * x).sum();
        let det = a * c - b * b;
        if det > 1e-10 * a * c && det > 0.0 {
            ((s2 * c / det).sqrt(), (s2 * a / det).sqrt())
        } else {
            ((s2 / a).sqrt(), f64::NAN)
        }
    }
}

/// Fits `(η, σ_Θ)` with the default [`FitOptions`].
pub fn fit_phase_noise_model(data: &SqueezingDataset, omega_norm: f64) -> Result<FitResult> {
    fit_phase_noise_model_with(data, omega_norm, &FitOptions::default())
}

/// Multi-start simplex fit over a logistic reparametrization that keeps
/// `η ∈ (0, 1)` and `σ_Θ ∈ (0, sigma_max)`.
pub fn fit_phase_noise_model_with(data: &SqueezingDataset, omega_norm: f64, opts: &FitOptions) -> Result<FitResult> {
    data.validate()?;
    if data.points.len() < 4 {
        return Err(Error::invalid("fit needs at least 4 data points"));
    }
    let mut eps: Vec<f64> = data.points.iter().map(|p| p.epsilon).collect();
    eps.sort_by(f64::total_cmp);
    eps.dedup();
    if eps.len() < 3 {
        return Err(Error::invalid("fit needs at least 3 distinct pump values"));
    }
    if !(opts.sigma_max > 0.0) {
        return Err(Error::invalid("sigma_max must be > 0"));
    }

    let problem = Problem {
        points: &data.points,
        omega_norm,
        opts,
    };
    let (eta_hat, sigma_hat, cost, converged) = problem.solve();
    let (eta_err, sigma_err) = problem.jacobian_errors(eta_hat, sigma_hat, cost);

    let (eta_err_bootstrap, sigma_err_bootstrap) = if opts.bootstrap_resamples > 1 {
        let n = data.points.len();
        let estimates: Vec<(f64, f64)> = (0..opts.bootstrap_resamples)
            .into_par_iter()
            .map(|b| {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.bootstrap_seed.wrapping_add(b as u64));
                let resampled: Vec<SqueezingPoint> =
                    (0..n).map(|_| data.points[rng.random_range(0..n)]).collect();
                let p = Problem {
                    points: &resampled,
                    omega_norm,
                    opts,
                };
                let (e, s, _, _) = p.solve();
                (e, s)
            })
            .collect();
        let std = |vals: Vec<f64>| {
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            (vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (vals.len() - 1) as f64).sqrt()
        };
        (
            Some(std(estimates.iter().map(|e| e.0).collect())),
            Some(std(estimates.iter().map(|e| e.1).collect())),
        )
    } else {
        (None, None)
    };

    Ok(FitResult {
        eta_hat,
        sigma_hat,
        eta_err,
        sigma_err,
        eta_err_bootstrap,
        sigma_err_bootstrap,
        residual_norm: cost.sqrt(),
        converged,
        sigma_at_boundary: sigma_hat < SIGMA_BOUNDARY,
    })
}

/// Noise-free dataset generated from the fit model itself.
pub fn synthetic_dataset(
    epsilons: &[f64],
    eta: f64,
    sigma: f64,
    omega_norm: f64,
    mode: PhaseNoiseMode,
    uncertainty: Option<f64>,
) -> Result<SqueezingDataset> {
    let points = epsilons
        .iter()
        .map(|&e| {
            Ok(SqueezingPoint {
                epsilon: e,
                var_minus: degraded_variance(e, eta, sigma, omega_norm, Sign::Minus, mode)?,
                var_plus: degraded_variance(e, eta, sigma, omega_norm, Sign::Plus, mode)?,
                uncertainty,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    SqueezingDataset::new(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    const EPS: [f64; 8] = [0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

    fn quick() -> FitOptions {
        FitOptions {
            bootstrap_resamples: 0,
            ..FitOptions::default()
        }
    }

    #[test]
    fn noiseless_round_trip() {
        let data = synthetic_dataset(&EPS, 0.89, 0.010, 0.0, PhaseNoiseMode::SmallAngle, None).unwrap();
        let fit = fit_phase_noise_model_with(&data, 0.0, &quick()).unwrap();
        assert!(fit.converged);
        assert!((fit.eta_hat - 0.89).abs() < 1e-3, "{fit:?}");
        assert!((fit.sigma_hat - 0.010).abs() < 0.5e-3, "{fit:?}");
        assert!(!fit.sigma_at_boundary);
    }

    #[test]
    fn zero_phase_noise_is_flagged() {
        let data = synthetic_dataset(&EPS, 0.9, 0.0, 0.0, PhaseNoiseMode::SmallAngle, None).unwrap();
        let fit = fit_phase_noise_model_with(&data, 0.0, &quick()).unwrap();
        assert!(fit.sigma_at_boundary, "{fit:?}");
        assert!((fit.eta_hat - 0.9).abs() < 1e-6);
    }

    #[test]
    fn rejects_thin_datasets() {
        let data = synthetic_dataset(&EPS[..3], 0.9, 0.01, 0.0, PhaseNoiseMode::SmallAngle, None).unwrap();
        assert!(fit_phase_noise_model_with(&data, 0.0, &quick()).is_err());
        let data = synthetic_dataset(&[0.5, 0.5, 0.6, 0.6], 0.9, 0.01, 0.0, PhaseNoiseMode::SmallAngle, None).unwrap();
        assert!(fit_phase_noise_model_with(&data, 0.0, &quick()).is_err());
        assert!(SqueezingDataset::new(vec![SqueezingPoint {
            epsilon: 1.2,
            var_minus: 0.5,
            var_plus: 2.0,
            uncertainty: None,
        }])
        .is_err());
    }

    #[test]
    fn bootstrap_is_deterministic_and_comparable() {
        let mut data = synthetic_dataset(&EPS, 0.89, 0.010, 0.0, PhaseNoiseMode::SmallAngle, Some(0.02)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for p in &mut data.points {
            let (zm, zp): (f64, f64) = (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
            p.var_minus *= 1.0 + 0.02 * zm;
            p.var_plus *= 1.0 + 0.02 * zp;
        }
        let opts = FitOptions {
            bootstrap_resamples: 50,
            ..FitOptions::default()
        };
        let a = fit_phase_noise_model_with(&data, 0.0, &opts).unwrap();
        let b = fit_phase_noise_model_with(&data, 0.0, &opts).unwrap();
        assert_eq!(a, b);
        let boot = a.eta_err_bootstrap.unwrap();
        assert!(boot > 0.2 * a.eta_err && boot < 5.0 * a.eta_err, "{a:?}");
    }
}
