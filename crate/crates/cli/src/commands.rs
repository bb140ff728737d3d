use std::path::Path;

use epr_core::estimation::{
    default_segment_length, fit_phase_noise_model_with, welch_psd, FitOptions, SqueezingDataset, SqueezingPoint,
};
use epr_core::locksim::{
    band_rms, calibrate_error_signal, run_closed_loop, synth_common_mode_phase, synth_epr_photocurrents,
    synth_shot_reference, Disturbances, EprSource, LockRunResult,
};
use epr_core::model::db;
use epr_core::nopo::{integrate_dynamics, parametric_gain, steady_state_closed_form, steady_state_linear_solve};
use epr_core::pipeline::{fig3, fig4, fig5, linspace, pump_sweep, spectrum_grid, SpectrumRow, SweepRow};
use epr_core::spectra::{
    degraded_variance, duan_simon, orthogonal_variance, sigma_theta_common, spectrum_point, Sign, SpectrumVariant,
};
use epr_core::TimeSeries;
use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;

use crate::config::{RunConfig, SteadyStateMethod};
use crate::error::CliError;
use crate::output::OutputDir;

/// Band used for synthetic squeezing read-outs (Hz).
const ANALYSIS_BAND: (f64, f64) = (5e3, 15e3);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Fig3,
    Fig4,
    Fig5,
}

pub fn steady_state(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let s = &cfg.system;
    let f = match cfg.steady_state.method {
        SteadyStateMethod::LinearSolve => steady_state_linear_solve(&s.cavity, &s.pump, &s.seed)?,
        SteadyStateMethod::ClosedForm => steady_state_closed_form(&s.cavity, &s.pump, &s.seed, cfg.steady_state.variant)?,
    };
    out.json(
        "steady_state.json",
        &json!({
            "a_cls": [f.a_cls.re, f.a_cls.im],
            "a_cli": [f.a_cli.re, f.a_cli.im],
            "phi_cls": f.phi_cls,
            "phi_cli": f.phi_cli,
            "gain": parametric_gain(s.pump.epsilon)?,
            "method": cfg.steady_state.method,
        }),
    )
}

pub fn integrate(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let s = &cfg.system;
    let gamma = s.cavity.gamma_total();
    let block = &cfg.integrate;
    if block.decimate == 0 {
        return Err(CliError::Config("integrate.decimate must be >= 1".into()));
    }
    let zero = Complex64::new(0.0, 0.0);
    let traj = integrate_dynamics(
        &s.cavity,
        &s.pump,
        &s.seed,
        block.t_end / gamma,
        block.dt / gamma,
        (zero, zero),
    )?;
    let last = traj.len() - 1;
    let rows = (0..traj.len())
        .filter(|&k| k % block.decimate == 0 || k == last)
        .map(|k| {
            vec![
                traj.times[k],
                traj.alpha_s[k].re,
                traj.alpha_s[k].im,
                traj.alpha_i[k].re,
                traj.alpha_i[k].im,
            ]
        });
    out.csv(
        "trajectory.csv",
        &["t", "alpha_s_re", "alpha_s_im", "alpha_i_re", "alpha_i_im"],
        rows,
    )
}

fn eta_symmetric(cfg: &RunConfig) -> f64 {
    0.5 * (cfg.system.detection.eta_s + cfg.system.detection.eta_i)
}

fn write_spectra(out: &mut OutputDir, rows: &[SpectrumRow]) -> Result<(), CliError> {
    out.csv(
        "spectra.csv",
        &["omega_norm", "var_minus", "var_plus", "var_minus_db", "var_plus_db"],
        rows.iter()
            .map(|r| vec![r.omega_norm, r.var_minus, r.var_plus, r.var_minus_db, r.var_plus_db]),
    )
}

pub fn spectra(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let b = &cfg.spectra;
    if b.points == 0 || !(b.omega_min >= 0.0 && b.omega_min <= b.omega_max) {
        return Err(CliError::Config("spectra grid needs points > 0 and 0 <= omega_min <= omega_max".into()));
    }
    let rows = spectrum_grid(
        cfg.system.pump.epsilon,
        eta_symmetric(cfg),
        &linspace(b.omega_min, b.omega_max, b.points),
        b.variant,
    )?;
    write_spectra(out, &rows)
}

fn write_sweep(out: &mut OutputDir, rows: &[SweepRow]) -> Result<(), CliError> {
    out.csv(
        "sweep.csv",
        &["epsilon", "var_minus_pn", "var_plus_pn"],
        rows.iter().map(|r| vec![r.epsilon, r.var_minus_pn, r.var_plus_pn]),
    )
}

pub fn sweep(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let b = &cfg.sweep;
    if b.points == 0 || !(b.epsilon_min >= 0.0 && b.epsilon_min <= b.epsilon_max) {
        return Err(CliError::Config("sweep grid needs points > 0 and 0 <= epsilon_min <= epsilon_max".into()));
    }
    let sigma = match b.sigma_theta {
        Some(s) => s,
        None => sigma_theta_common(&cfg.system.phase_noise)?,
    };
    let rows = pump_sweep(
        &linspace(b.epsilon_min, b.epsilon_max, b.points),
        eta_symmetric(cfg),
        sigma,
        b.omega_norm,
        b.mode,
    )?;
    write_sweep(out, &rows)
}

pub fn duan_simon_cmd(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let eps = cfg.system.pump.epsilon;
    let eta = eta_symmetric(cfg);
    let om = cfg.duan_simon.omega_norm;
    let p = spectrum_point(eps, eta, om, SpectrumVariant::Corrected)?;
    let (minus, plus_orth) = if cfg.duan_simon.phase_noise {
        let sigma = sigma_theta_common(&cfg.system.phase_noise)?;
        let v = degraded_variance(eps, eta, sigma, om, Sign::Minus, cfg.sweep.mode)?;
        (v, v)
    } else {
        (p.var_minus, orthogonal_variance(p.var_plus, p.var_minus, Sign::Plus))
    };
    let ds = duan_simon(minus, plus_orth);
    out.json("duan_simon.json", &json!({ "sum": ds.sum, "entangled": ds.entangled }))
}

fn write_lock_run(out: &mut OutputDir, run: &LockRunResult, extra: serde_json::Value) -> Result<(), CliError> {
    let n = run.common_mode.len();
    let rows = (0..n).map(|k| {
        vec![
            run.common_mode.time(k),
            run.residual_s.samples[k],
            run.residual_i.samples[k],
            run.common_mode.samples[k],
            run.error_s.samples[k],
            run.error_i.samples[k],
        ]
    });
    out.csv(
        "lock_residuals.csv",
        &["t", "residual_s", "residual_i", "common_mode", "error_s", "error_i"],
        rows,
    )?;
    let mut summary = json!({
        "sigma_theta": run.sigma_theta(),
        "sigma_s": run.residual_s.rms(),
        "sigma_i": run.residual_i.rms(),
        "in_lock_fraction": run.in_lock_fraction,
        "saturation_events": run.saturation_events,
        "unstable": run.unstable,
        "samples": n,
        "sample_rate": run.common_mode.sample_rate,
    });
    if let (Some(obj), serde_json::Value::Object(more)) = (summary.as_object_mut(), extra) {
        obj.extend(more);
    }
    out.json("lock_summary.json", &summary)
}

pub fn lock_sim(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let s = &cfg.system;
    let b = &cfg.lock_sim;
    let fields = steady_state_linear_solve(&s.cavity, &s.pump, &s.seed)?;
    let disturbances = b.disturbances.clone().unwrap_or_else(|| Disturbances::typical(cfg.rng_seed));
    let run = run_closed_loop(&b.loop_s, &b.loop_i, &disturbances, &fields, b.duration, b.rate)?;
    write_lock_run(out, &run, json!({}))
}

pub fn synth_epr(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let s = &cfg.system;
    let b = &cfg.synth_epr;
    let sigma = match b.sigma_theta {
        Some(v) => v,
        None => sigma_theta_common(&s.phase_noise)?,
    };
    let theta = synth_common_mode_phase(sigma, b.theta_corner, b.duration, b.rate, cfg.rng_seed)?;
    let source = EprSource {
        epsilon: s.pump.epsilon,
        eta_s: s.detection.eta_s,
        eta_i: s.detection.eta_i,
        gamma_hz: s.cavity.gamma_total(),
        dark_noise: b.dark_noise,
    };
    let pc = synth_epr_photocurrents(&source, &theta, &theta, cfg.rng_seed.wrapping_add(1))?;
    let shot = synth_shot_reference(b.duration, b.rate, cfg.rng_seed.wrapping_add(2), b.dark_noise)?;
    let n = pc.q_s.len();
    out.csv(
        "epr_photocurrents.csv",
        &["t", "q_s", "q_i", "theta"],
        (0..n).map(|k| vec![pc.q_s.time(k), pc.q_s.samples[k], pc.q_i.samples[k], theta.samples[k]]),
    )?;
    out.csv(
        "shot_reference.csv",
        &["t", "q"],
        (0..shot.len()).map(|k| vec![shot.time(k), shot.samples[k]]),
    )?;
    let g = s.detection.g_weight;
    let (lo, hi) = ANALYSIS_BAND;
    if hi < b.rate / 2.0 {
        let vm = band_rms(&pc.combine(g, false)?, lo, hi, &shot)?;
        let vp = band_rms(&pc.combine(g, true)?, lo, hi, &shot)?;
        out.json(
            "epr_summary.json",
            &json!({
                "band_hz": [lo, hi],
                "g_weight": g,
                "var_minus": vm,
                "var_plus": vp,
                "var_minus_db": db(vm)?,
                "var_plus_db": db(vp)?,
                "sigma_theta": sigma,
            }),
        )?;
    }
    Ok(())
}

struct Table {
    headers: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    fn read(path: &Path) -> Result<Self, CliError> {
        let mut r = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let headers: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|f| {
                    if f.is_empty() {
                        Ok(f64::NAN)
                    } else {
                        f.parse::<f64>()
                            .map_err(|_| CliError::Config(format!("row {}: `{f}` is not a number", i + 1)))
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(CliError::Config(format!("{} has no data rows", path.display())));
        }
        Ok(Self { headers, rows })
    }

    fn column(&self, name: &str) -> Result<Vec<f64>, CliError> {
        let idx = self
            .headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Config(format!("input has no `{name}` column (found {:?})", self.headers)))?;
        Ok(self.rows.iter().map(|r| r.get(idx).copied().unwrap_or(f64::NAN)).collect())
    }

    fn optional_column(&self, name: &str) -> Option<Vec<f64>> {
        self.column(name).ok()
    }
}

fn require_input(input: Option<&Path>, cmd: &str) -> Result<std::path::PathBuf, CliError> {
    input
        .map(Path::to_path_buf)
        .ok_or_else(|| CliError::Config(format!("`{cmd}` needs --input <csv>")))
}

pub fn calibrate(cfg: &RunConfig, input: Option<&Path>, out: &mut OutputDir) -> Result<(), CliError> {
    let t = Table::read(&require_input(input, "calibrate")?)?;
    let cal = calibrate_error_signal(&t.column("phase")?, &t.column("signal")?, cfg.calibrate.method)?;
    out.json("calibration.json", &cal)
}

pub fn psd(cfg: &RunConfig, input: Option<&Path>, out: &mut OutputDir) -> Result<(), CliError> {
    let t = Table::read(&require_input(input, "psd")?)?;
    let b = &cfg.psd;
    let column = match &b.column {
        Some(c) => c.clone(),
        None => t
            .headers
            .iter()
            .find(|h| h.as_str() != "t")
            .cloned()
            .ok_or_else(|| CliError::Config("input has no data column".into()))?,
    };
    let values = t.column(&column)?;
    let rate = match (b.sample_rate, t.optional_column("t")) {
        (Some(r), _) => r,
        (None, Some(times)) if times.len() >= 2 => 1.0 / (times[1] - times[0]),
        _ => return Err(CliError::Config("set psd.sample_rate or provide a `t` column".into())),
    };
    let series = TimeSeries::new(rate, values, column)?;
    let seg = b.segment_length.unwrap_or_else(|| default_segment_length(series.len()));
    let est = welch_psd(&series, seg, b.overlap, b.window)?;
    out.csv(
        "psd.csv",
        &["f", "density"],
        est.frequencies.iter().zip(&est.densities).map(|(f, d)| vec![*f, *d]),
    )
}

pub fn fit(cfg: &RunConfig, input: Option<&Path>, out: &mut OutputDir) -> Result<(), CliError> {
    let t = Table::read(&require_input(input, "fit")?)?;
    let eps = t.column("epsilon")?;
    let vm = t.column("var_minus")?;
    let vp = t.column("var_plus")?;
    let unc = t.optional_column("uncert");
    let points = (0..eps.len())
        .map(|k| SqueezingPoint {
            epsilon: eps[k],
            var_minus: vm[k],
            var_plus: vp[k],
            uncertainty: unc.as_ref().map(|u| u[k]).filter(|u| u.is_finite()),
        })
        .collect();
    let data = SqueezingDataset::new(points)?;
    let b = &cfg.fit;
    let opts = FitOptions {
        mode: b.mode,
        sigma_max: b.sigma_max,
        bootstrap_resamples: b.bootstrap_resamples,
        bootstrap_seed: cfg.rng_seed,
        ..FitOptions::default()
    };
    let r = fit_phase_noise_model_with(&data, b.omega_norm, &opts)?;
    out.json("fit.json", &r)
}

#[derive(Serialize)]
struct Fig4Summary<'a> {
    eta_injected: f64,
    sigma_injected: f64,
    omega_norm: f64,
    fit: &'a epr_core::estimation::FitResult,
    best_epsilon: f64,
    best_var_minus_db: f64,
}

pub fn reproduce(cfg: &RunConfig, figure: Figure, out: &mut OutputDir) -> Result<(), CliError> {
    let b = &cfg.reproduce;
    match figure {
        Figure::Fig3 => {
            let r = fig3(&cfg.system, &b.fig3, cfg.rng_seed)?;
            write_lock_run(
                out,
                &r.run,
                json!({ "sigma_theta_psd": r.sigma_theta_psd, "psd_segment": r.psd.segment_length }),
            )?;
            out.csv(
                "psd.csv",
                &["f", "density"],
                r.psd.frequencies.iter().zip(&r.psd.densities).map(|(f, d)| vec![*f, *d]),
            )
        }
        Figure::Fig4 => {
            let r = fig4(&cfg.system, &b.fig4, cfg.rng_seed)?;
            write_sweep(out, &r.sweep)?;
            out.csv(
                "fig4_points.csv",
                &["epsilon", "var_minus", "var_plus", "uncert"],
                r.points.iter().map(|p| vec![p.epsilon, p.var_minus, p.var_plus, p.uncertainty]),
            )?;
            let best = r
                .best_point()
                .ok_or_else(|| CliError::Config("fig4 produced no points".into()))?;
            out.json(
                "fit.json",
                &Fig4Summary {
                    eta_injected: r.eta_injected,
                    sigma_injected: r.sigma_injected,
                    omega_norm: r.omega_norm,
                    fit: &r.fit,
                    best_epsilon: best.epsilon,
                    best_var_minus_db: db(best.var_minus)?,
                },
            )
        }
        Figure::Fig5 => {
            let rows = fig5(&cfg.system, &b.fig5)?;
            write_spectra(out, &rows)
        }
    }
}
