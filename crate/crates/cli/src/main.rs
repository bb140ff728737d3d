use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod error;
mod output;

use commands::Figure;
use error::CliError;
use output::{sha256_hex, ManifestInput, OutputDir};

#[derive(Parser, Debug)]
#[command(name = "epr", version, about = "Two-color EPR source: phase-lock simulation and squeezing analysis")]
struct Cli {
    /// JSON run configuration; missing fields take defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Dot-path override, e.g. `system.pump.epsilon=0.7`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// RNG seed; overrides `rng_seed` from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Lock-field amplitudes and phases.
    SteadyState,
    /// RK4 trajectory from rest.
    Integrate,
    /// Squeezing and anti-squeezing spectra over Ω'.
    Spectra,
    /// Phase-noise-degraded variances versus pump.
    Sweep,
    /// Inseparability sum at the configured operating point.
    DuanSimon,
    /// Closed-loop phase-lock simulation.
    LockSim,
    /// Synthetic homodyne photocurrents and shot reference.
    SynthEpr,
    /// Error-signal calibration from a fringe scan (`phase,signal`).
    Calibrate {
        #[arg(long)]
        input: PathBuf,
    },
    /// Welch PSD of a trace.
    Psd {
        #[arg(long)]
        input: PathBuf,
    },
    /// Fit η and σ_Θ to `epsilon,var_minus,var_plus,uncert`.
    Fit {
        #[arg(long)]
        input: PathBuf,
    },
    /// Canned end-to-end scenarios.
    Reproduce {
        #[arg(value_enum)]
        figure: FigureArg,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FigureArg {
    Fig3,
    Fig4,
    Fig5,
}

impl Command {
    fn name(&self) -> String {
        match self {
            Command::SteadyState => "steady-state".into(),
            Command::Integrate => "integrate".into(),
            Command::Spectra => "spectra".into(),
            Command::Sweep => "sweep".into(),
            Command::DuanSimon => "duan-simon".into(),
            Command::LockSim => "lock-sim".into(),
            Command::SynthEpr => "synth-epr".into(),
            Command::Calibrate { .. } => "calibrate".into(),
            Command::Psd { .. } => "psd".into(),
            Command::Fit { .. } => "fit".into(),
            Command::Reproduce { figure } => format!("reproduce {}", figure.to_possible_value().unwrap().get_name()),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = config::load(cli.config.as_deref(), &cli.overrides, cli.seed)?;
    let canonical = serde_json::to_vec(&cfg)?;
    let mut out = OutputDir::create(&cli.out)?;
    match &cli.command {
        Command::SteadyState => commands::steady_state(&cfg, &mut out)?,
        Command::Integrate => commands::integrate(&cfg, &mut out)?,
        Command::Spectra => commands::spectra(&cfg, &mut out)?,
        Command::Sweep => commands::sweep(&cfg, &mut out)?,
        Command::DuanSimon => commands::duan_simon_cmd(&cfg, &mut out)?,
        Command::LockSim => commands::lock_sim(&cfg, &mut out)?,
        Command::SynthEpr => commands::synth_epr(&cfg, &mut out)?,
        Command::Calibrate { input } => commands::calibrate(&cfg, Some(input), &mut out)?,
        Command::Psd { input } => commands::psd(&cfg, Some(input), &mut out)?,
        Command::Fit { input } => commands::fit(&cfg, Some(input), &mut out)?,
        Command::Reproduce { figure } => {
            let f = match figure {
                FigureArg::Fig3 => Figure::Fig3,
                FigureArg::Fig4 => Figure::Fig4,
                FigureArg::Fig5 => Figure::Fig5,
            };
            commands::reproduce(&cfg, f, &mut out)?
        }
    }
    out.finish(ManifestInput {
        subcommand: cli.command.name(),
        config_sha256: sha256_hex(&canonical),
        rng_seed: cfg.rng_seed,
    })?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
