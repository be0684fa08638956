use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Result};
use bellbath::commands::{self, DynamicsRequest, Session};
use bellbath::config::{parse_angle, Config};
use bellbath_core::device::{Branch, Target};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "bellbath",
    version,
    about = "Driven-dissipative Bell-state stabilization in two coupled cavities"
)]
struct Cli {
    /// Configuration file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Starting preset: default, reference or fine.
    #[arg(long, global = true, default_value = "default")]
    preset: String,
    /// Override a configuration key, e.g. `--set drive.phi=90deg`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory.
    #[arg(long, global = true, default_value = "results")]
    out: PathBuf,
    /// Also write SVG figures.
    #[arg(long, global = true)]
    svg: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetArg {
    S,
    T0,
}

#[derive(Clone, Copy, ValueEnum)]
enum BranchArg {
    Plus,
    Minus,
}

#[derive(Subcommand)]
enum Cmd {
    /// Transmission spectrum of the coupled cavities.
    Spectrum,
    /// Qubit-qubit avoided crossing versus qubit-B frequency.
    Crossing,
    /// Phase-frequency map of the steady Bell fidelities.
    Map,
    /// Time trace of the Bell fidelities from |gg>, with a rate-model fit.
    Dynamics {
        #[arg(long, value_enum)]
        target: TargetArg,
        /// Relative drive phase, e.g. `180deg` or `3.14159`.
        #[arg(long, default_value = "0")]
        phi: String,
        /// Hybridized mode used for cooling; defaults to the even-phase allowed one.
        #[arg(long, value_enum)]
        branch: Option<BranchArg>,
        /// Trace length in us (overrides `dynamics.tau`).
        #[arg(long)]
        tau: Option<f64>,
        /// Drive amplitude in GHz; by default chosen from `dynamics.pump_ratio`.
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Steady state at the configured drive.
    Steady,
    /// Fit the four-level rate model to a dynamics CSV.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "t0")]
        target: TargetArg,
    },
    /// Fit J, g and the qubit frequency to the reference spectroscopy.
    Calibrate,
    /// Numerical hygiene and analytic-oracle checks.
    Validate,
}

fn target(t: TargetArg) -> Target {
    match t {
        TargetArg::S => Target::S,
        TargetArg::T0 => Target::T0,
    }
}

fn load(cli: &Cli) -> Result<Config> {
    let mut cfg = Config::preset(&cli.preset)?;
    if let Some(p) = &cli.config {
        cfg.apply_str(
            &std::fs::read_to_string(p).map_err(|e| anyhow!("reading {}: {e}", p.display()))?,
        )?;
    }
    for o in &cli.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| anyhow!("--set expects KEY=VALUE, got `{o}`"))?;
        cfg.set(k.trim(), v.trim(), 0)?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<bool> {
    let mut cfg = load(&cli)?;
    if let Cmd::Dynamics { tau, eps, .. } = &cli.cmd {
        if let Some(t) = tau {
            cfg.dynamics.tau = *t;
        }
        if eps.is_some() {
            cfg.dynamics.eps = *eps;
        }
    }
    let s = Session::new(cfg, &cli.out, cli.svg)?;
    let (line, ok) = match &cli.cmd {
        Cmd::Spectrum => (commands::spectrum(&s)?, true),
        Cmd::Crossing => (commands::crossing(&s)?, true),
        Cmd::Map => (commands::map(&s)?, true),
        Cmd::Dynamics {
            target: t,
            phi,
            branch,
            ..
        } => {
            let t = target(*t);
            let branch = match branch {
                Some(BranchArg::Plus) => Branch::Plus,
                Some(BranchArg::Minus) => Branch::Minus,
                None => Branch::ALL
                    .into_iter()
                    .find(|&b| Target::allowed_even(b) == t)
                    .unwrap_or(Branch::Plus),
            };
            let phi = parse_angle(phi).map_err(|e| anyhow!("--phi: {e}"))?;
            (
                commands::dynamics(
                    &s,
                    &DynamicsRequest {
                        target: t,
                        branch,
                        phi,
                    },
                )?,
                true,
            )
        }
        Cmd::Steady => (commands::steady(&s)?, true),
        Cmd::Fit { input, target: t } => (commands::fit(&s, input, target(*t))?, true),
        Cmd::Calibrate => (commands::calibrate(&s)?, true),
        Cmd::Validate => {
            let (checks, line) = commands::validate(&s)?;
            for c in &checks {
                println!("{}", c.line());
            }
            let ok = checks.iter().all(|c| c.passed());
            (line, ok)
        }
    };
    println!("{line}");
    Ok(ok)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
