//! One function per subcommand. Each writes its artifacts under `out` and
//! returns the one-line summary printed by the binary.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bellbath_core::device::{
    build_hamiltonian, dispersive_params, hybridized_modes, residual_report, Branch, Calibration,
    DeviceParams, Frame, PublishedObservables, SystemOps, Target,
};
use bellbath_core::dressed::DressedPropagator;
use bellbath_core::experiments::{
    avoided_crossing, cooling_dynamics, fit_dynamics, transmission_spectrum, Dynamics,
    DynamicsOptions, MapOptions, MapResult, SweepGrid,
};
use bellbath_core::lindblad::{default_channels, steady_state};
use bellbath_core::observables::{bell_fidelities, qubit_reduce, Bell, BellFidelities};
use bellbath_core::rates::{fit_rates, FitData, FitOptions, FitReport, Populations, RateModel};
use bellbath_core::units::{to_mhz, MHZ};

use crate::config::Config;
use crate::output;
use crate::svg::{self, Series};
use crate::sweep::{run_map, worker_count};
use crate::validate::{run_suite, Check};

/// Largest Hilbert-space dimension solved with the dense superoperator.
pub const DENSE_STEADY_MAX_DIM: usize = 36;

/// Resolved device plus the settings of one invocation.
pub struct Session {
    pub cfg: Config,
    pub dev: DeviceParams,
    pub calibration: Option<Calibration>,
    pub out: PathBuf,
    pub svg: bool,
}

impl Session {
    pub fn new(cfg: Config, out: &Path, svg: bool) -> Result<Self> {
        cfg.validate()?;
        let (dev, calibration) = cfg.resolved_device()?;
        output::ensure_dir(out)?;
        Ok(Self {
            cfg,
            dev,
            calibration,
            out: out.to_path_buf(),
            svg,
        })
    }

    fn write_svg(&self, name: &str, body: String) -> Result<()> {
        if self.svg {
            output::write_text(&self.out.join(name), &body)?;
        }
        Ok(())
    }
}

pub fn spectrum(s: &Session) -> Result<String> {
    let d = &s.dev;
    let span = d.j + 5.0 * d.kappa_plus.max(d.kappa_minus) + 0.02;
    let sp = transmission_spectrum(d, d.omega_c - span, d.omega_c + span, s.cfg.spectrum_points)?;
    output::write_spectrum(&s.out, &sp)?;
    s.write_svg(
        "spectrum.svg",
        svg::line_plot(
            "Transmission",
            "f (GHz)",
            "|t|^2",
            &[Series {
                name: "A -> B",
                x: &sp.freqs,
                y: &sp.transmission,
            }],
        ),
    )?;
    let peaks: Vec<String> = sp
        .peaks
        .iter()
        .map(|p| format!("{:.6} GHz (FWHM {:.3} MHz)", p.freq, to_mhz(p.fwhm)))
        .collect();
    let split = if sp.peaks.len() == 2 {
        format!(
            ", splitting {:.2} MHz",
            to_mhz(sp.peaks[1].freq - sp.peaks[0].freq)
        )
    } else {
        String::new()
    };
    Ok(format!(
        "spectrum: {} peaks: {}{split}",
        sp.peaks.len(),
        peaks.join(", ")
    ))
}

pub fn crossing(s: &Session) -> Result<String> {
    let d = &s.dev;
    let c = avoided_crossing(
        d,
        d.omega_q_a - s.cfg.crossing_span,
        d.omega_q_a + s.cfg.crossing_span,
        s.cfg.crossing_points,
    )?;
    output::write_crossing(&s.out, &c)?;
    s.write_svg(
        "crossing.svg",
        svg::line_plot(
            "Qubit branches",
            "omega_qB (GHz)",
            "frequency (GHz)",
            &[
                Series {
                    name: "lower",
                    x: &c.omega_qb,
                    y: &c.branch1,
                },
                Series {
                    name: "upper",
                    x: &c.omega_qb,
                    y: &c.branch2,
                },
            ],
        ),
    )?;
    Ok(format!(
        "crossing: min gap {:.4} MHz at omega_qB = {:.6} GHz",
        to_mhz(c.min_gap),
        c.min_gap_at
    ))
}

pub fn map_grid(cfg: &Config) -> Result<SweepGrid> {
    let m = &cfg.map;
    Ok(SweepGrid::cooling_windows(
        m.phases,
        [m.center_plus, m.center_minus],
        m.points_per_window,
        m.red,
        m.blue,
    )?)
}

pub fn map_options(cfg: &Config) -> MapOptions {
    MapOptions {
        eps: cfg.map.eps,
        tau: cfg.map.tau,
        cutoff: cfg.simulation.cutoff,
    }
}

/// The map and the fraction of failed points.
pub fn compute_map(s: &Session) -> Result<MapResult> {
    let grid = map_grid(&s.cfg)?;
    run_map(
        &s.dev,
        &grid,
        s.cfg.map.n_max,
        &map_options(&s.cfg),
        worker_count(s.cfg.simulation.workers),
    )
}

pub fn map(s: &Session) -> Result<String> {
    let m = compute_map(s)?;
    output::write_map(&s.out, &m)?;
    if s.svg {
        let phis = m.grid.phis();
        for (w, name) in ["map_plus.svg", "map_minus.svg"].iter().enumerate() {
            let rows: Vec<Vec<f64>> = (0..phis.len()).map(|i| m.d_row(i, w).1).collect();
            let freqs = m.grid.omega_d[w].values();
            s.write_svg(
                name,
                svg::heatmap(
                    "F_S - F_T0",
                    "phi (rad)",
                    "omega_d (GHz)",
                    &phis,
                    &freqs,
                    &rows,
                ),
            )?;
        }
    }
    let n = m.values.len();
    let failed = m.failures();
    let line = format!(
        "map: {} x {} points, {} failed; D range [{:.3}, {:.3}]",
        m.grid.phis().len(),
        m.grid.frequencies().len(),
        failed,
        m.values
            .iter()
            .flatten()
            .map(|f| f.s - f.t0)
            .fold(f64::INFINITY, f64::min),
        m.values
            .iter()
            .flatten()
            .map(|f| f.s - f.t0)
            .fold(f64::NEG_INFINITY, f64::max),
    );
    if failed * 100 > n {
        bail!("{line} (more than 1% of points failed)");
    }
    Ok(line)
}

pub struct DynamicsRequest {
    pub target: Target,
    pub branch: Branch,
    pub phi: f64,
}

pub fn dynamics_times(cfg: &Config) -> Vec<f64> {
    let n = cfg.dynamics.points;
    (0..n)
        .map(|k| cfg.dynamics.tau * k as f64 / (n - 1) as f64)
        .collect()
}

pub fn compute_dynamics(s: &Session, r: &DynamicsRequest) -> Result<Dynamics> {
    let ops = SystemOps::new(s.cfg.simulation.n_max)?;
    let opts = DynamicsOptions {
        eps: s.cfg.dynamics.eps,
        pump_ratio: s.cfg.dynamics.pump_ratio,
        cutoff: s.cfg.simulation.cutoff,
        fit: true,
        initial: Bell::TMinus,
    };
    Ok(cooling_dynamics(
        &s.dev,
        r.target,
        r.phi,
        r.branch,
        &dynamics_times(&s.cfg),
        &ops,
        &opts,
    )?)
}

fn fit_summary(r: &FitReport) -> String {
    let m = r.model;
    format!(
        "gamma_p={:.4} gamma_p'={:.4} gamma_1={:.4} gamma_phi={:.4} MHz, R^2={:.4}",
        to_mhz(m.gamma_p),
        to_mhz(m.gamma_p_prime),
        to_mhz(m.gamma_1),
        to_mhz(m.gamma_phi),
        r.r_squared
    )
}

pub fn dynamics(s: &Session, r: &DynamicsRequest) -> Result<String> {
    let d = compute_dynamics(s, r)?;
    output::write_dynamics(&s.out, &d)?;
    let fit = match &d.fit {
        Some(Ok(f)) => {
            output::write_fit(&s.out, f)?;
            fit_summary(f)
        }
        Some(Err(e)) => format!("fit failed: {}", bellbath_core::Error::from(e.clone())),
        None => "no fit".into(),
    };
    if s.svg {
        let col = |b: Bell| d.fidelities.iter().map(|f| f.get(b)).collect::<Vec<f64>>();
        let ys: Vec<(Bell, Vec<f64>)> = Bell::ALL.iter().map(|&b| (b, col(b))).collect();
        let series: Vec<Series> = ys
            .iter()
            .map(|(b, y)| Series {
                name: b.name(),
                x: &d.times,
                y,
            })
            .collect();
        s.write_svg(
            "dynamics.svg",
            svg::line_plot("Bell fidelities", "tau (us)", "F", &series),
        )?;
    }
    let flag = if d.forbidden {
        " [symmetry-forbidden: pumping suppressed]"
    } else {
        ""
    };
    Ok(format!(
        "dynamics: {} via {} at phi={:.1} deg, eps={:.4} GHz, omega_d={:.6} GHz: steady F({})={:.3}{flag}; {fit}",
        r.target.name(),
        r.branch.name(),
        r.phi.to_degrees(),
        d.drive.eps_a,
        d.drive.omega_d,
        r.target.name(),
        d.steady_fidelity(),
    ))
}

/// Steady state at the configured drive; dense below
/// [`DENSE_STEADY_MAX_DIM`], dressed-basis partial-secular above.
pub fn compute_steady(s: &Session) -> Result<(BellFidelities, &'static str)> {
    let ops = SystemOps::new(s.cfg.simulation.n_max)?;
    let h = build_hamiltonian(&s.dev, &s.cfg.drive, Frame::DriveRotating, &ops)?.into_matrix();
    let ch = default_channels(&s.dev, &ops);
    let (rho, method) = if ops.dim() <= DENSE_STEADY_MAX_DIM {
        (steady_state(&h, &ch)?, "dense")
    } else {
        (
            DressedPropagator::new(&h, &ch, s.cfg.simulation.cutoff)?.steady_state()?,
            "dressed",
        )
    };
    Ok((bell_fidelities(&qubit_reduce(&rho)), method))
}

pub fn steady(s: &Session) -> Result<String> {
    let (f, method) = compute_steady(s)?;
    let p = s.out.join("steady.csv");
    let mut w = csv::Writer::from_path(&p).with_context(|| format!("opening {}", p.display()))?;
    w.write_record(["F_S", "F_T0", "F_Tminus", "F_Tplus", "method"])?;
    w.write_record([
        f.s.to_string(),
        f.t0.to_string(),
        f.t_minus.to_string(),
        f.t_plus.to_string(),
        method.to_string(),
    ])?;
    w.flush()?;
    Ok(format!(
        "steady ({method}) at omega_d={:.6} GHz, phi={:.1} deg: F_S={:.4} F_T0={:.4} F_T-={:.4} F_T+={:.4}",
        s.cfg.drive.omega_d,
        s.cfg.drive.phi().to_degrees(),
        f.s,
        f.t0,
        f.t_minus,
        f.t_plus
    ))
}

/// Read a dynamics CSV (`tau_us, F_S, F_T0, F_Tminus, F_Tplus`).
pub fn read_dynamics(path: &Path) -> Result<(Vec<f64>, Vec<BellFidelities>)> {
    let mut r =
        csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let mut times = Vec::new();
    let mut f = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let v: Vec<f64> = rec
            .iter()
            .map(|x| x.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .with_context(|| format!("{}: row {} is not numeric", path.display(), i + 2))?;
        if v.len() != 5 {
            bail!(
                "{}: row {} has {} columns, expected 5",
                path.display(),
                i + 2,
                v.len()
            );
        }
        times.push(v[0]);
        f.push(BellFidelities {
            s: v[1],
            t0: v[2],
            t_minus: v[3],
            t_plus: v[4],
        });
    }
    Ok((times, f))
}

pub fn fit(s: &Session, input: &Path, target: Target) -> Result<String> {
    let (times, f) = read_dynamics(input)?;
    let other = target.other().bell();
    let pops: Vec<Populations> = f
        .iter()
        .map(|v| Populations::from_array([v.t_minus, v.get(target.bell()), v.get(other), v.t_plus]))
        .collect();
    let g1 = s.dev.gamma_1;
    let init = RateModel {
        gamma_p: 5.0 * g1,
        gamma_p_prime: 0.1 * g1,
        gamma_1: g1,
        gamma_phi: 0.5 * s.dev.gamma_phi.max(1e-9),
    };
    let opts = FitOptions {
        initial_populations: pops[0],
        ..FitOptions::default()
    };
    let r = fit_rates(&times, &FitData::Populations(pops), &init, &opts)
        .map_err(bellbath_core::Error::from)?;
    output::write_fit(&s.out, &r)?;
    Ok(format!("fit ({}): {}", target.name(), fit_summary(&r)))
}

/// Re-fit a trajectory already in memory.
pub fn refit(d: &Dynamics, dev: &DeviceParams) -> Result<FitReport> {
    fit_dynamics(d, dev).map_err(|e| bellbath_core::Error::from(e).into())
}

pub fn calibrate(s: &Session) -> Result<String> {
    let report = match &s.calibration {
        Some(c) => c.report.clone(),
        None => residual_report(&s.dev, &PublishedObservables::default())?,
    };
    output::write_calibration(&s.out, &report)?;
    let mut cfg = s.cfg.clone();
    cfg.device = s.dev;
    cfg.simulation.calibrate = false;
    output::write_text(&s.out.join("calibrated.conf"), &cfg.render())?;
    let ops = SystemOps::new(s.cfg.simulation.n_max)?;
    let dp = dispersive_params(&s.dev, &bellbath_core::device::DriveParams::off(6.5), &ops)?;
    let m = hybridized_modes(&s.dev);
    Ok(format!(
        "calibrate: J={:.6} g={:.6} omega_q={:.6} GHz; modes {:.4}/{:.4} GHz; 2delta={:.3} MHz; chi+={:.3} chi-={:.3} MHz",
        s.dev.j,
        s.dev.g_a,
        s.dev.omega_q_a,
        m.omega_c_plus,
        m.omega_c_minus,
        2.0 * dp.delta / MHZ,
        to_mhz(dp.chi_plus),
        to_mhz(dp.chi_minus),
    ))
}

pub fn validate(s: &Session) -> Result<(Vec<Check>, String)> {
    let checks = run_suite(&s.dev, s.cfg.simulation.seed)?;
    let failed = checks.iter().filter(|c| !c.passed()).count();
    let p = s.out.join("validate.csv");
    let mut w = csv::Writer::from_path(&p).with_context(|| format!("opening {}", p.display()))?;
    w.write_record(["check", "value", "limit", "passed"])?;
    for c in &checks {
        w.write_record([
            c.name.to_string(),
            c.value.to_string(),
            c.limit.to_string(),
            c.passed().to_string(),
        ])?;
    }
    w.flush()?;
    let line = format!(
        "validate: {} of {} checks passed",
        checks.len() - failed,
        checks.len()
    );
    Ok((checks, line))
}
