//! Flat `key = value` configuration with dotted keys.
//!
//! Frequencies, couplings and linewidths are in GHz, times in μs and angles
//! in radians (a `deg` or `rad` suffix is accepted). `#` starts a comment.

use std::fmt::Write as _;
use std::path::Path;

use bellbath_core::device::{
    calibrate, Calibration, CalibrationOptions, DeviceParams, DriveParams, PublishedObservables,
};
use bellbath_core::units::{lifetime_from_rate, rate_from_lifetime, MHZ};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value for `{key}`: {msg}")]
    Value {
        line: usize,
        key: String,
        msg: String,
    },
    #[error("unknown preset `{0}` (expected default, reference or fine)")]
    Preset(String),
    #[error("invalid configuration: {0}")]
    Invalid(#[from] bellbath_core::Error),
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub n_max: usize,
    /// Secular cutoff of the dressed propagator (GHz).
    pub cutoff: f64,
    /// RK4 step as a fraction of the inverse spectral bound.
    pub step_scale: f64,
    /// Worker threads; 0 picks the number of CPUs.
    pub workers: usize,
    /// Replace `J`, `g` and `ωq` by the fit to the published observables.
    pub calibrate: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapSettings {
    pub phases: usize,
    pub points_per_window: usize,
    /// Window extent to the red and blue of each band center (GHz).
    pub red: f64,
    pub blue: f64,
    pub center_plus: f64,
    pub center_minus: f64,
    pub eps: f64,
    pub tau: f64,
    pub n_max: usize,
    /// Drive amplitude used for the satellite search.
    pub satellite_eps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsSettings {
    pub tau: f64,
    pub points: usize,
    /// Estimated pump rate in units of `γ1` when `eps` is automatic.
    pub pump_ratio: f64,
    pub eps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub device: DeviceParams,
    pub drive: DriveParams,
    pub simulation: Simulation,
    pub map: MapSettings,
    pub dynamics: DynamicsSettings,
    pub spectrum_points: usize,
    pub crossing_points: usize,
    /// Half width of the qubit-B sweep (GHz).
    pub crossing_span: f64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            device: DeviceParams::default(),
            drive: DriveParams::balanced(6.572, 0.08, 0.0),
            simulation: Simulation {
                n_max: 3,
                cutoff: 0.01,
                step_scale: 0.05,
                workers: 0,
                calibrate: true,
                seed: 7,
            },
            map: MapSettings {
                phases: 48,
                points_per_window: 60,
                red: 9.5 * MHZ,
                blue: 5.25 * MHZ,
                center_plus: 6.572,
                center_minus: 6.713,
                eps: 0.08,
                tau: 10.0,
                n_max: 2,
                satellite_eps: 0.1,
            },
            dynamics: DynamicsSettings {
                tau: 50.0,
                points: 201,
                pump_ratio: 5.0,
                eps: None,
            },
            spectrum_points: 4001,
            crossing_points: 401,
            crossing_span: 0.02,
        }
    }
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if !v.is_finite() {
        return Err(format!("`{s}` is not finite"));
    }
    Ok(v)
}

/// Radians from `1.2`, `1.2rad` or `69deg`.
pub fn parse_angle(s: &str) -> Result<f64, String> {
    let s = s.trim();
    if let Some(d) = s.strip_suffix("deg") {
        Ok(parse_f64(d.trim())?.to_radians())
    } else if let Some(r) = s.strip_suffix("rad") {
        parse_f64(r.trim())
    } else {
        parse_f64(s)
    }
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("`{s}` is not a boolean")),
    }
}

fn parse_usize(s: &str) -> Result<usize, String> {
    s.parse()
        .map_err(|_| format!("`{s}` is not a non-negative integer"))
}

fn nonneg(v: f64) -> Result<f64, String> {
    if v < 0.0 {
        Err("must be >= 0".into())
    } else {
        Ok(v)
    }
}

fn positive(v: f64) -> Result<f64, String> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err("must be > 0".into())
    }
}

/// Every accepted key with its unit.
pub const KEYS: &[(&str, &str)] = &[
    ("device.omega_c", "GHz"),
    ("device.omega_q", "GHz"),
    ("device.omega_qA", "GHz"),
    ("device.omega_qB", "GHz"),
    ("device.g", "GHz"),
    ("device.g_A", "GHz"),
    ("device.g_B", "GHz"),
    ("device.J", "GHz"),
    ("device.kappa_plus", "GHz"),
    ("device.kappa_minus", "GHz"),
    ("device.kappa_in_A", "GHz"),
    ("device.kappa_in_B", "GHz"),
    ("device.kappa_out", "GHz"),
    ("device.T1", "us"),
    ("device.Tphi", "us"),
    ("drive.omega_d", "GHz"),
    ("drive.eps", "GHz"),
    ("drive.eps_A", "GHz"),
    ("drive.eps_B", "GHz"),
    ("drive.phi", "rad"),
    ("simulation.n_max", ""),
    ("simulation.cutoff", "GHz"),
    ("simulation.step_scale", ""),
    ("simulation.workers", ""),
    ("simulation.calibrate", ""),
    ("simulation.seed", ""),
    ("map.phases", ""),
    ("map.points_per_window", ""),
    ("map.red", "GHz"),
    ("map.blue", "GHz"),
    ("map.center_plus", "GHz"),
    ("map.center_minus", "GHz"),
    ("map.eps", "GHz"),
    ("map.tau", "us"),
    ("map.n_max", ""),
    ("map.satellite_eps", "GHz"),
    ("dynamics.tau", "us"),
    ("dynamics.points", ""),
    ("dynamics.pump_ratio", ""),
    ("dynamics.eps", "GHz"),
    ("spectrum.points", ""),
    ("crossing.points", ""),
    ("crossing.span", "GHz"),
];

impl Config {
    pub fn preset(name: &str) -> Result<Self, ConfigError> {
        let mut c = Self::default();
        match name {
            "default" => {}
            "reference" => {
                c.device = c.device.with_lifetimes(10.0, 60.0);
                c.dynamics.pump_ratio = 10.0;
            }
            "fine" => {
                c.map.phases = 96;
                c.map.points_per_window = 120;
            }
            other => return Err(ConfigError::Preset(other.into())),
        }
        Ok(c)
    }

    /// Set one key; `line` only labels errors.
    pub fn set(&mut self, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        let bad = |msg: String| ConfigError::Value {
            line,
            key: key.into(),
            msg,
        };
        let pos = || parse_f64(value).and_then(positive).map_err(bad);
        let nn = || parse_f64(value).and_then(nonneg).map_err(bad);
        let int = || parse_usize(value).map_err(bad);
        let d = &mut self.device;
        match key {
            "device.omega_c" => d.omega_c = pos()?,
            "device.omega_q" => {
                d.omega_q_a = pos()?;
                d.omega_q_b = d.omega_q_a;
            }
            "device.omega_qA" => d.omega_q_a = pos()?,
            "device.omega_qB" => d.omega_q_b = pos()?,
            "device.g" => {
                d.g_a = nn()?;
                d.g_b = d.g_a;
            }
            "device.g_A" => d.g_a = nn()?,
            "device.g_B" => d.g_b = nn()?,
            "device.J" => d.j = nn()?,
            "device.kappa_plus" => d.kappa_plus = nn()?,
            "device.kappa_minus" => d.kappa_minus = nn()?,
            "device.kappa_in_A" => d.kappa_in_a = nn()?,
            "device.kappa_in_B" => d.kappa_in_b = nn()?,
            "device.kappa_out" => d.kappa_out = nn()?,
            "device.T1" => d.gamma_1 = rate_from_lifetime(pos()?),
            "device.Tphi" => d.gamma_phi = rate_from_lifetime(pos()?),
            "drive.omega_d" => self.drive.omega_d = pos()?,
            "drive.eps" => {
                self.drive.eps_a = nn()?;
                self.drive.eps_b = self.drive.eps_a;
            }
            "drive.eps_A" => self.drive.eps_a = nn()?,
            "drive.eps_B" => self.drive.eps_b = nn()?,
            "drive.phi" => {
                self.drive.phi_a = 0.0;
                self.drive.phi_b = parse_angle(value).map_err(bad)?;
            }
            "simulation.n_max" => self.simulation.n_max = int()?,
            "simulation.cutoff" => self.simulation.cutoff = pos()?,
            "simulation.step_scale" => self.simulation.step_scale = pos()?,
            "simulation.workers" => self.simulation.workers = int()?,
            "simulation.calibrate" => self.simulation.calibrate = parse_bool(value).map_err(bad)?,
            "simulation.seed" => {
                self.simulation.seed = value.parse().map_err(|_| bad("not an integer".into()))?
            }
            "map.phases" => self.map.phases = int()?,
            "map.points_per_window" => self.map.points_per_window = int()?,
            "map.red" => self.map.red = nn()?,
            "map.blue" => self.map.blue = nn()?,
            "map.center_plus" => self.map.center_plus = pos()?,
            "map.center_minus" => self.map.center_minus = pos()?,
            "map.eps" => self.map.eps = nn()?,
            "map.tau" => self.map.tau = pos()?,
            "map.n_max" => self.map.n_max = int()?,
            "map.satellite_eps" => self.map.satellite_eps = nn()?,
            "dynamics.tau" => self.dynamics.tau = pos()?,
            "dynamics.points" => self.dynamics.points = int()?,
            "dynamics.pump_ratio" => self.dynamics.pump_ratio = pos()?,
            "dynamics.eps" => self.dynamics.eps = if value == "auto" { None } else { Some(nn()?) },
            "spectrum.points" => self.spectrum_points = int()?,
            "crossing.points" => self.crossing_points = int()?,
            "crossing.span" => self.crossing_span = pos()?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.into(),
                })
            }
        }
        Ok(())
    }

    /// Apply `key = value` lines on top of `self`.
    pub fn apply_str(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (k, v) = body.split_once('=').ok_or(ConfigError::Syntax { line })?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() || v.is_empty() {
                return Err(ConfigError::Syntax { line });
            }
            self.set(k, v, line)?;
        }
        Ok(())
    }

    pub fn parse_str(text: &str) -> Result<Self, ConfigError> {
        let mut c = Self::default();
        c.apply_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse_str(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.device.validate()?;
        self.drive.validate()?;
        let bad = |key: &str, msg: &str| ConfigError::Value {
            line: 0,
            key: key.into(),
            msg: msg.into(),
        };
        if self.simulation.n_max < 1 {
            return Err(bad("simulation.n_max", "must be >= 1"));
        }
        if self.map.n_max < 1 {
            return Err(bad("map.n_max", "must be >= 1"));
        }
        if self.map.phases < 2 || self.map.points_per_window < 2 {
            return Err(bad("map.phases", "map axes need >= 2 points"));
        }
        if self.map.red + self.map.blue <= 0.0 {
            return Err(bad("map.red", "window must have nonzero width"));
        }
        if self.dynamics.points < 2 {
            return Err(bad("dynamics.points", "must be >= 2"));
        }
        if self.spectrum_points < 3 || self.crossing_points < 3 {
            return Err(bad("spectrum.points", "sweeps need >= 3 points"));
        }
        Ok(())
    }

    /// Device after the optional calibration step.
    pub fn resolved_device(&self) -> Result<(DeviceParams, Option<Calibration>), ConfigError> {
        if !self.simulation.calibrate {
            return Ok((self.device, None));
        }
        let cal = calibrate(
            &PublishedObservables::default(),
            &self.device,
            &CalibrationOptions::default(),
        )?;
        Ok((cal.device, Some(cal)))
    }

    /// All keys with their current values, in the accepted format.
    pub fn render(&self) -> String {
        let d = &self.device;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("device.omega_c", d.omega_c.to_string());
        kv("device.omega_qA", d.omega_q_a.to_string());
        kv("device.omega_qB", d.omega_q_b.to_string());
        kv("device.g_A", d.g_a.to_string());
        kv("device.g_B", d.g_b.to_string());
        kv("device.J", d.j.to_string());
        kv("device.kappa_plus", d.kappa_plus.to_string());
        kv("device.kappa_minus", d.kappa_minus.to_string());
        kv("device.kappa_in_A", d.kappa_in_a.to_string());
        kv("device.kappa_in_B", d.kappa_in_b.to_string());
        kv("device.kappa_out", d.kappa_out.to_string());
        kv("device.T1", lifetime_from_rate(d.gamma_1).to_string());
        kv("device.Tphi", lifetime_from_rate(d.gamma_phi).to_string());
        kv("drive.omega_d", self.drive.omega_d.to_string());
        kv("drive.eps_A", self.drive.eps_a.to_string());
        kv("drive.eps_B", self.drive.eps_b.to_string());
        kv("drive.phi", format!("{}rad", self.drive.phi()));
        let sim = &self.simulation;
        kv("simulation.n_max", sim.n_max.to_string());
        kv("simulation.cutoff", sim.cutoff.to_string());
        kv("simulation.step_scale", sim.step_scale.to_string());
        kv("simulation.workers", sim.workers.to_string());
        kv("simulation.calibrate", sim.calibrate.to_string());
        kv("simulation.seed", sim.seed.to_string());
        let m = &self.map;
        kv("map.phases", m.phases.to_string());
        kv("map.points_per_window", m.points_per_window.to_string());
        kv("map.red", m.red.to_string());
        kv("map.blue", m.blue.to_string());
        kv("map.center_plus", m.center_plus.to_string());
        kv("map.center_minus", m.center_minus.to_string());
        kv("map.eps", m.eps.to_string());
        kv("map.tau", m.tau.to_string());
        kv("map.n_max", m.n_max.to_string());
        kv("map.satellite_eps", m.satellite_eps.to_string());
        let dy = &self.dynamics;
        kv("dynamics.tau", dy.tau.to_string());
        kv("dynamics.points", dy.points.to_string());
        kv("dynamics.pump_ratio", dy.pump_ratio.to_string());
        kv(
            "dynamics.eps",
            dy.eps.map_or("auto".into(), |e| e.to_string()),
        );
        kv("spectrum.points", self.spectrum_points.to_string());
        kv("crossing.points", self.crossing_points.to_string());
        kv("crossing.span", self.crossing_span.to_string());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use bellbath_core::device::hybridized_modes;

    #[test]
    fn empty_file_gives_published_device() {
        let c = Config::parse_str("").unwrap();
        assert_eq!(c.device.omega_c, 7.114);
        assert_eq!(c.device.omega_q_a, 6.2);
        assert_eq!(c.device.kappa_plus, 0.00065);
        assert_eq!(c.device.kappa_minus, 0.00082);
        assert!(c.simulation.calibrate);
    }

    #[test]
    fn negative_coupling_is_rejected() {
        let e = Config::parse_str("device.g_A = -0.1").unwrap_err();
        assert!(matches!(e, ConfigError::Value { line: 1, .. }), "{e}");
    }

    #[test]
    fn unknown_key_and_syntax_report_lines() {
        let e = Config::parse_str("# hi\n\ndevice.wc = 7").unwrap_err();
        assert!(matches!(e, ConfigError::UnknownKey { line: 3, .. }));
        let e = Config::parse_str("device.J 0.1").unwrap_err();
        assert!(matches!(e, ConfigError::Syntax { line: 1 }));
    }

    #[test]
    fn j_override_sets_hybrid_modes() {
        let c = Config::parse_str("device.J = 0.142 # GHz\nsimulation.calibrate = false").unwrap();
        let (dev, cal) = c.resolved_device().unwrap();
        assert!(cal.is_none());
        let m = hybridized_modes(&dev);
        assert!((m.omega_c_plus - 6.972).abs() < 1e-12);
        assert!((m.omega_c_minus - 7.256).abs() < 1e-12);
    }

    #[test]
    fn angles_take_suffixes() {
        assert!((parse_angle("180deg").unwrap() - std::f64::consts::PI).abs() < 1e-15);
        assert_eq!(parse_angle("0.5rad").unwrap(), 0.5);
        assert_eq!(parse_angle("0.5").unwrap(), 0.5);
        assert!(parse_angle("abc").is_err());
        let c = Config::parse_str("drive.phi = 90deg").unwrap();
        assert!((c.drive.phi() - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn render_round_trips() {
        let c = Config::preset("reference").unwrap();
        let back = Config::parse_str(&c.render()).unwrap();
        assert_eq!(back.render(), c.render());
        assert!(Config::preset("nope").is_err());
    }
}
