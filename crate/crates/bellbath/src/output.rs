//! CSV artifacts. Every file starts with a header naming columns and units;
//! floats use the shortest round-trip representation so reruns are
//! byte-identical.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use bellbath_core::device::ResidualEntry;
use bellbath_core::experiments::{Crossing, Dynamics, MapResult, Spectrum};
use bellbath_core::observables::BellFidelities;
use bellbath_core::rates::{FitReport, RateModel};
use bellbath_core::units::MHZ;

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

fn write_rows(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<PathBuf> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(path.to_path_buf())
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        "NaN".into()
    }
}

pub fn write_spectrum(dir: &Path, s: &Spectrum) -> Result<Vec<PathBuf>> {
    let a = write_rows(
        &dir.join("spectrum.csv"),
        &["f_GHz", "transmission"],
        s.freqs
            .iter()
            .zip(&s.transmission)
            .map(|(f, t)| vec![num(*f), num(*t)]),
    )?;
    let b = write_rows(
        &dir.join("spectrum_peaks.csv"),
        &["f_GHz", "height", "fwhm_MHz"],
        s.peaks
            .iter()
            .map(|p| vec![num(p.freq), num(p.height), num(p.fwhm / MHZ)]),
    )?;
    Ok(vec![a, b])
}

pub fn write_crossing(dir: &Path, c: &Crossing) -> Result<Vec<PathBuf>> {
    let a = write_rows(
        &dir.join("crossing.csv"),
        &["omega_qB_GHz", "branch1_GHz", "branch2_GHz"],
        (0..c.omega_qb.len())
            .map(|i| vec![num(c.omega_qb[i]), num(c.branch1[i]), num(c.branch2[i])]),
    )?;
    let b = write_rows(
        &dir.join("crossing_summary.csv"),
        &["min_gap_MHz", "omega_qB_at_min_GHz"],
        [vec![num(c.min_gap / MHZ), num(c.min_gap_at)]],
    )?;
    Ok(vec![a, b])
}

fn fid_cols(f: &BellFidelities) -> [String; 4] {
    [num(f.s), num(f.t0), num(f.t_minus), num(f.t_plus)]
}

pub fn write_map(dir: &Path, m: &MapResult) -> Result<PathBuf> {
    let pts = m.grid.points();
    write_rows(
        &dir.join("map.csv"),
        &[
            "phi_rad",
            "omega_d_GHz",
            "F_S",
            "F_T0",
            "F_Tminus",
            "F_Tplus",
        ],
        pts.iter().zip(&m.values).map(|((p, w), v)| {
            let f = v
                .map(|f| fid_cols(&f))
                .unwrap_or_else(|| std::array::from_fn(|_| "NaN".to_string()));
            let mut r = vec![num(*p), num(*w)];
            r.extend(f);
            r
        }),
    )
}

pub fn write_dynamics(dir: &Path, d: &Dynamics) -> Result<PathBuf> {
    write_rows(
        &dir.join("dynamics.csv"),
        &["tau_us", "F_S", "F_T0", "F_Tminus", "F_Tplus"],
        d.times.iter().zip(&d.fidelities).map(|(t, f)| {
            let mut r = vec![num(*t)];
            r.extend(fid_cols(f));
            r
        }),
    )
}

/// Rates and standard errors in MHz (linear frequency units).
pub fn write_fit(dir: &Path, r: &FitReport) -> Result<PathBuf> {
    let v = r.model.to_array();
    let e = r.stderr;
    write_rows(
        &dir.join("fit.csv"),
        &["rate_name", "value_MHz", "stderr_MHz"],
        RateModel::NAMES
            .iter()
            .enumerate()
            .map(|(i, n)| vec![n.to_string(), num(v[i] / MHZ), num(e[i] / MHZ)]),
    )
}

pub fn write_calibration(dir: &Path, report: &[ResidualEntry]) -> Result<PathBuf> {
    write_rows(
        &dir.join("calibration.csv"),
        &["key", "value", "unit", "target", "residual"],
        report.iter().map(|e| {
            vec![
                e.key.clone(),
                num(e.value),
                e.unit.to_string(),
                e.target.map(num).unwrap_or_default(),
                e.residual.map(num).unwrap_or_default(),
            ]
        }),
    )
}

pub fn write_text(path: &Path, text: &str) -> Result<PathBuf> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path.to_path_buf())
}
