//! Parallel phase–frequency sweep. Points are evaluated independently on a
//! rayon pool and collected in grid order, so the result does not depend on
//! the worker count.

use anyhow::{Context, Result};
use bellbath_core::device::{DeviceParams, SystemOps};
use bellbath_core::experiments::{map_point, MapOptions, MapResult, SweepGrid};
use bellbath_core::lindblad::default_channels;
use bellbath_core::observables::BellFidelities;
use rayon::prelude::*;

/// Environment variable overriding the configured worker count.
pub const WORKERS_ENV: &str = "BELLBATH_WORKERS";

/// Worker count: the environment override, then the config, then all CPUs.
pub fn worker_count(configured: usize) -> usize {
    if let Some(n) = std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
    {
        if n > 0 {
            return n;
        }
    }
    if configured > 0 {
        configured
    } else {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    }
}

pub fn run_map(
    dev: &DeviceParams,
    grid: &SweepGrid,
    n_max: usize,
    opts: &MapOptions,
    workers: usize,
) -> Result<MapResult> {
    grid.validate()?;
    let ops = SystemOps::new(n_max)?;
    let ch = default_channels(dev, &ops);
    let pts = grid.points();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .context("building worker pool")?;
    let values: Vec<Option<BellFidelities>> = pool.install(|| {
        pts.par_iter()
            .map(|&(p, w)| map_point(dev, &ops, &ch, p, w, opts).ok())
            .collect()
    });
    Ok(MapResult {
        grid: grid.clone(),
        values,
    })
}

/// `F_S − F_T0` along one window at each of the given phases.
pub fn d_rows(
    dev: &DeviceParams,
    phis: &[f64],
    freqs: &[f64],
    n_max: usize,
    opts: &MapOptions,
    workers: usize,
) -> Result<Vec<Vec<f64>>> {
    let ops = SystemOps::new(n_max)?;
    let ch = default_channels(dev, &ops);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .context("building worker pool")?;
    let pts: Vec<(f64, f64)> = phis
        .iter()
        .flat_map(|&p| freqs.iter().map(move |&w| (p, w)))
        .collect();
    let d: Vec<f64> = pool.install(|| {
        pts.par_iter()
            .map(|&(p, w)| {
                map_point(dev, &ops, &ch, p, w, opts)
                    .map(|f| f.s - f.t0)
                    .unwrap_or(f64::NAN)
            })
            .collect()
    });
    Ok(d.chunks(freqs.len()).map(|c| c.to_vec()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use bellbath_core::experiments::Axis;

    #[test]
    fn result_is_independent_of_workers() {
        let dev = DeviceParams::default();
        let grid = SweepGrid {
            phi: Axis::periodic("phi", 0.0, std::f64::consts::TAU, 3).unwrap(),
            omega_d: vec![Axis::new("wd", 6.568, 6.574, 3).unwrap()],
        };
        let o = MapOptions {
            tau: 1.0,
            ..MapOptions::default()
        };
        let a = run_map(&dev, &grid, 1, &o, 1).unwrap();
        let b = run_map(&dev, &grid, 1, &o, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.failures(), 0);
        for v in a.values.iter().flatten() {
            assert!((v.sum() - 1.0).abs() < 1e-6);
        }
    }
}
