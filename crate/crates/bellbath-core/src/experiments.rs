//! Scripted reproductions of the device experiments: transmission spectrum,
//! avoided crossing, phase–frequency map, cooling dynamics and the parity
//! selection rule.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;

use crate::device::{
    build_hamiltonian, dispersive_params, drive_frequencies, eigh, single_excitation_block, Branch,
    DeviceParams, DriveParams, Frame, SystemOps, Target,
};
use crate::dressed::{bell_labels, DressedPropagator, DEFAULT_CUTOFF};
use crate::lindblad::{cavity_channels, default_channels, odd_parity_phase, CollapseChannel};
use crate::observables::{bell_fidelities, qubit_reduce, Bell, BellFidelities};
use crate::rates::{fit_rates, FitData, FitError, FitOptions, FitReport, Populations, RateModel};
use crate::units::MHZ;
use crate::{CMat, Error, Result, C64};

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Golden-section minimum of `f` on `[a, b]`.
pub fn golden_min<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Coarse scan followed by golden-section refinement around the best sample.
fn scan_min<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    samples: usize,
    tol: f64,
) -> (f64, f64) {
    let step = (hi - lo) / (samples - 1) as f64;
    let mut best = (lo, f64::INFINITY);
    for k in 0..samples {
        let x = lo + step * k as f64;
        let v = f(x);
        if v < best.1 {
            best = (x, v);
        }
    }
    golden_min(f, (best.0 - step).max(lo), (best.0 + step).min(hi), tol)
}

/// One sweep axis with `points ≥ 2` evenly spaced samples, endpoints included
/// unless `periodic`, in which case `max` is excluded.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub points: usize,
    pub periodic: bool,
}

impl Axis {
    pub fn new(name: &str, min: f64, max: f64, points: usize) -> Result<Self> {
        let a = Self {
            name: name.into(),
            min,
            max,
            points,
            periodic: false,
        };
        a.validate()?;
        Ok(a)
    }

    pub fn periodic(name: &str, min: f64, max: f64, points: usize) -> Result<Self> {
        let a = Self {
            name: name.into(),
            min,
            max,
            points,
            periodic: true,
        };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points < 2 {
            return Err(Error::InvalidParameter(format!(
                "axis {} needs >= 2 points",
                self.name
            )));
        }
        if !(self.min < self.max) || !self.min.is_finite() || !self.max.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "axis {} needs min < max",
                self.name
            )));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let div = if self.periodic {
            self.points
        } else {
            self.points - 1
        } as f64;
        (0..self.points)
            .map(|k| self.min + (self.max - self.min) * k as f64 / div)
            .collect()
    }
}

/// Phase axis and one or more drive-frequency windows sharing the map.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub phi: Axis,
    pub omega_d: Vec<Axis>,
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        self.phi.validate()?;
        if self.omega_d.is_empty() {
            return Err(Error::InvalidParameter(
                "grid needs a frequency axis".into(),
            ));
        }
        for a in &self.omega_d {
            a.validate()?;
        }
        Ok(())
    }

    pub fn phis(&self) -> Vec<f64> {
        self.phi.values()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.omega_d.iter().flat_map(|a| a.values()).collect()
    }

    /// Grid points in row-major `(φ, ωd)` order.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let f = self.frequencies();
        self.phis()
            .into_iter()
            .flat_map(|p| f.iter().map(move |&w| (p, w)))
            .collect()
    }

    /// `phases` periodic phases and, per branch, `per_window` frequencies in
    /// steps of `step` from `center − red` to `center + blue`.
    pub fn cooling_windows(
        phases: usize,
        centers: [f64; 2],
        per_window: usize,
        red: f64,
        blue: f64,
    ) -> Result<Self> {
        let phi = Axis::periodic("phi_rad", 0.0, 2.0 * PI, phases)?;
        let omega_d = vec![
            Axis::new(
                "omega_d_plus",
                centers[0] - red,
                centers[0] + blue,
                per_window,
            )?,
            Axis::new(
                "omega_d_minus",
                centers[1] - red,
                centers[1] + blue,
                per_window,
            )?,
        ];
        Ok(Self { phi, omega_d })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapResult {
    pub grid: SweepGrid,
    /// Row-major over `(φ, ωd)`; `None` where the point failed.
    pub values: Vec<Option<BellFidelities>>,
}

impl MapResult {
    pub fn failures(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    /// `F_S − F_T0` along one frequency window at phase index `i`.
    pub fn d_row(&self, i: usize, window: usize) -> (Vec<f64>, Vec<f64>) {
        let nf: usize = self.grid.omega_d.iter().map(|a| a.points).sum();
        let offset: usize = self.grid.omega_d[..window].iter().map(|a| a.points).sum();
        let freqs = self.grid.omega_d[window].values();
        let d = (0..freqs.len())
            .map(|k| {
                self.values[i * nf + offset + k]
                    .map(|f| f.s - f.t0)
                    .unwrap_or(0.0)
            })
            .collect();
        (freqs, d)
    }

    pub fn nearest_phase(&self, phi: f64) -> usize {
        let phis = self.grid.phis();
        let wrap = |x: f64| {
            let r = wrap_phase(x - phi);
            r.min(2.0 * PI - r)
        };
        (0..phis.len())
            .min_by(|&a, &b| wrap(phis[a]).partial_cmp(&wrap(phis[b])).unwrap())
            .unwrap()
    }
}

/// A resolved spectral peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub freq: f64,
    pub height: f64,
    pub fwhm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub freqs: Vec<f64>,
    pub transmission: Vec<f64>,
    pub peaks: Vec<Peak>,
}

/// Power transmission `|t(ω)|²` from the port on cavity A to the port on
/// cavity B of the two hopping-coupled damped cavities, with the damping
/// diagonal in the hybridized basis.
pub fn transmission(dev: &DeviceParams, f: f64) -> f64 {
    let (kp, km) = (dev.kappa_plus, dev.kappa_minus);
    let half = |x: f64| C64::new(0.5 * x, 0.0);
    // i(M − ω) + Γ/2 with Γ = U diag(κ+, κ−) U†.
    let diag = C64::new(0.0, dev.omega_c - f) + half(0.5 * (kp + km));
    let off = C64::new(0.0, -dev.j) + half(0.5 * (kp - km));
    let det = diag * diag - off * off;
    let g_ba = -off / det;
    (dev.kappa_in_a * dev.kappa_out) * g_ba.norm_sqr()
}

pub fn transmission_spectrum(
    dev: &DeviceParams,
    f_min: f64,
    f_max: f64,
    points: usize,
) -> Result<Spectrum> {
    dev.validate()?;
    let axis = Axis::new("f_GHz", f_min, f_max, points)?;
    let freqs = axis.values();
    let transmission_v: Vec<f64> = freqs.iter().map(|&f| transmission(dev, f)).collect();
    let mut peaks = Vec::new();
    let step = freqs[1] - freqs[0];
    for k in 1..points - 1 {
        let (a, b, c) = (
            transmission_v[k - 1],
            transmission_v[k],
            transmission_v[k + 1],
        );
        if b > a && b >= c {
            let (x, neg) = golden_min(
                |f| -transmission(dev, f),
                freqs[k] - step,
                freqs[k] + step,
                1e-12,
            );
            let h = -neg;
            let half = 0.5 * h;
            let cross = |dir: f64| {
                let mut lo = x;
                let mut hi = x + dir * step;
                while transmission(dev, hi) > half && (hi - x).abs() < (f_max - f_min) {
                    lo = hi;
                    hi = x + 2.0 * (hi - x);
                }
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if transmission(dev, mid) > half {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            };
            let fwhm = cross(1.0) - cross(-1.0);
            peaks.push(Peak {
                freq: x,
                height: h,
                fwhm,
            });
        }
    }
    Ok(Spectrum {
        freqs,
        transmission: transmission_v,
        peaks,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Crossing {
    pub omega_qb: Vec<f64>,
    pub branch1: Vec<f64>,
    pub branch2: Vec<f64>,
    pub min_gap: f64,
    pub min_gap_at: f64,
}

/// Two qubit-like single-excitation eigenfrequencies (lower first).
pub fn qubit_branches(dev: &DeviceParams) -> [f64; 2] {
    let (vals, vecs) = eigh(&single_excitation_block(dev));
    let mut w: Vec<(usize, f64)> = (0..4)
        .map(|k| (k, vecs[(2, k)].norm_sqr() + vecs[(3, k)].norm_sqr()))
        .collect();
    w.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    let (a, b) = (vals[w[0].0], vals[w[1].0]);
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

/// Sweep qubit B through qubit A and record both branches and the minimum gap.
pub fn avoided_crossing(
    dev: &DeviceParams,
    qb_min: f64,
    qb_max: f64,
    points: usize,
) -> Result<Crossing> {
    dev.validate()?;
    let axis = Axis::new("omega_qB_GHz", qb_min, qb_max, points)?;
    let omega_qb = axis.values();
    let mut branch1 = Vec::with_capacity(points);
    let mut branch2 = Vec::with_capacity(points);
    for &w in &omega_qb {
        let b = qubit_branches(&DeviceParams {
            omega_q_b: w,
            ..*dev
        });
        branch1.push(b[0]);
        branch2.push(b[1]);
    }
    let gap = |w: f64| {
        let b = qubit_branches(&DeviceParams {
            omega_q_b: w,
            ..*dev
        });
        b[1] - b[0]
    };
    let (at, g) = scan_min(gap, qb_min, qb_max, points.max(3), 1e-10);
    Ok(Crossing {
        omega_qb,
        branch1,
        branch2,
        min_gap: g,
        min_gap_at: at,
    })
}

/// Splitting of the drive-dressed pair formed by `|0,0,T−⟩` and `|1±, target⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpCoupling {
    pub omega_d: f64,
    /// Half the splitting of the two dressed states (GHz).
    pub g_eff: f64,
}

pub fn pump_coupling(
    dev: &DeviceParams,
    drv: &DriveParams,
    ops: &SystemOps,
    branch: Branch,
    target: Target,
) -> Result<f64> {
    let h = build_hamiltonian(dev, drv, Frame::DriveRotating, ops)?.into_matrix();
    let (vals, vecs) = eigh(&h);
    let g0 = ops.hybrid_state(0, 0, Bell::TMinus);
    let t = match branch {
        Branch::Plus => ops.hybrid_state(1, 0, target.bell()),
        Branch::Minus => ops.hybrid_state(0, 1, target.bell()),
    };
    let a = vecs.adjoint() * g0;
    let b = vecs.adjoint() * t;
    let mut w: Vec<(usize, f64)> = (0..vals.len())
        .map(|k| (k, a[k].norm_sqr() + b[k].norm_sqr()))
        .collect();
    w.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap());
    Ok(0.5 * (vals[w[0].0] - vals[w[1].0]).abs())
}

/// Cooling-condition drive frequency at the given drive power, iterated so that the
/// Stark shift is evaluated at the frequency it produces.
pub fn cooling_frequency(
    dev: &DeviceParams,
    eps: f64,
    phi: f64,
    branch: Branch,
    target: Target,
    ops: &SystemOps,
) -> Result<f64> {
    let mut wd = drive_frequencies(
        &dispersive_params(dev, &DriveParams::off(6.5), ops)?,
        target,
        branch,
    );
    if eps == 0.0 {
        return Ok(wd);
    }
    for _ in 0..4 {
        let dp = dispersive_params(dev, &DriveParams::balanced(wd, eps, phi), ops)?;
        wd = drive_frequencies(&dp, target, branch);
    }
    Ok(wd)
}

/// Drive frequency that minimizes the pump splitting, searched within
/// `±half_width` of `center`.
pub fn locate_resonance(
    dev: &DeviceParams,
    eps: f64,
    phi: f64,
    branch: Branch,
    target: Target,
    ops: &SystemOps,
    center: f64,
    half_width: f64,
) -> Result<PumpCoupling> {
    let mut err = None;
    let (wd, g) = scan_min(
        |w| match pump_coupling(
            dev,
            &DriveParams::balanced(w, eps, phi),
            ops,
            branch,
            target,
        ) {
            Ok(v) => v,
            Err(e) => {
                err = Some(e);
                f64::INFINITY
            }
        },
        center - half_width,
        center + half_width,
        25,
        1e-9,
    );
    if let Some(e) = err {
        return Err(e);
    }
    Ok(PumpCoupling {
        omega_d: wd,
        g_eff: g,
    })
}

/// Resonant pump rate `4 g_eff² / κ±` (linear GHz) from the pump splitting.
pub fn pump_rate_estimate(dev: &DeviceParams, g_eff: f64, branch: Branch) -> f64 {
    4.0 * g_eff * g_eff / dev.kappa(branch)
}

/// Half width of the resonance search around the cooling-condition frequency (GHz).
pub const RESONANCE_WINDOW: f64 = 3.0 * MHZ;

/// Resonant drive for `target` via `branch` at amplitude `eps`.
pub fn resonant_drive(
    dev: &DeviceParams,
    eps: f64,
    phi: f64,
    branch: Branch,
    target: Target,
    ops: &SystemOps,
) -> Result<(DriveParams, f64)> {
    let center = cooling_frequency(dev, eps, phi, branch, target, ops)?;
    let r = locate_resonance(dev, eps, phi, branch, target, ops, center, RESONANCE_WINDOW)?;
    Ok((
        DriveParams::balanced(r.omega_d, eps, phi),
        pump_rate_estimate(dev, r.g_eff, branch),
    ))
}

/// Amplitude at which `rate(ε)` reaches `goal`: Illinois regula falsi on
/// `ln rate` against `ln ε`, where the rate is close to a power law.
fn solve_eps<F: FnMut(f64) -> Result<f64>>(
    mut rate: F,
    goal: f64,
    lo: f64,
    hi: f64,
) -> Result<f64> {
    let mut f = |x: f64| -> Result<f64> { Ok((rate(x.exp())?.max(1e-300) / goal).ln()) };
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let (mut fa, mut fb) = (f(a)?, f(b)?);
    if fa > 0.0 || fb < 0.0 {
        return Err(Error::NoRoot(format!(
            "pump rate {goal:e} GHz not bracketed by eps in [{lo}, {hi}]"
        )));
    }
    let mut side = 0;
    for _ in 0..60 {
        let x = (a * fb - b * fa) / (fb - fa);
        let fx = f(x)?;
        if fx.abs() < 1e-3 {
            return Ok(x.exp());
        }
        if fx < 0.0 {
            a = x;
            fa = fx;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = x;
            fb = fx;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
        if b - a < 1e-4 {
            break;
        }
    }
    Ok((0.5 * (a + b)).exp())
}

/// Amplitude giving the estimated pump rate `ratio · γ1` for one target.
pub fn eps_for_pump(
    dev: &DeviceParams,
    phi: f64,
    branch: Branch,
    target: Target,
    ratio: f64,
    ops: &SystemOps,
) -> Result<f64> {
    solve_eps(
        |e| Ok(resonant_drive(dev, e, phi, branch, target, ops)?.1),
        ratio * dev.gamma_1,
        0.002,
        0.4,
    )
}

/// Evolution from `|0,0⟩ ⊗ initial` in the drive frame with the dressed propagator.
pub fn qubit_trajectory(
    dev: &DeviceParams,
    drv: &DriveParams,
    ops: &SystemOps,
    channels: &[CollapseChannel],
    initial: Bell,
    times: &[f64],
    cutoff: f64,
) -> Result<Vec<BellFidelities>> {
    let h = build_hamiltonian(dev, drv, Frame::DriveRotating, ops)?.into_matrix();
    let p = DressedPropagator::new(&h, channels, cutoff)?;
    let psi = ops.hybrid_state(0, 0, initial);
    let rho0 = &psi * psi.adjoint();
    Ok(p.evolve(&rho0, times)?
        .iter()
        .map(|r| bell_fidelities(&qubit_reduce(r)))
        .collect())
}

/// Map settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapOptions {
    pub eps: f64,
    pub tau: f64,
    pub cutoff: f64,
}

impl Default for MapOptions {
    fn default() -> Self {
        Self {
            eps: 0.08,
            tau: 10.0,
            cutoff: DEFAULT_CUTOFF,
        }
    }
}

/// Bell fidelities after driving for `τ` at one `(φ, ωd)` point.
pub fn map_point(
    dev: &DeviceParams,
    ops: &SystemOps,
    channels: &[CollapseChannel],
    phi: f64,
    omega_d: f64,
    opts: &MapOptions,
) -> Result<BellFidelities> {
    let drv = DriveParams::balanced(omega_d, opts.eps, phi);
    let f = qubit_trajectory(
        dev,
        &drv,
        ops,
        channels,
        Bell::TMinus,
        &[opts.tau],
        opts.cutoff,
    )?;
    Ok(f[0])
}

/// Sequential phase–frequency map.
pub fn phase_frequency_map(
    dev: &DeviceParams,
    grid: &SweepGrid,
    n_max: usize,
    opts: &MapOptions,
) -> Result<MapResult> {
    grid.validate()?;
    let ops = SystemOps::new(n_max)?;
    let ch = default_channels(dev, &ops);
    let values = grid
        .points()
        .iter()
        .map(|&(p, w)| map_point(dev, &ops, &ch, p, w, opts).ok())
        .collect();
    Ok(MapResult {
        grid: grid.clone(),
        values,
    })
}

/// Whether pumping into `target` through `branch` is parity-forbidden at `φ`.
pub fn is_forbidden(
    dev: &DeviceParams,
    omega_d: f64,
    phi: f64,
    branch: Branch,
    target: Target,
) -> bool {
    let tol = 1e-3;
    let p = wrap_phase(phi);
    let even = p < tol || (p - PI).abs() < tol || (2.0 * PI - p) < tol;
    if even {
        return target != Target::allowed_even(branch);
    }
    match odd_parity_phase(dev, omega_d, 1.0, 1.0) {
        Ok(r) if r.iter().any(|x| (x - p).abs() < tol) => target == Target::allowed_even(branch),
        _ => false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsOptions {
    /// Drive amplitude; `None` picks the amplitude with estimated pump rate
    /// `pump_ratio · γ1`.
    pub eps: Option<f64>,
    pub pump_ratio: f64,
    pub cutoff: f64,
    /// Also fit the four-level rate model.
    pub fit: bool,
    /// Qubit state at `τ = 0`, with both cavities empty.
    pub initial: Bell,
}

impl Default for DynamicsOptions {
    fn default() -> Self {
        Self {
            eps: None,
            pump_ratio: 5.0,
            cutoff: DEFAULT_CUTOFF,
            fit: true,
            initial: Bell::TMinus,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dynamics {
    pub drive: DriveParams,
    pub target: Target,
    pub branch: Branch,
    pub times: Vec<f64>,
    pub fidelities: Vec<BellFidelities>,
    /// Mean over the final 10% of the window.
    pub steady: BellFidelities,
    pub pump_rate_estimate: f64,
    pub forbidden: bool,
    pub fit: Option<core::result::Result<FitReport, FitError>>,
}

impl Dynamics {
    pub fn steady_fidelity(&self) -> f64 {
        self.steady.get(self.target.bell())
    }

    /// `(T−, target, other, T+)` populations per time.
    pub fn populations(&self) -> Vec<Populations> {
        let other = self.target.other().bell();
        self.fidelities
            .iter()
            .map(|f| {
                Populations::from_array([
                    f.t_minus,
                    f.get(self.target.bell()),
                    f.get(other),
                    f.t_plus,
                ])
            })
            .collect()
    }
}

/// Mean over the final 10% of the time window.
pub fn late_average(times: &[f64], f: &[BellFidelities]) -> BellFidelities {
    let t_end = times[times.len() - 1];
    let t0 = times[0] + 0.9 * (t_end - times[0]);
    let sel: Vec<&BellFidelities> = times
        .iter()
        .zip(f)
        .filter(|(t, _)| **t >= t0 - 1e-12)
        .map(|(_, v)| v)
        .collect();
    let n = sel.len() as f64;
    BellFidelities {
        s: sel.iter().map(|v| v.s).sum::<f64>() / n,
        t0: sel.iter().map(|v| v.t0).sum::<f64>() / n,
        t_minus: sel.iter().map(|v| v.t_minus).sum::<f64>() / n,
        t_plus: sel.iter().map(|v| v.t_plus).sum::<f64>() / n,
    }
}

/// Cooling trajectory into `target` via `branch` at phase `φ`.
pub fn cooling_dynamics(
    dev: &DeviceParams,
    target: Target,
    phi: f64,
    branch: Branch,
    times: &[f64],
    ops: &SystemOps,
    opts: &DynamicsOptions,
) -> Result<Dynamics> {
    if times.len() < 2 {
        return Err(Error::InvalidParameter(
            "dynamics needs at least two times".into(),
        ));
    }
    let center = cooling_frequency(dev, 0.0, phi, branch, target, ops)?;
    let forbidden = is_forbidden(dev, center, phi, branch, target);
    // A forbidden target has no pump splitting to locate; it borrows the
    // allowed target's amplitude and sits at its cooling-condition frequency.
    let eps = match opts.eps {
        Some(e) => e,
        None if forbidden => eps_for_pump(dev, phi, branch, target.other(), opts.pump_ratio, ops)?,
        None => eps_for_pump(dev, phi, branch, target, opts.pump_ratio, ops)?,
    };
    let (drive, rate) = if eps == 0.0 || forbidden {
        let wd = cooling_frequency(dev, eps, phi, branch, target, ops)?;
        let drv = DriveParams::balanced(wd, eps, phi);
        let g = if eps == 0.0 {
            0.0
        } else {
            pump_coupling(dev, &drv, ops, branch, target)?
        };
        (drv, pump_rate_estimate(dev, g, branch))
    } else {
        resonant_drive(dev, eps, phi, branch, target, ops)?
    };
    let ch = default_channels(dev, ops);
    let fidelities = qubit_trajectory(dev, &drive, ops, &ch, opts.initial, times, opts.cutoff)?;
    let steady = late_average(times, &fidelities);
    let mut out = Dynamics {
        drive,
        target,
        branch,
        times: times.to_vec(),
        fidelities,
        steady,
        pump_rate_estimate: rate,
        forbidden,
        fit: None,
    };
    if opts.fit {
        out.fit = Some(fit_dynamics(&out, dev));
    }
    Ok(out)
}

/// Joint fit of all four populations, seeded with the device rates.
pub fn fit_dynamics(d: &Dynamics, dev: &DeviceParams) -> core::result::Result<FitReport, FitError> {
    let init = RateModel {
        gamma_p: d.pump_rate_estimate.max(dev.gamma_1),
        gamma_p_prime: 0.1 * dev.gamma_1,
        gamma_1: dev.gamma_1.max(1e-9),
        gamma_phi: (0.5 * dev.gamma_phi).max(1e-9),
    };
    let start = d.populations()[0];
    let opts = FitOptions {
        initial_populations: start,
        ..FitOptions::default()
    };
    fit_rates(
        &d.times,
        &FitData::Populations(d.populations()),
        &init,
        &opts,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionRatio {
    pub ratio: f64,
    pub slope_forbidden: f64,
    pub slope_allowed: f64,
    pub eps: f64,
    pub omega_d_s: f64,
    pub omega_d_t0: f64,
}

/// Settings of the weak-drive slope measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionOptions {
    /// Larger of the two estimated pump rates, in units of `γ1`.
    pub pump_fraction: f64,
    pub t1: f64,
    pub t2: f64,
    pub cutoff: f64,
}

impl Default for SelectionOptions {
    fn default() -> Self {
        Self {
            pump_fraction: 0.2,
            t1: 1.0,
            t2: 3.0,
            cutoff: DEFAULT_CUTOFF,
        }
    }
}

/// Growth rate of the population in eigenstates labelled `target`, with
/// only the cavity channels active.
fn labelled_slope(
    dev: &DeviceParams,
    drv: &DriveParams,
    target: Target,
    ops: &SystemOps,
    o: &SelectionOptions,
) -> Result<f64> {
    let h = build_hamiltonian(dev, drv, Frame::DriveRotating, ops)?.into_matrix();
    let p = DressedPropagator::new(&h, &cavity_channels(dev, ops), o.cutoff)?;
    let labels = bell_labels(p.eigenvectors());
    let n = ops.dim();
    let mut rho0 = CMat::zeros(n, n);
    rho0[(0, 0)] = C64::new(1.0, 0.0);
    let states = p.evolve(&rho0, &[o.t1, o.t2])?;
    let pop = |r: &CMat| -> f64 {
        p.populations(r)
            .iter()
            .zip(&labels)
            .filter(|(_, l)| **l == target.bell())
            .map(|(v, _)| v)
            .sum()
    };
    Ok((pop(&states[1]) - pop(&states[0])) / (o.t2 - o.t1))
}

/// Ratio of pump slopes into the parity-forbidden and allowed targets (the
/// labels follow the even-phase rule: `S` is forbidden via the plus mode,
/// `T0` via the minus mode). Each target is driven at its cooling-condition frequency
/// with an amplitude whose larger estimated pump rate is
/// `pump_fraction · γ1`; qubit relaxation and dephasing are switched off.
pub fn selection_rule_ratio(
    dev: &DeviceParams,
    phi: f64,
    branch: Branch,
    ops: &SystemOps,
    o: &SelectionOptions,
) -> Result<SelectionRatio> {
    let goal = o.pump_fraction * dev.gamma_1;
    let rate = |e: f64| -> Result<f64> {
        let a = resonant_drive(dev, e, phi, branch, Target::S, ops)?.1;
        let b = resonant_drive(dev, e, phi, branch, Target::T0, ops)?.1;
        Ok(a.max(b))
    };
    let eps = solve_eps(rate, goal, 0.001, 0.4)?;
    let w_s = cooling_frequency(dev, eps, phi, branch, Target::S, ops)?;
    let w_t0 = cooling_frequency(dev, eps, phi, branch, Target::T0, ops)?;
    let s_s = labelled_slope(
        dev,
        &DriveParams::balanced(w_s, eps, phi),
        Target::S,
        ops,
        o,
    )?;
    let s_t0 = labelled_slope(
        dev,
        &DriveParams::balanced(w_t0, eps, phi),
        Target::T0,
        ops,
        o,
    )?;
    let allowed = Target::allowed_even(branch);
    let (forb, allw) = if allowed == Target::T0 {
        (s_s, s_t0)
    } else {
        (s_t0, s_s)
    };
    Ok(SelectionRatio {
        ratio: forb / allw,
        slope_forbidden: forb,
        slope_allowed: allw,
        eps,
        omega_d_s: w_s,
        omega_d_t0: w_t0,
    })
}

/// Local extremum of a sampled curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremum {
    pub index: usize,
    pub freq: f64,
    pub value: f64,
}

/// Local maxima of `|d|` above `min_abs`; plateaus report their first sample.
pub fn extrema(freqs: &[f64], d: &[f64], min_abs: f64) -> Vec<Extremum> {
    let n = d.len();
    let mut out = Vec::new();
    for k in 0..n {
        let v = d[k].abs();
        if v < min_abs {
            continue;
        }
        let left = if k > 0 { d[k - 1].abs() } else { -1.0 };
        let right = if k + 1 < n { d[k + 1].abs() } else { -1.0 };
        let same_sign = |j: usize| d[j].signum() == d[k].signum();
        let l_ok = k == 0 || !same_sign(k - 1) || v > left;
        let r_ok = k + 1 == n || !same_sign(k + 1) || v >= right;
        if l_ok && r_ok {
            out.push(Extremum {
                index: k,
                freq: freqs[k],
                value: d[k],
            });
        }
    }
    out
}

/// Primary band in one window: the largest `|D|` and the target it favours.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandPeak {
    pub freq: f64,
    pub d: f64,
    /// Largest excursion of the opposite sign in the same window.
    pub opposite: f64,
}

impl BandPeak {
    pub fn favoured(&self) -> Target {
        if self.d > 0.0 {
            Target::S
        } else {
            Target::T0
        }
    }
}

pub fn band_peak(freqs: &[f64], d: &[f64]) -> BandPeak {
    let k = (0..d.len())
        .max_by(|&a, &b| d[a].abs().partial_cmp(&d[b].abs()).unwrap())
        .unwrap();
    let s = d[k].signum();
    let opposite = d.iter().map(|v| (-s * v).max(0.0)).fold(0.0, f64::max);
    BandPeak {
        freq: freqs[k],
        d: d[k],
        opposite,
    }
}

/// Secondary extremum on the red side of the primary band, within
/// `[lo·|χ|, hi·|χ|]` of it.
pub fn red_satellite(
    freqs: &[f64],
    d: &[f64],
    chi: f64,
    min_abs: f64,
    lo: f64,
    hi: f64,
) -> Option<(Extremum, f64)> {
    let main = band_peak(freqs, d);
    extrema(freqs, d, min_abs)
        .into_iter()
        .filter(|e| {
            let red = main.freq - e.freq;
            red >= lo * chi.abs() && red <= hi * chi.abs()
        })
        .max_by(|a, b| a.value.abs().partial_cmp(&b.value.abs()).unwrap())
        .map(|e| (e, main.freq - e.freq))
}

/// Largest opposite-sign `|D|` within `half_width` of the band peak.
pub fn opposite_near(freqs: &[f64], d: &[f64], peak: &BandPeak, half_width: f64) -> f64 {
    let s = peak.d.signum();
    freqs
        .iter()
        .zip(d)
        .filter(|(f, _)| (**f - peak.freq).abs() <= half_width)
        .map(|(_, v)| (-s * v).max(0.0))
        .fold(0.0, f64::max)
}

/// A cooling band followed across phases: one window, one favoured target.
#[derive(Debug, Clone, PartialEq)]
pub struct BandTrack {
    pub window: usize,
    pub target: Target,
    /// `(φ, ωd, D)` of the band's extremum in every column where it is primary.
    pub points: Vec<(f64, f64, f64)>,
}

/// Bands whose extremum reaches `|D| ≥ threshold`, grouped by window and
/// favoured target. Also returns the largest number of same-sign primary
/// extrema found in a single column of one window.
pub fn primary_bands(map: &MapResult, threshold: f64) -> (Vec<BandTrack>, usize) {
    let phis = map.grid.phis();
    let mut tracks: Vec<BandTrack> = Vec::new();
    let mut worst = 0;
    for w in 0..map.grid.omega_d.len() {
        for (i, &phi) in phis.iter().enumerate() {
            let (f, d) = map.d_row(i, w);
            for t in [Target::S, Target::T0] {
                let s = if t == Target::S { 1.0 } else { -1.0 };
                let ex: Vec<Extremum> = extrema(&f, &d, threshold)
                    .into_iter()
                    .filter(|e| e.value * s > 0.0)
                    .collect();
                worst = worst.max(ex.len());
                if let Some(e) = ex
                    .iter()
                    .max_by(|a, b| a.value.abs().partial_cmp(&b.value.abs()).unwrap())
                {
                    match tracks.iter_mut().find(|b| b.window == w && b.target == t) {
                        Some(b) => b.points.push((phi, e.freq, e.value)),
                        None => tracks.push(BandTrack {
                            window: w,
                            target: t,
                            points: vec![(phi, e.freq, e.value)],
                        }),
                    }
                }
            }
        }
    }
    (tracks, worst)
}

pub fn wrap_phase(phi: f64) -> f64 {
    let r = phi % (2.0 * PI);
    if r < 0.0 {
        r + 2.0 * PI
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{
        calibrate, closed_form_delta, hybridized_modes, CalibrationOptions, PublishedObservables,
    };

    fn calibrated() -> DeviceParams {
        calibrate(
            &PublishedObservables::default(),
            &DeviceParams::default(),
            &CalibrationOptions::default(),
        )
        .unwrap()
        .device
    }

    #[test]
    fn axis_and_grid() {
        assert!(Axis::new("x", 1.0, 1.0, 3).is_err());
        assert!(Axis::new("x", 0.0, 1.0, 1).is_err());
        let a = Axis::periodic("phi", 0.0, 2.0 * PI, 4).unwrap();
        assert_eq!(a.values(), vec![0.0, 0.5 * PI, PI, 1.5 * PI]);
        let g = SweepGrid::cooling_windows(4, [6.572, 6.713], 3, 0.001, 0.001).unwrap();
        assert_eq!(g.points().len(), 24);
    }

    #[test]
    fn spectrum_peaks() {
        let dev = calibrated();
        let m = hybridized_modes(&dev);
        let s = transmission_spectrum(
            &dev,
            dev.omega_c - dev.j - 0.02,
            dev.omega_c + dev.j + 0.02,
            2001,
        )
        .unwrap();
        assert_eq!(s.peaks.len(), 2);
        assert!((s.peaks[0].freq - m.omega_c_plus).abs() < 1e-5);
        assert!((s.peaks[1].freq - s.peaks[0].freq - 2.0 * dev.j).abs() / (2.0 * dev.j) < 0.01);
        assert!((s.peaks[0].fwhm - dev.kappa_plus).abs() / dev.kappa_plus < 0.1);
        assert!((s.peaks[1].fwhm - dev.kappa_minus).abs() / dev.kappa_minus < 0.1);
        let flat = DeviceParams { j: 0.0, ..dev };
        let s = transmission_spectrum(&flat, dev.omega_c - 0.02, dev.omega_c + 0.02, 801).unwrap();
        assert_eq!(s.peaks.len(), 1);
        assert!((s.peaks[0].freq - dev.omega_c).abs() < 1e-6);
    }

    #[test]
    fn crossing_gap() {
        let dev = calibrated();
        let c = avoided_crossing(&dev, dev.omega_q_a - 0.02, dev.omega_q_a + 0.02, 201).unwrap();
        assert!((c.min_gap - 0.0027).abs() / 0.0027 < 0.05, "{}", c.min_gap);
        assert!((c.min_gap_at - dev.omega_q_a).abs() < 1e-4);
        let none = DeviceParams { g_b: 0.0, ..dev };
        let c = avoided_crossing(&none, dev.omega_q_a - 0.02, dev.omega_q_a + 0.02, 201).unwrap();
        assert!(c.min_gap < 1e-8);
        let _ = closed_form_delta(&dev);
    }

    #[test]
    fn even_phase_resonances_and_forbidden_flags() {
        let dev = calibrated();
        let ops = SystemOps::new(3).unwrap();
        assert!(is_forbidden(&dev, 6.572, 0.0, Branch::Plus, Target::S));
        assert!(!is_forbidden(&dev, 6.572, PI, Branch::Plus, Target::T0));
        assert!(is_forbidden(&dev, 6.713, 0.0, Branch::Minus, Target::T0));
        let (drv, rate) = resonant_drive(&dev, 0.05, 0.0, Branch::Plus, Target::T0, &ops).unwrap();
        let eq5 = cooling_frequency(&dev, 0.05, 0.0, Branch::Plus, Target::T0, &ops).unwrap();
        assert!(
            (drv.omega_d - eq5).abs() < 0.2 * MHZ,
            "{} vs {eq5}",
            drv.omega_d
        );
        assert!(rate > 0.0);
        let (_, forb) = resonant_drive(&dev, 0.05, 0.0, Branch::Plus, Target::S, &ops).unwrap();
        assert!(forb < 1e-3 * rate, "{forb} vs {rate}");
    }

    #[test]
    fn undriven_single_excitation_decays_at_gamma_1() {
        let dev = DeviceParams {
            gamma_phi: 0.0,
            ..calibrated()
        };
        let ops = SystemOps::new(1).unwrap();
        let times: Vec<f64> = (0..=10).map(|k| k as f64 * 2.0).collect();
        let o = DynamicsOptions {
            eps: Some(0.0),
            fit: false,
            initial: Bell::S,
            ..DynamicsOptions::default()
        };
        let d = cooling_dynamics(&dev, Target::S, PI, Branch::Minus, &times, &ops, &o).unwrap();
        // S couples to the antisymmetric mode only: dressing loss plus Purcell decay.
        let m = hybridized_modes(&dev);
        let r = (dev.g_a / (m.omega_c_minus - dev.omega_q_a)).powi(2);
        let rate = crate::units::angular((1.0 - r) * dev.gamma_1 + r * dev.kappa_minus);
        for (t, f) in times.iter().zip(&d.fidelities) {
            let expect = (1.0 - r) * (-rate * t).exp();
            assert!(
                (f.s - expect).abs() < 0.02 * expect,
                "t={t} {} vs {expect}",
                f.s
            );
            assert!(f.t0 < 1e-3);
        }
        assert!(d.steady.t_minus > d.steady.s);
    }

    #[test]
    fn extrema_and_satellites() {
        let f: Vec<f64> = (0..11).map(|k| k as f64).collect();
        let d = [0.0, 0.05, 0.0, 0.0, 0.0, 0.0, -0.1, -0.5, -0.2, 0.0, 0.0];
        let e = extrema(&f, &d, 0.02);
        assert_eq!(e.len(), 2);
        let b = band_peak(&f, &d);
        assert_eq!(b.freq, 7.0);
        assert_eq!(b.favoured(), Target::T0);
        let (s, red) = red_satellite(&f, &d, 5.0, 0.02, 0.4, 1.6).unwrap();
        assert_eq!(s.freq, 1.0);
        assert_eq!(red, 6.0);
    }
}
