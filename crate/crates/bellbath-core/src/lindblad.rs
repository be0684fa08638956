//! Markovian master equation: right-hand side, fixed-step RK4 propagation,
//! direct steady state, and semiclassical cavity amplitudes.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, PI};
#[allow(unused_imports)]
use num_traits::Float;
use num_traits::Zero;

use crate::device::{
    eigh, hybridized_modes, Branch, DeviceParams, DriveParams, LabHamiltonian, SystemOps,
};
use crate::space::{hermiticity_error, hermitize, max_abs};
use crate::units::TWO_PI_GHZ_US;
use crate::{CMat, Error, Result, C64};

/// Collapse operator `c` with linear-GHz rate `r`, entering as `r D[c]`.
#[derive(Debug, Clone)]
pub struct CollapseChannel {
    pub label: String,
    pub rate: f64,
    pub op: CMat,
}

impl CollapseChannel {
    pub fn new(label: &str, rate: f64, op: CMat) -> Result<Self> {
        if !(rate >= 0.0) || !rate.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "rate of {label} must be finite and >= 0"
            )));
        }
        if op.nrows() != op.ncols() {
            return Err(Error::DimensionMismatch {
                expected: op.nrows(),
                found: op.ncols(),
            });
        }
        Ok(Self {
            label: label.into(),
            rate,
            op,
        })
    }
}

/// Hybridized-mode decay, qubit relaxation and pure dephasing (`γφ/2` on `σz`).
pub fn default_channels(dev: &DeviceParams, ops: &SystemOps) -> Vec<CollapseChannel> {
    let mut v = Vec::with_capacity(6);
    let mut push = |label: &str, rate: f64, op: &CMat| {
        v.push(CollapseChannel {
            label: label.into(),
            rate,
            op: op.clone(),
        });
    };
    push("kappa_plus", dev.kappa_plus, &ops.a_plus);
    push("kappa_minus", dev.kappa_minus, &ops.a_minus);
    push("gamma_1_A", dev.gamma_1, &ops.sm_a);
    push("gamma_1_B", dev.gamma_1, &ops.sm_b);
    push("gamma_phi_A", 0.5 * dev.gamma_phi, &ops.sz_a);
    push("gamma_phi_B", 0.5 * dev.gamma_phi, &ops.sz_b);
    v
}

/// Channels without qubit relaxation or dephasing.
pub fn cavity_channels(dev: &DeviceParams, ops: &SystemOps) -> Vec<CollapseChannel> {
    default_channels(dev, ops)
        .into_iter()
        .filter(|c| c.label.starts_with("kappa"))
        .collect()
}

/// Precomputed generator pieces for repeated RHS evaluation.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    dim: usize,
    /// `−i TW H_eff` with `H_eff = H − (i/2) Σ r c†c`.
    k: CMat,
    /// `(√(TW r) c)`, so the jump term is `Σ L ρ L†`.
    jumps: Vec<CMat>,
}

impl Liouvillian {
    pub fn new(h: &CMat, channels: &[CollapseChannel]) -> Result<Self> {
        let n = h.nrows();
        if h.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: h.ncols(),
            });
        }
        let herr = hermiticity_error(h);
        if herr > 1e-9 {
            return Err(Error::NotHermitian(herr));
        }
        let mut heff = h.clone();
        let mut jumps = Vec::new();
        for c in channels {
            if c.op.nrows() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: c.op.nrows(),
                });
            }
            if c.rate == 0.0 {
                continue;
            }
            heff -= (c.op.adjoint() * &c.op) * C64::new(0.0, 0.5 * c.rate);
            jumps.push(&c.op * C64::new((TWO_PI_GHZ_US * c.rate).sqrt(), 0.0));
        }
        Ok(Self {
            dim: n,
            k: heff * C64::new(0.0, -TWO_PI_GHZ_US),
            jumps,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `dρ/dt` in 1/μs for any `ρ`.
    pub fn apply_general(&self, rho: &CMat) -> CMat {
        let mut out = &self.k * rho + rho * self.k.adjoint();
        for l in &self.jumps {
            out += l * rho * l.adjoint();
        }
        out
    }

    /// `dρ/dt` in 1/μs for Hermitian `ρ`, using `ρK† = (Kρ)†`.
    pub fn apply(&self, rho: &CMat) -> CMat {
        let kr = &self.k * rho;
        let mut out = &kr + kr.adjoint();
        for l in &self.jumps {
            out += l * rho * l.adjoint();
        }
        out
    }

    /// Largest magnitude of the generator spectrum, bounded from the
    /// Hamiltonian spread and the dissipative rates (rad/μs).
    pub fn spectral_bound(&self) -> f64 {
        let h = (&self.k * C64::new(0.0, 1.0) + (&self.k * C64::new(0.0, 1.0)).adjoint())
            * C64::new(0.5, 0.0);
        let (vals, _) = eigh(&h);
        let spread = vals[vals.len() - 1] - vals[0];
        let diss: f64 = self.jumps.iter().map(|l| (l.adjoint() * l).norm()).sum();
        spread + diss
    }
}

/// `dρ/dt = TW(−i[H, ρ] + Σ r(cρc† − ½{c†c, ρ}))`, in 1/μs.
pub fn lindblad_rhs(h: &CMat, channels: &[CollapseChannel], rho: &CMat) -> Result<CMat> {
    if rho.nrows() != h.nrows() || rho.ncols() != h.nrows() {
        return Err(Error::DimensionMismatch {
            expected: h.nrows(),
            found: rho.nrows(),
        });
    }
    Ok(Liouvillian::new(h, channels)?.apply_general(rho))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    /// Target `|λ| h` for the fixed RK4 step.
    pub step_scale: f64,
    pub max_steps: usize,
    /// Symmetrize each reported state.
    pub hermitize: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            step_scale: 0.05,
            max_steps: 50_000_000,
            hermitize: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Evolution {
    pub times: Vec<f64>,
    pub states: Vec<CMat>,
    pub steps: usize,
    pub step: f64,
    /// Largest `|Tr ρ − 1|` seen at the output times.
    pub max_trace_error: f64,
}

fn check_times(times: &[f64]) -> Result<()> {
    let mut last = 0.0;
    for &t in times {
        if !(t >= last) || !t.is_finite() {
            return Err(Error::InvalidParameter(
                "time grid must be finite, >= 0 and non-decreasing".into(),
            ));
        }
        last = t;
    }
    Ok(())
}

fn rk4_driver<F>(
    rho0: &CMat,
    times: &[f64],
    hmax: f64,
    opts: &EvolveOptions,
    mut rhs: F,
) -> Result<Evolution>
where
    F: FnMut(f64, &CMat) -> CMat,
{
    check_times(times)?;
    if !(hmax > 0.0) || !hmax.is_finite() {
        return Err(Error::IntegrationFailure {
            t: 0.0,
            step: hmax,
            steps: 0,
        });
    }
    let mut rho = rho0.clone();
    let mut t = 0.0;
    let mut steps = 0usize;
    let mut states = Vec::with_capacity(times.len());
    let mut max_trace_error: f64 = 0.0;
    for &target in times {
        let span = target - t;
        if span > 0.0 {
            let n = (span / hmax).ceil().max(1.0) as usize;
            if steps + n > opts.max_steps {
                return Err(Error::IntegrationFailure {
                    t,
                    step: span / n as f64,
                    steps: steps + n,
                });
            }
            let h = span / n as f64;
            let half = C64::new(0.5 * h, 0.0);
            let full = C64::new(h, 0.0);
            let sixth = C64::new(h / 6.0, 0.0);
            let two = C64::new(2.0, 0.0);
            for _ in 0..n {
                let k1 = rhs(t, &rho);
                let k2 = rhs(t + 0.5 * h, &(&rho + &k1 * half));
                let k3 = rhs(t + 0.5 * h, &(&rho + &k2 * half));
                let k4 = rhs(t + h, &(&rho + &k3 * full));
                rho += (k1 + (k2 + k3) * two + k4) * sixth;
                t += h;
                steps += 1;
            }
            t = target;
            if !rho.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                return Err(Error::IntegrationFailure { t, step: h, steps });
            }
        }
        let mut out = rho.clone();
        if opts.hermitize {
            hermitize(&mut out);
        }
        let tr: C64 = (0..out.nrows()).map(|i| out[(i, i)]).sum();
        max_trace_error = max_trace_error.max((tr - C64::new(1.0, 0.0)).norm());
        states.push(out);
    }
    Ok(Evolution {
        times: times.to_vec(),
        states,
        steps,
        step: hmax,
        max_trace_error,
    })
}

/// Propagate under a time-independent generator with fixed-step RK4. The
/// step follows from the generator's spectral bound; outputs land exactly on
/// the requested times (μs, starting from `ρ0` at `t = 0`).
pub fn evolve(
    h: &CMat,
    channels: &[CollapseChannel],
    rho0: &CMat,
    times: &[f64],
    opts: &EvolveOptions,
) -> Result<Evolution> {
    let l = Liouvillian::new(h, channels)?;
    if rho0.nrows() != l.dim() {
        return Err(Error::DimensionMismatch {
            expected: l.dim(),
            found: rho0.nrows(),
        });
    }
    let hmax = opts.step_scale / l.spectral_bound().max(1e-12);
    rk4_driver(rho0, times, hmax, opts, |_, r| l.apply(r))
}

/// Lab-frame propagation with the explicitly time-dependent drive.
pub fn evolve_lab(
    lab: &LabHamiltonian,
    channels: &[CollapseChannel],
    rho0: &CMat,
    times: &[f64],
    opts: &EvolveOptions,
) -> Result<Evolution> {
    let base = Liouvillian::new(&lab.h0, channels)?;
    let drive_norm: f64 = lab.drives.iter().map(|(a, e, _)| 2.0 * e * a.norm()).sum();
    let bound = base.spectral_bound() + TWO_PI_GHZ_US * drive_norm;
    let hmax = opts.step_scale / bound.max(1e-12);
    let jumps = base.jumps.clone();
    let heff_extra = &base.k * C64::new(0.0, 1.0) * C64::new(1.0 / TWO_PI_GHZ_US, 0.0) - &lab.h0;
    rk4_driver(rho0, times, hmax, opts, |t, r| {
        let k = (lab.at(t) + &heff_extra) * C64::new(0.0, -TWO_PI_GHZ_US);
        let kr = &k * r;
        let mut out = &kr + kr.adjoint();
        for l in &jumps {
            out += l * r * l.adjoint();
        }
        out
    })
}

/// Dense Liouvillian superoperator acting on column-stacked `vec(ρ)`.
pub fn superoperator(h: &CMat, channels: &[CollapseChannel]) -> Result<CMat> {
    let l = Liouvillian::new(h, channels)?;
    let n = l.dim();
    let mut s = CMat::zeros(n * n, n * n);
    let mut e = CMat::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            e[(i, j)] = C64::new(1.0, 0.0);
            let col = l.apply_general(&e);
            s.column_mut(i + j * n).copy_from_slice(col.as_slice());
            e[(i, j)] = C64::zero();
        }
    }
    Ok(s)
}

/// Steady-state residual `max |L ρ|` accepted by [`steady_state`], relative to
/// the generator scale.
pub const STEADY_RESIDUAL_TOL: f64 = 1e-8;

/// Solve `L ρ = 0` with `Tr ρ = 1` by LU on the dense superoperator with the
/// first row replaced by the trace condition, plus iterative refinement.
pub fn steady_state(h: &CMat, channels: &[CollapseChannel]) -> Result<CMat> {
    let n = h.nrows();
    let s = superoperator(h, channels)?;
    let scale = max_abs(&s).max(1e-300);
    let mut a = &s / C64::new(scale, 0.0);
    for k in 0..n * n {
        a[(0, k)] = C64::zero();
    }
    for i in 0..n {
        a[(0, i + i * n)] = C64::new(1.0, 0.0);
    }
    let mut b = crate::CVec::zeros(n * n);
    b[0] = C64::new(1.0, 0.0);
    let lu = a.clone().lu();
    let u = lu.u();
    let dmax = (0..n * n).map(|i| u[(i, i)].norm()).fold(0.0, f64::max);
    let dmin = (0..n * n)
        .map(|i| u[(i, i)].norm())
        .fold(f64::INFINITY, f64::min);
    if dmin < 1e-13 * dmax {
        return Err(Error::NonUniqueSteadyState(dmin / dmax));
    }
    let mut x = lu.solve(&b).ok_or(Error::NonUniqueSteadyState(0.0))?;
    for _ in 0..2 {
        let r = &b - &a * &x;
        if let Some(dx) = lu.solve(&r) {
            x += dx;
        }
    }
    let mut rho = CMat::from_column_slice(n, n, x.as_slice());
    hermitize(&mut rho);
    let lv = &s * crate::CVec::from_column_slice(rho.as_slice());
    let resid = lv.iter().fold(0.0, |a: f64, z| a.max(z.norm())) / scale;
    if !(resid < STEADY_RESIDUAL_TOL) {
        return Err(Error::SteadyStateResidual(resid));
    }
    Ok(rho)
}

/// `Tr(O ρ)`.
pub fn expect(op: &CMat, rho: &CMat) -> C64 {
    let m = op * rho;
    (0..m.nrows()).map(|i| m[(i, i)]).sum()
}

fn branch_source(drv: &DriveParams, branch: Branch) -> C64 {
    let ea = C64::new(0.0, -drv.phi_a).exp() * drv.eps_a;
    let eb = C64::new(0.0, -drv.phi_b).exp() * drv.eps_b;
    match branch {
        Branch::Plus => (ea + eb) * FRAC_1_SQRT_2,
        Branch::Minus => (ea - eb) * FRAC_1_SQRT_2,
    }
}

/// Semiclassical steady amplitudes `α± = −iε±/(i(ω±c − ωd) + κ±/2)` of the
/// hybridized modes, without qubits.
pub fn mode_amplitudes(dev: &DeviceParams, drv: &DriveParams) -> (C64, C64) {
    let m = hybridized_modes(dev);
    let amp = |b: Branch, w: f64, k: f64| {
        let den = C64::new(0.5 * k, w - drv.omega_d);
        C64::new(0.0, -1.0) * branch_source(drv, b) / den
    };
    (
        amp(Branch::Plus, m.omega_c_plus, dev.kappa_plus),
        amp(Branch::Minus, m.omega_c_minus, dev.kappa_minus),
    )
}

/// The two relative phases in `(0, 2π)` where `|α₊| = |α₋|`, so that the
/// symmetric and antisymmetric modes carry equal photon numbers.
pub fn odd_parity_phase(
    dev: &DeviceParams,
    omega_d: f64,
    eps_a: f64,
    eps_b: f64,
) -> Result<[f64; 2]> {
    let f = |phi: f64| {
        let drv = DriveParams {
            omega_d,
            eps_a,
            eps_b,
            phi_a: 0.0,
            phi_b: phi,
        };
        let (p, m) = mode_amplitudes(dev, &drv);
        p.norm() - m.norm()
    };
    let bisect = |mut lo: f64, mut hi: f64| -> Result<f64> {
        let (mut flo, fhi) = (f(lo), f(hi));
        if flo * fhi > 0.0 || flo == fhi {
            return Err(Error::NoRoot("photon numbers never balance".into()));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let fm = f(mid);
            if fm == 0.0 {
                return Ok(mid);
            }
            if (fm > 0.0) == (flo > 0.0) {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    };
    let eps = 1e-12;
    Ok([bisect(eps, PI)?, bisect(PI, 2.0 * PI - eps)?])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{build_hamiltonian, lab_hamiltonian, Frame};
    use crate::space::{destroy_matrix, min_eigenvalue};

    fn qubit_decay() -> (CMat, Vec<CollapseChannel>) {
        let sm = crate::space::pauli_matrix(crate::space::Pauli::Minus);
        let h = CMat::zeros(2, 2);
        (
            h,
            alloc::vec![CollapseChannel::new("g1", 1e-4, sm).unwrap()],
        )
    }

    #[test]
    fn free_decay_matches_exponential() {
        let (h, ch) = qubit_decay();
        let mut rho = CMat::zeros(2, 2);
        rho[(1, 1)] = C64::new(1.0, 0.0);
        let ev = evolve(&h, &ch, &rho, &[0.0, 1.0, 5.0], &EvolveOptions::default()).unwrap();
        for (t, r) in ev.times.iter().zip(&ev.states) {
            let oracle = (-TWO_PI_GHZ_US * 1e-4 * t).exp();
            assert!((r[(1, 1)].re - oracle).abs() < 1e-7);
        }
        assert!(ev.max_trace_error < 1e-12);
    }

    #[test]
    fn rabi_oscillation_has_drive_period() {
        let mut h = CMat::zeros(2, 2);
        let om = 0.001;
        h[(0, 1)] = C64::new(om, 0.0);
        h[(1, 0)] = C64::new(om, 0.0);
        let mut rho = CMat::zeros(2, 2);
        rho[(0, 0)] = C64::new(1.0, 0.0);
        // sin²(2π·1000·Ω t) reaches 1 at t = 1/(4·1000·Ω).
        let t = 1.0 / (4.0 * 1000.0 * om);
        let ev = evolve(&h, &[], &rho, &[t], &EvolveOptions::default()).unwrap();
        assert!((ev.states[0][(1, 1)].re - 1.0).abs() < 1e-8);
    }

    #[test]
    fn rhs_is_traceless_and_hermitian() {
        let ops = SystemOps::new(1).unwrap();
        let dev = DeviceParams::default();
        let h = build_hamiltonian(
            &dev,
            &DriveParams::balanced(6.57, 0.05, 1.0),
            Frame::DriveRotating,
            &ops,
        )
        .unwrap()
        .into_matrix();
        let ch = default_channels(&dev, &ops);
        let n = ops.dim();
        let rho = CMat::identity(n, n) / C64::new(n as f64, 0.0);
        let d = lindblad_rhs(&h, &ch, &rho).unwrap();
        let tr: C64 = (0..n).map(|i| d[(i, i)]).sum();
        assert!(tr.norm() < 1e-9);
        assert!(hermiticity_error(&d) < 1e-9);
        assert!(lindblad_rhs(&h, &ch, &CMat::zeros(3, 3)).is_err());
        assert!(CollapseChannel::new("bad", -1.0, rho.clone()).is_err());
    }

    #[test]
    fn damped_cavity_steady_state_is_coherent() {
        let a = destroy_matrix(8).unwrap();
        let eps = 0.0005;
        let det = 0.001;
        let kap = 0.002;
        let h = a.adjoint() * &a * C64::new(det, 0.0) + (&a + a.adjoint()) * C64::new(eps, 0.0);
        let ch = alloc::vec![CollapseChannel::new("k", kap, a.clone()).unwrap()];
        let rho = steady_state(&h, &ch).unwrap();
        let alpha = C64::new(0.0, -eps) / C64::new(0.5 * kap, det);
        assert!((expect(&a, &rho) - alpha).norm() < 1e-6);
        assert!(min_eigenvalue(&rho) > -1e-9);
    }

    #[test]
    fn pure_dephasing_steady_state_is_not_unique() {
        let z = crate::space::pauli_matrix(crate::space::Pauli::Z);
        let ch = alloc::vec![CollapseChannel::new("phi", 1e-4, z).unwrap()];
        assert!(matches!(
            steady_state(&CMat::zeros(2, 2), &ch),
            Err(Error::NonUniqueSteadyState(_))
        ));
    }

    #[test]
    fn lab_and_drive_frames_agree() {
        let ops = SystemOps::new(1).unwrap();
        let dev = DeviceParams::default();
        let drv = DriveParams::balanced(6.9, 0.01, 0.7);
        let ch = default_channels(&dev, &ops);
        let n = ops.dim();
        let mut rho0 = CMat::zeros(n, n);
        rho0[(1, 1)] = C64::new(1.0, 0.0);
        let t = 0.002;
        let hr = build_hamiltonian(&dev, &drv, Frame::DriveRotating, &ops)
            .unwrap()
            .into_matrix();
        let rot = evolve(&hr, &ch, &rho0, &[t], &EvolveOptions::default()).unwrap();
        let lab = evolve_lab(
            &lab_hamiltonian(&dev, &drv, &ops),
            &ch,
            &rho0,
            &[t],
            &EvolveOptions::default(),
        )
        .unwrap();
        // Undo the frame: U = exp(−i 2π ωd t N_exc).
        let nexc = ops.excitation_number();
        let ph = TWO_PI_GHZ_US * drv.omega_d * t;
        let u = CMat::from_diagonal(&nexc.diagonal().map(|x| C64::new(0.0, -ph * x.re).exp()));
        let back = u.adjoint() * &lab.states[0] * &u;
        assert!(max_abs(&(back - &rot.states[0])) < 1e-6);
    }

    #[test]
    fn odd_parity_phase_matches_closed_form() {
        let dev = DeviceParams {
            j: 0.1408,
            ..DeviceParams::default()
        };
        let wd = 6.572;
        let r = odd_parity_phase(&dev, wd, 0.05, 0.05).unwrap();
        let m = hybridized_modes(&dev);
        let dp = C64::new(0.5 * dev.kappa_plus, m.omega_c_plus - wd).norm();
        let dm = C64::new(0.5 * dev.kappa_minus, m.omega_c_minus - wd).norm();
        let phi = 2.0 * (dm / dp).atan();
        assert!((r[0] - phi).abs() < 1e-10);
        assert!((r[1] - (2.0 * PI - phi)).abs() < 1e-10);
        let deg = r[0] * 180.0 / PI;
        assert!(deg > 100.0 && deg < 140.0, "{deg}");
        assert!(odd_parity_phase(&dev, wd, 0.0, 0.05).is_err());
    }
}
