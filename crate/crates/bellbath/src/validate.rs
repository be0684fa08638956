//! Numerical hygiene and analytic-oracle suite behind `bellbath validate`.

use std::f64::consts::PI;

use anyhow::Result;
use bellbath_core::device::{
    build_hamiltonian, coupled_eigensystem, lab_hamiltonian, Branch, DeviceParams, DriveParams,
    Frame, SystemOps, Target,
};
use bellbath_core::dressed::{DressedPropagator, DEFAULT_CUTOFF};
use bellbath_core::experiments::{cooling_frequency, pump_coupling, pump_rate_estimate};
use bellbath_core::lindblad::{
    default_channels, evolve, evolve_lab, lindblad_rhs, steady_state, CollapseChannel,
    EvolveOptions,
};
use bellbath_core::observables::{
    bell_fidelities, qubit_reduce, tomography_roundtrip, TwoQubitState,
};
use bellbath_core::rates::{evolve_rates, Populations, RateModel};
use bellbath_core::space::{hermiticity_error, max_abs, min_eigenvalue, pauli_matrix, Pauli};
use bellbath_core::units::{angular, TWO_PI_GHZ_US};
use bellbath_core::{CMat, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub limit: f64,
    /// `true` when the value must stay below the limit, `false` for above.
    pub below: bool,
}

impl Check {
    fn below(name: &'static str, value: f64, limit: f64) -> Self {
        Self {
            name,
            value,
            limit,
            below: true,
        }
    }

    fn above(name: &'static str, value: f64, limit: f64) -> Self {
        Self {
            name,
            value,
            limit,
            below: false,
        }
    }

    pub fn passed(&self) -> bool {
        if self.below {
            self.value < self.limit
        } else {
            self.value > self.limit
        }
    }

    pub fn line(&self) -> String {
        let op = if self.below { "<" } else { ">" };
        let tag = if self.passed() { "PASS" } else { "FAIL" };
        format!(
            "{tag} {:<32} {:>12.3e} {op} {:.1e}",
            self.name, self.value, self.limit
        )
    }
}

fn ground(n: usize) -> CMat {
    let mut r = CMat::zeros(n, n);
    r[(0, 0)] = C64::new(1.0, 0.0);
    r
}

fn random_density<R: Rng>(n: usize, rng: &mut R) -> CMat {
    let a = CMat::from_fn(n, n, |_, _| {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let r = &a * a.adjoint();
    let t = r.trace();
    r / t
}

/// Populations of `|e⟩` from free decay, Rabi flopping and the driven,
/// damped qubit, each against its closed form.
pub fn analytic_oracles() -> Result<[Check; 3]> {
    let sm = pauli_matrix(Pauli::Minus);
    let opts = EvolveOptions::default();
    let mut excited = CMat::zeros(2, 2);
    excited[(1, 1)] = C64::new(1.0, 0.0);

    let g1 = 2e-4;
    let ch = vec![CollapseChannel::new("g1", g1, sm.clone())?];
    let times = [0.5, 1.0, 2.0];
    let ev = evolve(&CMat::zeros(2, 2), &ch, &excited, &times, &opts)?;
    let decay = times
        .iter()
        .zip(&ev.states)
        .map(|(t, r)| (r[(1, 1)].re - (-angular(g1) * t).exp()).abs())
        .fold(0.0, f64::max);

    // H = (Ω/2) σx flips |g⟩ → |e⟩ with P_e = sin²(π Ω t · 1000).
    let om = 0.002;
    let hx = pauli_matrix(Pauli::X) * C64::new(0.5 * om, 0.0);
    let times = [0.05, 0.11, 0.25, 0.4];
    let ev = evolve(&hx, &[], &ground(2), &times, &opts)?;
    let rabi = times
        .iter()
        .zip(&ev.states)
        .map(|(t, r)| (r[(1, 1)].re - (PI * om * 1000.0 * t).sin().powi(2)).abs())
        .fold(0.0, f64::max);

    // Driven damped qubit: P_e = (Ω²/2)(Γ2/Γ1) / (Δ² + Γ2² + Ω² Γ2/Γ1), Γ2 = Γ1/2 + Γφ.
    let (det, gphi) = (0.0015, 3e-4);
    let z = pauli_matrix(Pauli::Z);
    let h = &z * C64::new(0.5 * det, 0.0) + &hx;
    let ch = vec![
        CollapseChannel::new("g1", g1, sm)?,
        CollapseChannel::new("phi", 0.5 * gphi, z)?,
    ];
    let rho = steady_state(&h, &ch)?;
    let g2 = 0.5 * g1 + gphi;
    let pe = 0.5 * om * om * g2 / g1 / (det * det + g2 * g2 + om * om * g2 / g1);
    let bloch = (rho[(1, 1)].re - pe).abs();
    Ok([
        Check::below("oracle: free decay", decay, 1e-6),
        Check::below("oracle: Rabi oscillation", rabi, 1e-6),
        Check::below("oracle: Bloch steady state", bloch, 1e-6),
    ])
}

/// Largest deviation between the lab-frame evolution (explicit drive) and
/// the rotating-frame evolution mapped back, over `0.5 μs`. Frequencies are
/// scaled down so the lab-frame step stays affordable.
pub fn frame_equivalence(dev: &DeviceParams) -> Result<f64> {
    let s = 0.01;
    let d = DeviceParams {
        omega_c: dev.omega_c * s,
        omega_q_a: dev.omega_q_a * s,
        omega_q_b: dev.omega_q_b * s,
        g_a: dev.g_a * s,
        g_b: dev.g_b * s,
        j: dev.j * s,
        ..*dev
    };
    let ops = SystemOps::new(1)?;
    let drv = DriveParams::balanced(0.0657, 0.0005, 0.7);
    let ch = default_channels(&d, &ops);
    let mut rho0 = CMat::zeros(ops.dim(), ops.dim());
    rho0[(1, 1)] = C64::new(1.0, 0.0);
    let t = 0.5;
    let opts = EvolveOptions {
        step_scale: 0.02,
        ..EvolveOptions::default()
    };
    let hr = build_hamiltonian(&d, &drv, Frame::DriveRotating, &ops)?.into_matrix();
    let rot = evolve(&hr, &ch, &rho0, &[t], &opts)?;
    let lab = evolve_lab(&lab_hamiltonian(&d, &drv, &ops), &ch, &rho0, &[t], &opts)?;
    let nexc = ops.excitation_number();
    let ph = TWO_PI_GHZ_US * drv.omega_d * t;
    let u = CMat::from_diagonal(&nexc.diagonal().map(|x| C64::new(0.0, -ph * x.re).exp()));
    let back = u.adjoint() * &lab.states[0] * &u;
    Ok(max_abs(&(back - &rot.states[0])))
}

/// Run the full suite on `dev`.
pub fn run_suite(dev: &DeviceParams, seed: u64) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let ops2 = SystemOps::new(2)?;
    let wd = cooling_frequency(dev, 0.06, PI, Branch::Plus, Target::T0, &ops2)?;
    let drv = DriveParams::balanced(wd, 0.06, PI);
    let h2 = build_hamiltonian(dev, &drv, Frame::DriveRotating, &ops2)?.into_matrix();
    let herm = [
        h2.clone(),
        ops2.sz_a.clone(),
        ops2.a_plus.adjoint() * &ops2.a_plus,
    ]
    .iter()
    .map(hermiticity_error)
    .fold(0.0, f64::max);
    out.push(Check::below("hamiltonian hermiticity", herm, 1e-12));
    let p = ops2.swap();
    let sym = DeviceParams {
        omega_q_b: dev.omega_q_a,
        g_b: dev.g_a,
        ..*dev
    };
    let hs = build_hamiltonian(
        &sym,
        &DriveParams::balanced(wd, 0.06, 0.0),
        Frame::DriveRotating,
        &ops2,
    )?
    .into_matrix();
    out.push(Check::below(
        "exchange symmetry [H, P] at phi=0",
        max_abs(&(&p * &hs - &hs * &p)),
        1e-12,
    ));
    let eq = coupled_eigensystem(dev)?.exact.qubit_overlaps;
    out.push(Check::above(
        "T0/S eigenvector overlap",
        eq[0][0].min(eq[1][1]),
        0.99,
    ));

    // Cooling-scale trajectory with the dressed propagator.
    let ch2 = default_channels(dev, &ops2);
    let prop = DressedPropagator::new(&h2, &ch2, DEFAULT_CUTOFF)?;
    let times: Vec<f64> = (1..=40).map(|k| 0.5 * k as f64).collect();
    let states = prop.evolve(&ground(ops2.dim()), &times)?;
    let (mut tr, mut he, mut pos) = (0.0f64, 0.0f64, f64::INFINITY);
    for r in &states {
        tr = tr.max((r.trace().re - 1.0).abs());
        he = he.max(hermiticity_error(r));
        pos = pos.min(min_eigenvalue(r));
    }
    out.push(Check::below("trace preservation (20 us)", tr, 1e-7));
    out.push(Check::below("hermiticity (20 us)", he, 1e-9));
    out.push(Check::above("positivity floor (20 us)", pos, -1e-6));

    // Exact RK4 trajectory.
    let ops1 = SystemOps::new(1)?;
    let h1 = build_hamiltonian(dev, &drv, Frame::DriveRotating, &ops1)?.into_matrix();
    let ch1 = default_channels(dev, &ops1);
    let ev = evolve(
        &h1,
        &ch1,
        &ground(ops1.dim()),
        &[0.05, 0.1],
        &EvolveOptions::default(),
    )?;
    out.push(Check::below(
        "trace preservation (RK4)",
        ev.max_trace_error,
        1e-7,
    ));

    // Steady state: dense null vector, residual and long-time agreement.
    let ss = steady_state(&h1, &ch1)?;
    let resid = max_abs(&lindblad_rhs(&h1, &ch1, &ss)?) / TWO_PI_GHZ_US;
    out.push(Check::below(
        "steady-state residual |L rho| (GHz)",
        resid,
        1e-10,
    ));
    // n_max = 1 cannot resolve the two-photon pump, so Γp comes from n_max = 3.
    let g = pump_coupling(dev, &drv, &SystemOps::new(3)?, Branch::Plus, Target::T0)?;
    let gp = pump_rate_estimate(dev, g, Branch::Plus).max(dev.gamma_1);
    let t_long = 50.0 / angular(gp);
    let exact = DressedPropagator::new(&h1, &ch1, f64::INFINITY)?;
    let long = exact.evolve(&ground(ops1.dim()), &[t_long])?;
    let (a, b) = (
        bell_fidelities(&qubit_reduce(&ss)),
        bell_fidelities(&qubit_reduce(&long[0])),
    );
    let agree = [
        a.s - b.s,
        a.t0 - b.t0,
        a.t_minus - b.t_minus,
        a.t_plus - b.t_plus,
    ]
    .iter()
    .fold(0.0f64, |m, v| m.max(v.abs()));
    out.push(Check::below("steady state vs long evolution", agree, 1e-4));

    out.push(Check::below(
        "frame equivalence (0.5 us)",
        frame_equivalence(dev)?,
        1e-6,
    ));

    let mut tomo = 0.0f64;
    let mut fsum = 0.0f64;
    for _ in 0..50 {
        let s = TwoQubitState::new(random_density(4, &mut rng))?;
        tomo = tomo.max(max_abs(&(tomography_roundtrip(&s).density() - s.density())));
        fsum = fsum.max((bell_fidelities(s.density()).sum() - 1.0).abs());
    }
    out.push(Check::below("tomography round trip", tomo, 1e-10));
    out.push(Check::below("Bell fidelities sum to one", fsum, 1e-9));

    let mut cons = 0.0f64;
    let times: Vec<f64> = (0..=50).map(|k| k as f64).collect();
    for _ in 0..20 {
        let m = RateModel::from_array(std::array::from_fn(|_| rng.random_range(0.0..1e-4)));
        let p: [f64; 4] = std::array::from_fn(|_| rng.random_range(0.0..1.0));
        let s: f64 = p.iter().sum();
        let tr = evolve_rates(&Populations::from_array(p.map(|x| x / s)), &m, &times)?;
        for q in &tr.pops {
            cons = cons.max((q.to_array().iter().sum::<f64>() - 1.0).abs());
        }
    }
    out.push(Check::below("rate-model conservation", cons, 1e-9));

    out.extend(analytic_oracles()?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracles_pass() {
        for c in analytic_oracles().unwrap() {
            assert!(c.passed(), "{}", c.line());
        }
    }

    #[test]
    fn check_lines() {
        assert!(Check::below("x", 1.0, 2.0).line().starts_with("PASS"));
        assert!(Check::above("x", 1.0, 2.0).line().starts_with("FAIL"));
    }
}
