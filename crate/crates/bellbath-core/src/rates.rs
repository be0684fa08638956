//! Four-level rate equations for the qubit-sector populations and the
//! least-squares extraction of pump, leakage, decay and mixing rates.
//!
//! Populations are `(T−, target, other, T+)`. With rates in linear GHz and
//! time in μs every rate enters multiplied by `2π·1000`:
//!
//! ```text
//! ṗ_T−  = −γp p_T− + γ1 (p_tgt + p_oth)
//! ṗ_tgt =  γp p_T− − (γ1 + γp′) p_tgt − γφ (p_tgt − p_oth) + γ1 p_T+
//! ṗ_oth = −γ1 p_oth + γφ (p_tgt − p_oth) + γ1 p_T+
//! ṗ_T+  =  γp′ p_tgt − 2γ1 p_T+
//! ```
//!
//! `γp′` pumps out of the target state and `T+` decays equally into both
//! single-excitation states.

use alloc::boxed::Box;
use alloc::vec::Vec;
use nalgebra::{Matrix4, Vector4};
#[allow(unused_imports)]
use num_traits::Float;

use crate::units::TWO_PI_GHZ_US;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RateModel {
    pub gamma_p: f64,
    pub gamma_p_prime: f64,
    pub gamma_1: f64,
    pub gamma_phi: f64,
}

impl RateModel {
    pub const NAMES: [&'static str; 4] = ["gamma_p", "gamma_p_prime", "gamma_1", "gamma_phi"];

    pub fn to_array(&self) -> [f64; 4] {
        [
            self.gamma_p,
            self.gamma_p_prime,
            self.gamma_1,
            self.gamma_phi,
        ]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self {
            gamma_p: a[0],
            gamma_p_prime: a[1],
            gamma_1: a[2],
            gamma_phi: a[3],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (n, v) in Self::NAMES.iter().zip(self.to_array()) {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(alloc::format!(
                    "{n} must be finite and >= 0"
                )));
            }
        }
        Ok(())
    }

    /// `γφ < γ1`, `γp′ < γ1` and `γ1 < γp`.
    pub fn hierarchy_ok(&self) -> bool {
        self.gamma_phi < self.gamma_1
            && self.gamma_p_prime < self.gamma_1
            && self.gamma_1 < self.gamma_p
    }

    /// Generator in 1/μs acting on `(T−, target, other, T+)`.
    pub fn matrix(&self) -> Matrix4<f64> {
        let (p, pp, g1, gf) = (
            self.gamma_p,
            self.gamma_p_prime,
            self.gamma_1,
            self.gamma_phi,
        );
        Matrix4::new(
            -p,
            g1,
            g1,
            0.0,
            p,
            -(g1 + pp) - gf,
            gf,
            g1,
            0.0,
            gf,
            -g1 - gf,
            g1,
            0.0,
            pp,
            0.0,
            -2.0 * g1,
        ) * TWO_PI_GHZ_US
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Populations {
    pub p_tminus: f64,
    pub p_target: f64,
    pub p_other: f64,
    pub p_tplus: f64,
}

impl Populations {
    pub const GROUND: Populations = Populations {
        p_tminus: 1.0,
        p_target: 0.0,
        p_other: 0.0,
        p_tplus: 0.0,
    };

    pub fn new(p_tminus: f64, p_target: f64, p_other: f64, p_tplus: f64) -> Result<Self> {
        let p = Self {
            p_tminus,
            p_target,
            p_other,
            p_tplus,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.to_array();
        if a.iter().any(|&v| !(-1e-12..=1.0 + 1e-12).contains(&v)) {
            return Err(Error::InvalidState("populations must lie in [0, 1]".into()));
        }
        let s: f64 = a.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidState(alloc::format!(
                "populations sum to {s}"
            )));
        }
        Ok(())
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.p_tminus, self.p_target, self.p_other, self.p_tplus]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self {
            p_tminus: a[0],
            p_target: a[1],
            p_other: a[2],
            p_tplus: a[3],
        }
    }

    fn vector(&self) -> Vector4<f64> {
        Vector4::from(self.to_array())
    }

    fn from_vector(v: &Vector4<f64>) -> Self {
        Self::from_array([v[0], v[1], v[2], v[3]])
    }
}

/// Time derivative (1/μs).
pub fn rate_rhs(p: &Populations, m: &RateModel) -> [f64; 4] {
    let d = m.matrix() * p.vector();
    [d[0], d[1], d[2], d[3]]
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub pops: Vec<Populations>,
}

fn check_grid(times: &[f64]) -> Result<()> {
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

/// RK4 integration from `p0` at `t = 0`.
pub fn evolve_rates(p0: &Populations, m: &RateModel, times: &[f64]) -> Result<Trajectory> {
    p0.validate()?;
    m.validate()?;
    check_grid(times)?;
    let a = m.matrix();
    let scale = a.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let hmax = if scale > 0.0 {
        0.02 / scale
    } else {
        f64::INFINITY
    };
    let mut x = p0.vector();
    let mut t = 0.0;
    let mut pops = Vec::with_capacity(times.len());
    for &target in times {
        let span = target - t;
        if span > 0.0 {
            let n = if hmax.is_finite() {
                (span / hmax).ceil().max(1.0) as usize
            } else {
                1
            };
            let h = span / n as f64;
            for _ in 0..n {
                let k1 = a * x;
                let k2 = a * (x + k1 * (0.5 * h));
                let k3 = a * (x + k2 * (0.5 * h));
                let k4 = a * (x + k3 * h);
                x += (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0);
            }
            t = target;
        }
        pops.push(Populations::from_vector(&x));
    }
    Ok(Trajectory {
        times: times.to_vec(),
        pops,
    })
}

/// Exact propagation by matrix exponentials; equal steps reuse one exponential.
pub fn propagate_exact(p0: &Populations, m: &RateModel, times: &[f64]) -> Vec<Populations> {
    let a = m.matrix();
    let mut x = p0.vector();
    let mut t = 0.0;
    let mut cache: Option<(f64, Matrix4<f64>)> = None;
    let mut out = Vec::with_capacity(times.len());
    for &tt in times {
        let dt = tt - t;
        if dt > 0.0 {
            let hit = matches!(cache, Some((d, _)) if (d - dt).abs() <= 1e-12 * dt);
            if !hit {
                cache = Some((dt, crate::space::expm(&(a * dt))));
            }
            x = cache.unwrap().1 * x;
            t = tt;
        }
        out.push(Populations::from_vector(&x));
    }
    out
}

/// Normalized null vector of the rate matrix.
pub fn steady_state_rates(m: &RateModel) -> Result<Populations> {
    m.validate()?;
    let mut a = m.matrix() / TWO_PI_GHZ_US;
    for k in 0..4 {
        a[(0, k)] = 1.0;
    }
    let b = Vector4::new(1.0, 0.0, 0.0, 0.0);
    let lu = a.lu();
    let u = lu.u();
    let dmax = (0..4).map(|i| u[(i, i)].abs()).fold(0.0, f64::max);
    let dmin = (0..4)
        .map(|i| u[(i, i)].abs())
        .fold(f64::INFINITY, f64::min);
    if !(dmin > 1e-13 * dmax) {
        return Err(Error::NonUniqueSteadyState(if dmax > 0.0 {
            dmin / dmax
        } else {
            0.0
        }));
    }
    let x = lu.solve(&b).ok_or(Error::NonUniqueSteadyState(0.0))?;
    Ok(Populations::from_vector(&x))
}

/// Observed data for a fit.
#[derive(Debug, Clone, PartialEq)]
pub enum FitData {
    /// All four populations per time.
    Populations(Vec<Populations>),
    /// Target fidelity only.
    Fidelity(Vec<f64>),
}

impl FitData {
    pub fn len(&self) -> usize {
        match self {
            FitData::Populations(v) => v.len(),
            FitData::Fidelity(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Rates held at their initial value are `false`.
    pub free: [bool; 4],
    pub initial_populations: Populations,
    pub max_evaluations: usize,
    /// Convergence on the simplex diameter in log-rate space.
    pub xtol: f64,
    pub restarts: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            free: [true; 4],
            initial_populations: Populations::GROUND,
            max_evaluations: 20_000,
            xtol: 1e-9,
            restarts: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub model: RateModel,
    /// One-sigma errors from the residual-scaled Gauss–Newton covariance;
    /// zero for fixed rates.
    pub stderr: [f64; 4],
    pub rss: f64,
    pub r_squared: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FitError {
    TooFewPoints(usize),
    InvalidInput(Error),
    /// Evaluation budget exhausted; carries the best point found.
    NotConverged(Box<FitReport>),
}

impl From<FitError> for Error {
    fn from(e: FitError) -> Self {
        match e {
            FitError::TooFewPoints(n) => {
                Error::InvalidParameter(alloc::format!("fit needs >= 10 points, got {n}"))
            }
            FitError::InvalidInput(e) => e,
            FitError::NotConverged(r) => Error::FitFailure {
                iterations: r.evaluations,
                cost: r.rss,
            },
        }
    }
}

fn residuals(times: &[f64], data: &FitData, m: &RateModel, p0: &Populations, out: &mut Vec<f64>) {
    out.clear();
    let pred = propagate_exact(p0, m, times);
    match data {
        FitData::Populations(obs) => {
            for (p, o) in pred.iter().zip(obs) {
                let (a, b) = (p.to_array(), o.to_array());
                for k in 0..4 {
                    out.push(a[k] - b[k]);
                }
            }
        }
        FitData::Fidelity(obs) => {
            for (p, o) in pred.iter().zip(obs) {
                out.push(p.p_target - o);
            }
        }
    }
}

fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    f: &mut F,
    x0: &[f64],
    step: f64,
    xtol: f64,
    max_eval: usize,
    evals: &mut usize,
) -> (Vec<f64>, f64, bool) {
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        simplex.push(x);
    }
    let mut fv: Vec<f64> = simplex.iter().map(|x| f(x)).collect();
    *evals += n + 1;
    loop {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| {
            fv[a]
                .partial_cmp(&fv[b])
                .unwrap_or(core::cmp::Ordering::Equal)
        });
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        fv = order.iter().map(|&i| fv[i]).collect();
        let diam = simplex[1..]
            .iter()
            .map(|x| {
                x.iter()
                    .zip(&simplex[0])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if diam < xtol {
            return (simplex[0].clone(), fv[0], true);
        }
        if *evals >= max_eval {
            return (simplex[0].clone(), fv[0], false);
        }
        let mut c = alloc::vec![0.0; n];
        for x in &simplex[..n] {
            for k in 0..n {
                c[k] += x[k] / n as f64;
            }
        }
        let along =
            |t: f64| -> Vec<f64> { (0..n).map(|k| c[k] + t * (simplex[n][k] - c[k])).collect() };
        let xr = along(-1.0);
        let fr = f(&xr);
        *evals += 1;
        if fr < fv[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            *evals += 1;
            if fe < fr {
                simplex[n] = xe;
                fv[n] = fe;
            } else {
                simplex[n] = xr;
                fv[n] = fr;
            }
        } else if fr < fv[n - 1] {
            simplex[n] = xr;
            fv[n] = fr;
        } else {
            let (xc, fc) = if fr < fv[n] {
                let x = along(-0.5);
                let v = f(&x);
                (x, v)
            } else {
                let x = along(0.5);
                let v = f(&x);
                (x, v)
            };
            *evals += 1;
            if fc < fv[n].min(fr) {
                simplex[n] = xc;
                fv[n] = fc;
            } else {
                for i in 1..=n {
                    for k in 0..n {
                        simplex[i][k] = simplex[0][k] + 0.5 * (simplex[i][k] - simplex[0][k]);
                    }
                    fv[i] = f(&simplex[i]);
                }
                *evals += n;
            }
        }
    }
}

/// Least-squares fit of the rate model by a Nelder–Mead simplex on the
/// logarithms of the free rates.
pub fn fit_rates(
    times: &[f64],
    data: &FitData,
    init: &RateModel,
    opts: &FitOptions,
) -> core::result::Result<FitReport, FitError> {
    if data.len() != times.len() {
        return Err(FitError::InvalidInput(Error::DimensionMismatch {
            expected: times.len(),
            found: data.len(),
        }));
    }
    if times.len() < 10 {
        return Err(FitError::TooFewPoints(times.len()));
    }
    check_grid(times).map_err(FitError::InvalidInput)?;
    init.validate().map_err(FitError::InvalidInput)?;
    let base = init.to_array();
    let free: Vec<usize> = (0..4).filter(|&k| opts.free[k]).collect();
    let floor = 1e-12;
    let model_of = |x: &[f64]| {
        let mut a = base;
        for (i, &k) in free.iter().enumerate() {
            a[k] = x[i].exp();
        }
        RateModel::from_array(a)
    };
    let mut buf = Vec::new();
    let p0 = opts.initial_populations;
    let mut cost = |x: &[f64]| {
        let m = model_of(x);
        residuals(times, data, &m, &p0, &mut buf);
        let s: f64 = buf.iter().map(|r| r * r).sum();
        if s.is_finite() {
            s
        } else {
            f64::MAX
        }
    };
    let mut x: Vec<f64> = free.iter().map(|&k| base[k].max(floor).ln()).collect();
    let mut evals = 0;
    let mut converged = free.is_empty();
    let mut best = cost(&x);
    if !free.is_empty() {
        for round in 0..=opts.restarts {
            let step = if round == 0 { 0.5 } else { 0.1 };
            let (xn, fnew, ok) = nelder_mead(
                &mut cost,
                &x,
                step,
                opts.xtol,
                opts.max_evaluations,
                &mut evals,
            );
            x = xn;
            best = fnew;
            converged = ok;
            if !ok {
                break;
            }
        }
    }
    let model = model_of(&x);
    // Covariance from the finite-difference Jacobian in linear rates.
    let mut r0 = Vec::new();
    residuals(times, data, &model, &p0, &mut r0);
    let nres = r0.len();
    let k = free.len();
    let mut stderr = [0.0; 4];
    if k > 0 && nres > k {
        let mut jac = nalgebra::DMatrix::<f64>::zeros(nres, k);
        let mut rp = Vec::new();
        for (col, &idx) in free.iter().enumerate() {
            let mut a = model.to_array();
            let h = (a[idx] * 1e-6).max(1e-14);
            a[idx] += h;
            residuals(times, data, &RateModel::from_array(a), &p0, &mut rp);
            for row in 0..nres {
                jac[(row, col)] = (rp[row] - r0[row]) / h;
            }
        }
        let jtj = jac.transpose() * &jac;
        let s2 = best / (nres - k) as f64;
        if let Some(inv) = jtj.try_inverse() {
            for (col, &idx) in free.iter().enumerate() {
                stderr[idx] = (s2 * inv[(col, col)]).max(0.0).sqrt();
            }
        }
    }
    let tss = total_sum_of_squares(data);
    let r_squared = if tss > 0.0 { 1.0 - best / tss } else { 1.0 };
    let report = FitReport {
        model,
        stderr,
        rss: best,
        r_squared,
        evaluations: evals,
    };
    if converged {
        Ok(report)
    } else {
        Err(FitError::NotConverged(Box::new(report)))
    }
}

fn total_sum_of_squares(data: &FitData) -> f64 {
    let ss = |v: &mut dyn Iterator<Item = f64>, n: usize| {
        let xs: Vec<f64> = v.collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
    };
    match data {
        FitData::Fidelity(v) => ss(&mut v.iter().copied(), v.len()),
        FitData::Populations(v) => (0..4)
            .map(|k| ss(&mut v.iter().map(|p| p.to_array()[k]), v.len()))
            .sum(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::rate_from_lifetime;

    fn model() -> RateModel {
        let g1 = rate_from_lifetime(10.0);
        RateModel {
            gamma_p: 5.0 * g1,
            gamma_p_prime: 0.3 * g1,
            gamma_1: g1,
            gamma_phi: 0.4 * g1,
        }
    }

    fn grid() -> Vec<f64> {
        (0..=40).map(|k| 0.5 * k as f64).collect()
    }

    #[test]
    fn zero_rates_and_conservation() {
        let p = Populations::new(0.4, 0.3, 0.2, 0.1).unwrap();
        assert_eq!(rate_rhs(&p, &RateModel::default()), [0.0; 4]);
        let d = rate_rhs(&p, &model());
        assert!(d.iter().sum::<f64>().abs() < 1e-15);
    }

    #[test]
    fn two_level_limit() {
        let g1 = rate_from_lifetime(10.0);
        let m = RateModel {
            gamma_p: 7.0 * g1,
            gamma_p_prime: 0.0,
            gamma_1: g1,
            gamma_phi: 0.0,
        };
        let ss = steady_state_rates(&m).unwrap();
        assert!((ss.p_target - 7.0 / 8.0).abs() < 1e-12);
        let t = grid();
        let tr = evolve_rates(&Populations::GROUND, &m, &t).unwrap();
        for (t, p) in t.iter().zip(&tr.pops) {
            let oracle = 7.0 / 8.0 * (1.0 - (-TWO_PI_GHZ_US * 8.0 * g1 * t).exp());
            assert!((p.p_target - oracle).abs() < 1e-6);
        }
    }

    #[test]
    fn steady_start_stays_put_and_overshoot_exists() {
        let m = model();
        let ss = steady_state_rates(&m).unwrap();
        let tr = evolve_rates(&ss, &m, &grid()).unwrap();
        for p in &tr.pops {
            assert!((p.p_target - ss.p_target).abs() < 1e-10);
        }
        let m = RateModel {
            gamma_p: 30.0 * m.gamma_1,
            gamma_phi: 2.0 * m.gamma_1,
            ..m
        };
        let ss = steady_state_rates(&m).unwrap();
        let t: Vec<f64> = (0..=400).map(|k| 0.05 * k as f64).collect();
        let tr = evolve_rates(&Populations::GROUND, &m, &t).unwrap();
        let peak = tr.pops.iter().map(|p| p.p_target).fold(0.0, f64::max);
        assert!(peak > ss.p_target + 1e-4, "{peak} vs {}", ss.p_target);
        assert!(steady_state_rates(&RateModel::default()).is_err());
    }

    #[test]
    fn exact_and_rk4_agree() {
        let m = model();
        let t = grid();
        let a = evolve_rates(&Populations::GROUND, &m, &t).unwrap();
        let b = propagate_exact(&Populations::GROUND, &m, &t);
        for (x, y) in a.pops.iter().zip(&b) {
            for k in 0..4 {
                assert!((x.to_array()[k] - y.to_array()[k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn noiseless_fit_recovers_rates() {
        let m = model();
        let t = grid();
        let tr = evolve_rates(&Populations::GROUND, &m, &t).unwrap();
        let init = RateModel::from_array(m.to_array().map(|v| v * 1.7));
        let fit = fit_rates(
            &t,
            &FitData::Populations(tr.pops),
            &init,
            &FitOptions::default(),
        )
        .unwrap();
        for (a, b) in fit.model.to_array().iter().zip(m.to_array()) {
            assert!((a - b).abs() / b < 0.01, "{a} vs {b}");
        }
        assert!(fit.r_squared > 0.999999);
    }

    #[test]
    fn fit_input_errors() {
        let t = [0.0, 1.0];
        let r = fit_rates(
            &t,
            &FitData::Fidelity(alloc::vec![0.0, 0.1]),
            &model(),
            &FitOptions::default(),
        );
        assert!(matches!(r, Err(FitError::TooFewPoints(2))));
        let t = grid();
        let tr = evolve_rates(&Populations::GROUND, &model(), &t).unwrap();
        let opts = FitOptions {
            max_evaluations: 10,
            ..Default::default()
        };
        let init = RateModel::from_array(model().to_array().map(|v| v * 3.0));
        match fit_rates(&t, &FitData::Populations(tr.pops), &init, &opts) {
            Err(FitError::NotConverged(best)) => assert!(best.rss.is_finite()),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
