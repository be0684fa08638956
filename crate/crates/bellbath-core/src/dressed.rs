//! Master equation in the eigenbasis of a time-independent Hamiltonian with a
//! partial secular approximation. Eigenlevels closer than `cutoff` form
//! clusters; the dissipator is averaged over the cluster-center rotation, so
//! every block of coherences between two clusters evolves on its own and all
//! intra-cluster coherences form one slow block with the populations. The
//! result is again of Lindblad form.
//!
//! With `cutoff = ∞` the propagator is the exact Liouvillian in a rotated basis.

use alloc::vec;
use alloc::vec::Vec;
use num_traits::Zero;

use crate::device::eigh;
use crate::lindblad::CollapseChannel;
use crate::observables::Bell;
use crate::space::{expm, hermitize, max_abs};
use crate::units::TWO_PI_GHZ_US;
use crate::{CMat, CVec, Error, Result, C64};

/// Default secular cutoff (GHz), far above every dissipative rate and far
/// below every cavity or drive detuning.
pub const DEFAULT_CUTOFF: f64 = 0.01;

/// Coherences `(m, k)` with `m` in one cluster and `k` in another, and their generator.
#[derive(Debug, Clone)]
struct Block {
    pairs: Vec<(usize, usize)>,
    gen: CMat,
}

#[derive(Debug, Clone)]
pub struct DressedPropagator {
    energies: Vec<f64>,
    vecs: CMat,
    slow: Vec<(usize, usize)>,
    ls: CMat,
    blocks: Vec<Block>,
    cutoff: f64,
}

/// Generator restricted to `pairs`, in units of rad/μs.
fn block_generator(pairs: &[(usize, usize)], energies: &[f64], lc: &[(f64, CMat, CMat)]) -> CMat {
    let ms = pairs.len();
    let mut g = CMat::zeros(ms, ms);
    for (r, c, cdc) in lc {
        for (row, &(m, k)) in pairs.iter().enumerate() {
            for (col, &(p, q)) in pairs.iter().enumerate() {
                let mut v = c[(m, p)] * c[(k, q)].conj();
                if k == q {
                    v -= cdc[(m, p)] * 0.5;
                }
                if m == p {
                    v -= cdc[(q, k)] * 0.5;
                }
                g[(row, col)] += v * *r;
            }
        }
    }
    for (row, &(m, k)) in pairs.iter().enumerate() {
        g[(row, row)] += C64::new(0.0, -(energies[m] - energies[k]));
    }
    g * C64::new(TWO_PI_GHZ_US, 0.0)
}

impl DressedPropagator {
    pub fn new(h: &CMat, channels: &[CollapseChannel], cutoff: f64) -> Result<Self> {
        let n = h.nrows();
        if !(cutoff > 0.0) {
            return Err(Error::InvalidParameter("secular cutoff must be > 0".into()));
        }
        for c in channels {
            if c.op.nrows() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: c.op.nrows(),
                });
            }
        }
        let (energies, vecs) = eigh(h);
        let vd = vecs.adjoint();
        let lc: Vec<(f64, CMat, CMat)> = channels
            .iter()
            .filter(|c| c.rate > 0.0)
            .map(|c| {
                let ct = &vd * &c.op * &vecs;
                let cdc = ct.adjoint() * &ct;
                (c.rate, ct, cdc)
            })
            .collect();
        // energies are ascending
        let mut clusters: Vec<Vec<usize>> = Vec::new();
        for i in 0..n {
            match clusters.last_mut() {
                Some(c) if energies[i] - energies[i - 1] < cutoff => c.push(i),
                _ => clusters.push(vec![i]),
            }
        }
        let mut slow = Vec::new();
        for c in &clusters {
            for &m in c {
                for &k in c {
                    slow.push((m, k));
                }
            }
        }
        let ls = block_generator(&slow, &energies, &lc);
        let mut blocks = Vec::new();
        for (a, ca) in clusters.iter().enumerate() {
            for (b, cb) in clusters.iter().enumerate() {
                if a == b {
                    continue;
                }
                let pairs: Vec<(usize, usize)> = ca
                    .iter()
                    .flat_map(|&m| cb.iter().map(move |&k| (m, k)))
                    .collect();
                let gen = block_generator(&pairs, &energies, &lc);
                blocks.push(Block { pairs, gen });
            }
        }
        Ok(Self {
            energies,
            vecs,
            slow,
            ls,
            blocks,
            cutoff,
        })
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Eigenvectors as columns.
    pub fn eigenvectors(&self) -> &CMat {
        &self.vecs
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    /// Number of coherences in the block that holds the populations.
    pub fn slow_dim(&self) -> usize {
        self.slow.len()
    }

    pub fn to_eigenbasis(&self, rho: &CMat) -> CMat {
        self.vecs.adjoint() * rho * &self.vecs
    }

    pub fn from_eigenbasis(&self, rd: &CMat) -> CMat {
        &self.vecs * rd * self.vecs.adjoint()
    }

    /// Populations of the eigenstates.
    pub fn populations(&self, rho: &CMat) -> Vec<f64> {
        let rd = self.to_eigenbasis(rho);
        (0..rd.nrows()).map(|i| rd[(i, i)].re).collect()
    }

    /// States at the requested times (μs) in the original basis.
    pub fn evolve(&self, rho0: &CMat, times: &[f64]) -> Result<Vec<CMat>> {
        let n = self.vecs.nrows();
        if rho0.nrows() != n || rho0.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: rho0.nrows(),
            });
        }
        let step = |g: &CMat, dt: f64| {
            if g.nrows() == 1 {
                CMat::from_element(1, 1, (g[(0, 0)] * dt).exp())
            } else {
                expm(&(g * C64::new(dt, 0.0)))
            }
        };
        let mut rd = self.to_eigenbasis(rho0);
        let gather = |rd: &CMat, pairs: &[(usize, usize)]| {
            CVec::from_iterator(pairs.len(), pairs.iter().map(|&(m, k)| rd[(m, k)]))
        };
        let mut t_prev = 0.0;
        let mut cache: Option<(f64, CMat, Vec<CMat>)> = None;
        let mut out = Vec::with_capacity(times.len());
        for &t in times {
            if !(t >= t_prev) || !t.is_finite() {
                return Err(Error::InvalidParameter(
                    "time grid must be finite, >= 0 and non-decreasing".into(),
                ));
            }
            let dt = t - t_prev;
            if dt > 0.0 {
                let reuse = matches!(&cache, Some((d, _, _)) if (d - dt).abs() <= 1e-12 * dt);
                if !reuse {
                    let ps = step(&self.ls, dt);
                    let pb = self.blocks.iter().map(|b| step(&b.gen, dt)).collect();
                    cache = Some((dt, ps, pb));
                }
                let (_, ps, pb) = cache.as_ref().unwrap();
                let x = ps * gather(&rd, &self.slow);
                for (i, &(m, k)) in self.slow.iter().enumerate() {
                    rd[(m, k)] = x[i];
                }
                for (b, p) in self.blocks.iter().zip(pb) {
                    let x = p * gather(&rd, &b.pairs);
                    for (i, &(m, k)) in b.pairs.iter().enumerate() {
                        rd[(m, k)] = x[i];
                    }
                }
            }
            t_prev = t;
            let mut rho = self.from_eigenbasis(&rd);
            hermitize(&mut rho);
            out.push(rho);
        }
        Ok(out)
    }

    /// Trace-one null vector of the slow block; fast coherences vanish.
    pub fn steady_state(&self) -> Result<CMat> {
        let ms = self.slow.len();
        let n = self.vecs.nrows();
        let scale = max_abs(&self.ls).max(1e-300);
        let mut a = &self.ls / C64::new(scale, 0.0);
        for k in 0..ms {
            a[(0, k)] = C64::zero();
        }
        for (i, &(m, k)) in self.slow.iter().enumerate() {
            if m == k {
                a[(0, i)] = C64::new(1.0, 0.0);
            }
        }
        let mut b = CVec::zeros(ms);
        b[0] = C64::new(1.0, 0.0);
        let lu = a.clone().lu();
        let u = lu.u();
        let dmax = (0..ms).map(|i| u[(i, i)].norm()).fold(0.0, f64::max);
        let dmin = (0..ms)
            .map(|i| u[(i, i)].norm())
            .fold(f64::INFINITY, f64::min);
        if dmin < 1e-13 * dmax {
            return Err(Error::NonUniqueSteadyState(dmin / dmax));
        }
        let mut x = lu.solve(&b).ok_or(Error::NonUniqueSteadyState(0.0))?;
        let r = &b - &a * &x;
        if let Some(dx) = lu.solve(&r) {
            x += dx;
        }
        let mut rd = CMat::zeros(n, n);
        for (i, &(m, k)) in self.slow.iter().enumerate() {
            rd[(m, k)] = x[i];
        }
        let mut rho = self.from_eigenbasis(&rd);
        hermitize(&mut rho);
        Ok(rho)
    }

    /// Residual `max |L_slow x|` of a state, in units of the slow-block scale.
    pub fn residual(&self, rho: &CMat) -> f64 {
        let rd = self.to_eigenbasis(rho);
        let x = CVec::from_iterator(self.slow.len(), self.slow.iter().map(|&(m, k)| rd[(m, k)]));
        let scale = max_abs(&self.ls).max(1e-300);
        let r = &self.ls * x;
        r.iter().map(|z| z.norm()).fold(0.0, f64::max) / scale
    }
}

/// Dominant qubit-sector Bell label of each eigenvector, by the weight
/// `Σ_n |⟨n, b|k⟩|²` over cavity states `n`. Qubits are the last two slots.
pub fn bell_labels(vecs: &CMat) -> Vec<Bell> {
    let n = vecs.nrows();
    let mut out = vec![Bell::TMinus; vecs.ncols()];
    for (k, lab) in out.iter_mut().enumerate() {
        let mut best = (Bell::TMinus, -1.0);
        for b in Bell::ALL {
            let q = b.vector();
            let mut w = 0.0;
            for c in 0..n / 4 {
                let mut amp = C64::zero();
                for (qi, qa) in q.iter().enumerate() {
                    amp += qa.conj() * vecs[(4 * c + qi, k)];
                }
                w += amp.norm_sqr();
            }
            if w > best.1 {
                best = (b, w);
            }
        }
        *lab = best.0;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{build_hamiltonian, DeviceParams, DriveParams, Frame, SystemOps};
    use crate::lindblad::{default_channels, evolve, steady_state, EvolveOptions};

    fn setup() -> (CMat, Vec<CollapseChannel>, CMat) {
        let ops = SystemOps::new(1).unwrap();
        let dev = DeviceParams {
            gamma_1: 2e-4,
            gamma_phi: 1e-4,
            kappa_plus: 0.003,
            kappa_minus: 0.003,
            ..DeviceParams::default()
        };
        let drv = DriveParams::balanced(6.57, 0.06, 0.3);
        let h = build_hamiltonian(&dev, &drv, Frame::DriveRotating, &ops)
            .unwrap()
            .into_matrix();
        let n = ops.dim();
        let mut rho0 = CMat::zeros(n, n);
        rho0[(0, 0)] = C64::new(1.0, 0.0);
        (h, default_channels(&dev, &ops), rho0)
    }

    #[test]
    fn infinite_cutoff_reproduces_lindblad() {
        let (h, ch, rho0) = setup();
        let p = DressedPropagator::new(&h, &ch, f64::INFINITY).unwrap();
        assert_eq!(p.slow_dim(), h.nrows() * h.nrows());
        let times = [0.05, 0.1];
        let d = p.evolve(&rho0, &times).unwrap();
        let ev = evolve(&h, &ch, &rho0, &times, &EvolveOptions::default()).unwrap();
        for (a, b) in d.iter().zip(&ev.states) {
            assert!(max_abs(&(a - b)) < 1e-7, "{}", max_abs(&(a - b)));
        }
    }

    #[test]
    fn steady_states_agree() {
        let (h, ch, _) = setup();
        let exact = steady_state(&h, &ch).unwrap();
        let full = DressedPropagator::new(&h, &ch, f64::INFINITY)
            .unwrap()
            .steady_state()
            .unwrap();
        assert!(max_abs(&(&full - &exact)) < 1e-8);
        let sec = DressedPropagator::new(&h, &ch, DEFAULT_CUTOFF).unwrap();
        let approx = sec.steady_state().unwrap();
        assert!(max_abs(&(&approx - &exact)) < 1e-2);
        assert!(sec.residual(&approx) < 1e-10);
    }

    #[test]
    fn labels_of_bare_basis() {
        let ops = SystemOps::new(1).unwrap();
        let id = CMat::identity(ops.dim(), ops.dim());
        let l = bell_labels(&id);
        assert_eq!(l[0], Bell::TMinus);
        assert_eq!(l[3], Bell::TPlus);
    }
}
