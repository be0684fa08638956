//! Qubit-sector states, Bell fidelities, Pauli tomography and concurrence.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::FRAC_1_SQRT_2;
#[allow(unused_imports)]
use num_traits::Float;
use num_traits::Zero;
use rand::Rng;

use crate::device::eigh;
use crate::space::{
    hermiticity_error, kron, min_eigenvalue, pauli_matrix, HilbertSpace, Operator, Pauli, State,
};
use crate::{CMat, Error, Result, C64};

/// Basis states of the two-qubit sector, ordered `|gg⟩, |ge⟩, |eg⟩, |ee⟩`
/// (qubit A is the left factor).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Bell {
    TMinus,
    T0,
    S,
    TPlus,
}

impl Bell {
    pub const ALL: [Bell; 4] = [Bell::TMinus, Bell::T0, Bell::S, Bell::TPlus];

    /// `T0 = (|eg⟩ + |ge⟩)/√2`, `S = (|eg⟩ − |ge⟩)/√2`.
    pub fn vector(self) -> [C64; 4] {
        let z = C64::zero();
        let o = C64::new(1.0, 0.0);
        let h = C64::new(FRAC_1_SQRT_2, 0.0);
        match self {
            Bell::TMinus => [o, z, z, z],
            Bell::T0 => [z, h, h, z],
            Bell::S => [z, -h, h, z],
            Bell::TPlus => [z, z, z, o],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Bell::TMinus => "Tminus",
            Bell::T0 => "T0",
            Bell::S => "S",
            Bell::TPlus => "Tplus",
        }
    }
}

/// Two-qubit density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitState {
    rho: CMat,
}

impl TwoQubitState {
    pub fn new(rho: CMat) -> Result<Self> {
        let s = State::from_density(
            HilbertSpace::new(
                alloc::vec![2, 2],
                alloc::vec!["qubit_A".into(), "qubit_B".into()],
            )?,
            rho,
        )?;
        Ok(Self {
            rho: s.into_density(),
        })
    }

    pub fn from_pure(psi: &[C64; 4]) -> Result<Self> {
        let v = crate::CVec::from_column_slice(psi);
        Self::new(&v * v.adjoint())
    }

    pub fn bell(b: Bell) -> Self {
        Self::from_pure(&b.vector()).expect("Bell states are valid")
    }

    pub fn maximally_mixed() -> Self {
        Self {
            rho: CMat::identity(4, 4) * C64::new(0.25, 0.0),
        }
    }

    pub fn density(&self) -> &CMat {
        &self.rho
    }

    pub fn purity(&self) -> f64 {
        (&self.rho * &self.rho).trace().re
    }

    /// Qubit sector of a full cavity-qubit state: both cavities traced out.
    pub fn from_full(rho: &CMat) -> Result<Self> {
        let n = rho.nrows();
        if n % 4 != 0 || rho.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: 4 * (n / 4),
                found: n,
            });
        }
        Ok(Self {
            rho: qubit_reduce(rho),
        })
    }
}

/// Partial trace over the leading cavity factor of a `(cavities) ⊗ (4)` matrix.
pub fn qubit_reduce(rho: &CMat) -> CMat {
    let blocks = rho.nrows() / 4;
    CMat::from_fn(4, 4, |i, j| {
        (0..blocks).map(|c| rho[(4 * c + i, 4 * c + j)]).sum()
    })
}

/// Partial trace keeping the listed subsystem slots, in increasing order.
pub fn partial_trace(state: &State, keep: &[usize]) -> Result<State> {
    let space = state.space();
    let dims = space.dims();
    if keep.is_empty() {
        return Err(Error::InvalidParameter(
            "keep must list at least one subsystem".into(),
        ));
    }
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    if kept.len() != keep.len() {
        return Err(Error::InvalidParameter(
            "duplicate subsystem in keep".into(),
        ));
    }
    if let Some(&bad) = kept.iter().find(|&&k| k >= dims.len()) {
        return Err(Error::SlotOutOfRange {
            slot: bad,
            slots: dims.len(),
        });
    }
    let kd: Vec<usize> = kept.iter().map(|&k| dims[k]).collect();
    let labels = kept.iter().map(|&k| space.labels()[k].clone()).collect();
    let out_space = HilbertSpace::new(kd.clone(), labels)?;
    let m = out_space.total_dim();
    let n = space.total_dim();
    let rho = state.density();
    let mut out = CMat::zeros(m, m);
    let traced: Vec<usize> = (0..dims.len()).filter(|k| !kept.contains(k)).collect();
    // Split every flat index into kept and traced parts.
    let mut kept_idx = alloc::vec![0usize; n];
    let mut traced_idx = alloc::vec![0usize; n];
    for f in 0..n {
        let mi = space.multi_index(f);
        kept_idx[f] = kept.iter().fold(0, |acc, &k| acc * dims[k] + mi[k]);
        traced_idx[f] = traced.iter().fold(0, |acc, &k| acc * dims[k] + mi[k]);
    }
    for i in 0..n {
        for j in 0..n {
            if traced_idx[i] == traced_idx[j] {
                out[(kept_idx[i], kept_idx[j])] += rho[(i, j)];
            }
        }
    }
    Ok(State::from_density_unchecked(out_space, out))
}

/// `⟨ψ|ρ|ψ⟩` for a normalized target.
pub fn fidelity(state: &TwoQubitState, target: &[C64; 4]) -> Result<f64> {
    let norm: f64 = target.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::Unnormalized(norm));
    }
    let v = crate::CVec::from_column_slice(target);
    let f = (v.adjoint() * state.density() * &v)[(0, 0)];
    if f.im.abs() > 1e-10 {
        return Err(Error::InvalidState(format!(
            "fidelity has imaginary part {:e}",
            f.im
        )));
    }
    Ok(f.re.clamp(0.0, 1.0))
}

/// Fidelities with the four basis targets.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BellFidelities {
    pub s: f64,
    pub t0: f64,
    pub t_minus: f64,
    pub t_plus: f64,
}

impl BellFidelities {
    pub fn get(&self, b: Bell) -> f64 {
        match b {
            Bell::S => self.s,
            Bell::T0 => self.t0,
            Bell::TMinus => self.t_minus,
            Bell::TPlus => self.t_plus,
        }
    }

    pub fn sum(&self) -> f64 {
        self.s + self.t0 + self.t_minus + self.t_plus
    }
}

/// Bell fidelities of a 4×4 qubit matrix, without validation.
pub fn bell_fidelities(rho4: &CMat) -> BellFidelities {
    let f = |b: Bell| {
        let v = crate::CVec::from_column_slice(&b.vector());
        (v.adjoint() * rho4 * &v)[(0, 0)].re
    };
    BellFidelities {
        s: f(Bell::S),
        t0: f(Bell::T0),
        t_minus: f(Bell::TMinus),
        t_plus: f(Bell::TPlus),
    }
}

const PAULIS: [Option<Pauli>; 4] = [None, Some(Pauli::X), Some(Pauli::Y), Some(Pauli::Z)];

fn pauli_or_identity(p: Option<Pauli>) -> CMat {
    match p {
        None => CMat::identity(2, 2),
        Some(p) => pauli_matrix(p),
    }
}

/// `σ_i ⊗ σ_j` with `i, j ∈ {I, X, Y, Z}` indexed 0..4.
pub fn pauli_pair(i: usize, j: usize) -> CMat {
    let a = Operator::from_matrix(pauli_or_identity(PAULIS[i])).unwrap();
    let b = Operator::from_matrix(pauli_or_identity(PAULIS[j])).unwrap();
    kron(&a, &b).into_matrix()
}

/// Labels of the 15 non-trivial Pauli pairs in the order used below.
pub const PAULI_LABELS: [&str; 15] = [
    "IX", "IY", "IZ", "XI", "XX", "XY", "XZ", "YI", "YX", "YY", "YZ", "ZI", "ZX", "ZY", "ZZ",
];

/// `⟨σ_i ⊗ σ_j⟩` for every pair except `I⊗I`, row-major in `(i, j)`.
pub fn pauli_expectations(state: &TwoQubitState) -> [f64; 15] {
    let mut out = [0.0; 15];
    let mut k = 0;
    for i in 0..4 {
        for j in 0..4 {
            if i == 0 && j == 0 {
                continue;
            }
            out[k] = (pauli_pair(i, j) * state.density()).trace().re;
            k += 1;
        }
    }
    out
}

/// Linear inversion `ρ = (I⊗I + Σ ⟨P⟩ P)/4`.
pub fn reconstruct(expectations: &[f64; 15]) -> CMat {
    let mut rho = CMat::identity(4, 4);
    let mut k = 0;
    for i in 0..4 {
        for j in 0..4 {
            if i == 0 && j == 0 {
                continue;
            }
            rho += pauli_pair(i, j) * C64::new(expectations[k], 0.0);
            k += 1;
        }
    }
    rho * C64::new(0.25, 0.0)
}

/// Exact tomography: Pauli expectations followed by linear inversion.
pub fn tomography_roundtrip(state: &TwoQubitState) -> TwoQubitState {
    TwoQubitState {
        rho: reconstruct(&pauli_expectations(state)),
    }
}

/// Result of simulated finite-shot tomography.
#[derive(Debug, Clone)]
pub struct ShotTomography {
    /// Reconstructed matrix; may have small negative eigenvalues.
    pub rho: CMat,
    pub expectations: [f64; 15],
    /// Standard error of each expectation.
    pub stderr: [f64; 15],
}

impl ShotTomography {
    /// Fidelity with `target` and its propagated statistical error.
    pub fn fidelity(&self, target: &[C64; 4]) -> (f64, f64) {
        let v = crate::CVec::from_column_slice(target);
        let f = (v.adjoint() * &self.rho * &v)[(0, 0)].re;
        let mut var = 0.0;
        let mut k = 0;
        for i in 0..4 {
            for j in 0..4 {
                if i == 0 && j == 0 {
                    continue;
                }
                let w = (v.adjoint() * pauli_pair(i, j) * &v)[(0, 0)].re * 0.25;
                var += (w * self.stderr[k]).powi(2);
                k += 1;
            }
        }
        (f, var.sqrt())
    }

    pub fn purity(&self) -> f64 {
        (&self.rho * &self.rho).trace().re
    }
}

fn rotation_to_z(p: Pauli) -> CMat {
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    let i = C64::new(0.0, 1.0);
    match p {
        // Hadamard maps X to Z.
        Pauli::X => CMat::from_row_slice(2, 2, &[h, h, h, -h]),
        // S† then Hadamard maps Y to Z.
        Pauli::Y => CMat::from_row_slice(2, 2, &[h, -i * h, h, i * h]),
        _ => CMat::identity(2, 2),
    }
}

/// Finite-shot tomography: each of the nine local bases `{X, Y, Z}⊗{X, Y, Z}`
/// is measured `shots` times; single-qubit terms are averaged over the three
/// settings that contain them.
pub fn tomography_shots<R: Rng + ?Sized>(
    state: &TwoQubitState,
    shots: usize,
    rng: &mut R,
) -> Result<ShotTomography> {
    if shots == 0 {
        return Err(Error::InvalidParameter("shots must be > 0".into()));
    }
    let axes = [Pauli::X, Pauli::Y, Pauli::Z];
    // sums[i][j] accumulates estimates of ⟨σ_i⊗σ_j⟩, counts[i][j] the settings used.
    let mut sums = [[0.0; 4]; 4];
    let mut counts = [[0usize; 4]; 4];
    for (ai, &pa) in axes.iter().enumerate() {
        for (bi, &pb) in axes.iter().enumerate() {
            let ua = Operator::from_matrix(rotation_to_z(pa)).unwrap();
            let ub = Operator::from_matrix(rotation_to_z(pb)).unwrap();
            let u = kron(&ua, &ub).into_matrix();
            let r = &u * state.density() * u.adjoint();
            let probs: [f64; 4] = core::array::from_fn(|k| r[(k, k)].re.max(0.0));
            let total: f64 = probs.iter().sum();
            let mut counts_k = [0usize; 4];
            for _ in 0..shots {
                let x: f64 = rng.random::<f64>() * total;
                let mut acc = 0.0;
                let mut pick = 3;
                for (k, p) in probs.iter().enumerate() {
                    acc += p;
                    if x < acc {
                        pick = k;
                        break;
                    }
                }
                counts_k[pick] += 1;
            }
            let freq: [f64; 4] = core::array::from_fn(|k| counts_k[k] as f64 / shots as f64);
            // Outcome k = 2·a + b with 0 ↦ eigenvalue −1 (|g⟩ has σz = −1).
            let sign = |bit: usize| if bit == 0 { -1.0 } else { 1.0 };
            let (i, j) = (ai + 1, bi + 1);
            let mut e_ab = 0.0;
            let mut e_a = 0.0;
            let mut e_b = 0.0;
            for (k, f) in freq.iter().enumerate() {
                let (a, b) = (k / 2, k % 2);
                e_ab += f * sign(a) * sign(b);
                e_a += f * sign(a);
                e_b += f * sign(b);
            }
            sums[i][j] += e_ab;
            counts[i][j] += 1;
            sums[i][0] += e_a;
            counts[i][0] += 1;
            sums[0][j] += e_b;
            counts[0][j] += 1;
        }
    }
    let mut expectations = [0.0; 15];
    let mut stderr = [0.0; 15];
    let mut k = 0;
    for i in 0..4 {
        for j in 0..4 {
            if i == 0 && j == 0 {
                continue;
            }
            let n = counts[i][j] as f64;
            let e = sums[i][j] / n;
            expectations[k] = e;
            stderr[k] = ((1.0 - e * e).max(0.0) / (n * shots as f64)).sqrt();
            k += 1;
        }
    }
    Ok(ShotTomography {
        rho: reconstruct(&expectations),
        expectations,
        stderr,
    })
}

/// Wootters concurrence.
pub fn concurrence(state: &TwoQubitState) -> f64 {
    let yy = pauli_pair(2, 2);
    let rho = state.density();
    let tilde = &yy * rho.map(|z| z.conj()) * &yy;
    let (vals, vecs) = eigh(rho);
    let sq = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
        4,
        vals.iter().map(|&v| C64::new(v.max(0.0).sqrt(), 0.0)),
    ));
    let root = &vecs * sq * vecs.adjoint();
    let m = &root * tilde * &root;
    let (mv, _) = eigh(&m);
    let mut l: Vec<f64> = mv.iter().map(|&v| v.max(0.0).sqrt()).collect();
    l.sort_by(|a, b| b.partial_cmp(a).unwrap());
    (l[0] - l[1] - l[2] - l[3]).max(0.0)
}

/// Checks the `TwoQubitState` invariants on an arbitrary 4×4 matrix and
/// returns the worst violation (trace, Hermiticity, eigenvalue floor).
pub fn state_violations(rho: &CMat) -> (f64, f64, f64) {
    let tr = (rho.trace() - C64::new(1.0, 0.0)).norm();
    (tr, hermiticity_error(rho), min_eigenvalue(rho))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fidelity_examples() {
        let t0 = TwoQubitState::bell(Bell::T0);
        assert!((fidelity(&t0, &Bell::T0.vector()).unwrap() - 1.0).abs() < 1e-15);
        let mm = TwoQubitState::maximally_mixed();
        for b in Bell::ALL {
            assert!((fidelity(&mm, &b.vector()).unwrap() - 0.25).abs() < 1e-15);
        }
        let tm = TwoQubitState::bell(Bell::TMinus);
        assert_eq!(fidelity(&tm, &Bell::S.vector()).unwrap(), 0.0);
        let mut bad = Bell::S.vector();
        bad[0] = C64::new(1.0, 0.0);
        assert!(matches!(fidelity(&tm, &bad), Err(Error::Unnormalized(_))));
    }

    #[test]
    fn stabilizers() {
        let idx = |l: &str| PAULI_LABELS.iter().position(|&x| x == l).unwrap();
        let e = pauli_expectations(&TwoQubitState::bell(Bell::T0));
        assert!((e[idx("XX")] - 1.0).abs() < 1e-12);
        assert!((e[idx("YY")] - 1.0).abs() < 1e-12);
        assert!((e[idx("ZZ")] + 1.0).abs() < 1e-12);
        let e = pauli_expectations(&TwoQubitState::bell(Bell::S));
        assert!((e[idx("XX")] + 1.0).abs() < 1e-12);
        assert!((e[idx("YY")] + 1.0).abs() < 1e-12);
        assert!((e[idx("ZZ")] + 1.0).abs() < 1e-12);
        assert!(pauli_expectations(&TwoQubitState::maximally_mixed())
            .iter()
            .all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn partial_trace_examples() {
        let s = TwoQubitState::bell(Bell::S);
        let space =
            HilbertSpace::new(alloc::vec![2, 2], alloc::vec!["a".into(), "b".into()]).unwrap();
        let st = State::from_density(space.clone(), s.density().clone()).unwrap();
        let r = partial_trace(&st, &[0]).unwrap();
        let half = CMat::identity(2, 2) * C64::new(0.5, 0.0);
        assert!(crate::space::max_abs(&(r.density() - half)) < 1e-15);
        assert!(partial_trace(&st, &[2]).is_err());
        assert!(partial_trace(&st, &[]).is_err());
        let full = partial_trace(&st, &[0, 1]).unwrap();
        assert_eq!(full.density(), st.density());
    }

    #[test]
    fn shot_noise_tomography() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let t0 = TwoQubitState::bell(Bell::T0);
        let tomo = tomography_shots(&t0, 10_000, &mut rng).unwrap();
        let (f, err) = tomo.fidelity(&Bell::T0.vector());
        assert!((f - 1.0).abs() < 0.03);
        assert!((f - 1.0).abs() <= 3.0 * err + 1e-3);
        let mm = tomography_shots(&TwoQubitState::maximally_mixed(), 10_000, &mut rng).unwrap();
        assert!(mm.purity() <= 0.3);
        let (f, err) = mm.fidelity(&Bell::S.vector());
        assert!((f - 0.25).abs() < 4.0 * err, "{f} ± {err}");
    }

    #[test]
    fn concurrence_examples() {
        assert!((concurrence(&TwoQubitState::bell(Bell::S)) - 1.0).abs() < 1e-7);
        assert!(concurrence(&TwoQubitState::maximally_mixed()) < 1e-12);
        assert!(concurrence(&TwoQubitState::bell(Bell::TMinus)) < 1e-7);
    }
}
