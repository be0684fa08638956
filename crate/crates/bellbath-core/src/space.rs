//! Labeled tensor-product Hilbert spaces and dense complex operators.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::allocator::Allocator;
use nalgebra::{DefaultAllocator, Dim, OMatrix};
#[allow(unused_imports)]
use num_traits::Float;
use num_traits::Zero;

use crate::{CMat, CVec, Error, Result, C64};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HilbertSpace {
    dims: Vec<usize>,
    labels: Vec<String>,
}

impl HilbertSpace {
    pub fn new(dims: Vec<usize>, labels: Vec<String>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidDimension(0));
        }
        if let Some(&d) = dims.iter().find(|&&d| d < 2) {
            return Err(Error::InvalidDimension(d));
        }
        if labels.len() != dims.len() {
            return Err(Error::DimensionMismatch {
                expected: dims.len(),
                found: labels.len(),
            });
        }
        Ok(Self { dims, labels })
    }

    /// Single unlabeled subsystem.
    pub fn single(dim: usize) -> Result<Self> {
        Self::new(vec![dim], vec!["s0".to_string()])
    }

    /// `[cavity A, cavity B, qubit A, qubit B]` with `n_max + 1` Fock levels per cavity.
    pub fn cavity_qubit(n_max: usize) -> Result<Self> {
        Self::new(
            vec![n_max + 1, n_max + 1, 2, 2],
            vec![
                "cavity_A".into(),
                "cavity_B".into(),
                "qubit_A".into(),
                "qubit_B".into(),
            ],
        )
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn slot(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Concatenation `self ⊗ other`.
    pub fn tensor(&self, other: &HilbertSpace) -> HilbertSpace {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        let mut labels = self.labels.clone();
        labels.extend(other.labels.iter().cloned());
        HilbertSpace { dims, labels }
    }

    /// Row-major flat index of a multi-index (last subsystem fastest).
    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.dims)
            .fold(0, |acc, (&i, &d)| acc * d + i)
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for (k, &d) in self.dims.iter().enumerate().rev() {
            out[k] = flat % d;
            flat /= d;
        }
        out
    }
}

/// A square operator on a labeled space.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    space: HilbertSpace,
    m: CMat,
}

impl Operator {
    pub fn new(space: HilbertSpace, m: CMat) -> Result<Self> {
        let n = space.total_dim();
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        if m.nrows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: m.nrows(),
            });
        }
        Ok(Self { space, m })
    }

    /// Operator on a single anonymous subsystem of the matrix dimension.
    pub fn from_matrix(m: CMat) -> Result<Self> {
        Self::new(HilbertSpace::single(m.nrows())?, m)
    }

    pub fn identity(space: HilbertSpace) -> Self {
        let n = space.total_dim();
        Self {
            space,
            m: CMat::identity(n, n),
        }
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn matrix(&self) -> &CMat {
        &self.m
    }

    pub fn into_matrix(self) -> CMat {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn dagger(&self) -> Self {
        Self {
            space: self.space.clone(),
            m: self.m.adjoint(),
        }
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        hermiticity_error(&self.m) <= tol
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        let n = self.dim();
        let p = self.m.adjoint() * &self.m;
        max_abs(&(p - CMat::identity(n, n))) <= tol
    }

    pub fn mul(&self, other: &Operator) -> Result<Operator> {
        self.check_same(other)?;
        Ok(Self {
            space: self.space.clone(),
            m: &self.m * &other.m,
        })
    }

    pub fn add(&self, other: &Operator) -> Result<Operator> {
        self.check_same(other)?;
        Ok(Self {
            space: self.space.clone(),
            m: &self.m + &other.m,
        })
    }

    pub fn scale(&self, c: C64) -> Operator {
        Self {
            space: self.space.clone(),
            m: &self.m * c,
        }
    }

    pub fn commutator(&self, other: &Operator) -> Result<Operator> {
        self.check_same(other)?;
        Ok(Self {
            space: self.space.clone(),
            m: &self.m * &other.m - &other.m * &self.m,
        })
    }

    pub fn trace(&self) -> C64 {
        self.m.trace()
    }

    fn check_same(&self, other: &Operator) -> Result<()> {
        if self.space.dims != other.space.dims {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }
}

/// A density matrix satisfying unit trace, Hermiticity and positivity.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    space: HilbertSpace,
    rho: CMat,
}

pub const STATE_TOL: f64 = 1e-9;
pub const EIGEN_FLOOR: f64 = -1e-8;

impl State {
    pub fn from_density(space: HilbertSpace, rho: CMat) -> Result<Self> {
        let n = space.total_dim();
        if rho.nrows() != n || rho.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: rho.nrows(),
            });
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(Error::InvalidState(alloc::format!("trace {tr}")));
        }
        let h = hermiticity_error(&rho);
        if h > STATE_TOL {
            return Err(Error::InvalidState(alloc::format!(
                "non-Hermitian by {h:e}"
            )));
        }
        let lmin = min_eigenvalue(&rho);
        if lmin < EIGEN_FLOOR {
            return Err(Error::InvalidState(alloc::format!(
                "negative eigenvalue {lmin:e}"
            )));
        }
        Ok(Self { space, rho })
    }

    /// Skips validation; callers guarantee the invariants up to numerical noise.
    pub fn from_density_unchecked(space: HilbertSpace, rho: CMat) -> Self {
        Self { space, rho }
    }

    pub fn from_pure(space: HilbertSpace, psi: &CVec) -> Result<Self> {
        let n = psi.norm();
        if (n - 1.0).abs() > STATE_TOL {
            return Err(Error::Unnormalized(n));
        }
        let rho = psi * psi.adjoint();
        Self::from_density(space, rho)
    }

    /// `|i⟩⟨i|` for the multi-index `idx`.
    pub fn basis(space: HilbertSpace, idx: &[usize]) -> Result<Self> {
        if idx.len() != space.len() {
            return Err(Error::DimensionMismatch {
                expected: space.len(),
                found: idx.len(),
            });
        }
        for (&i, &d) in idx.iter().zip(space.dims()) {
            if i >= d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: i,
                });
            }
        }
        let n = space.total_dim();
        let k = space.flat_index(idx);
        let mut rho = CMat::zeros(n, n);
        rho[(k, k)] = C64::new(1.0, 0.0);
        Ok(Self { space, rho })
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn density(&self) -> &CMat {
        &self.rho
    }

    pub fn into_density(self) -> CMat {
        self.rho
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn trace(&self) -> C64 {
        self.rho.trace()
    }

    pub fn purity(&self) -> f64 {
        (&self.rho * &self.rho).trace().re
    }
}

/// `a` with `⟨n−1|a|n⟩ = √n`.
pub fn destroy(dim: usize) -> Result<Operator> {
    Operator::from_matrix(destroy_matrix(dim)?)
}

pub fn destroy_matrix(dim: usize) -> Result<CMat> {
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    let mut m = CMat::zeros(dim, dim);
    for n in 1..dim {
        m[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    X,
    Y,
    Z,
    /// Raising operator `σ+ = |e⟩⟨g|`.
    Plus,
    /// Lowering operator `σ− = |g⟩⟨e|`.
    Minus,
}

/// Two-level matrices with `|g⟩ = index 0`, so `σz = diag(−1, +1)`.
pub fn pauli(which: Pauli) -> Operator {
    Operator::from_matrix(pauli_matrix(which)).expect("2x2")
}

pub fn pauli_matrix(which: Pauli) -> CMat {
    let z = C64::zero();
    let o = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    let e = match which {
        Pauli::X => [z, o, o, z],
        Pauli::Y => [z, i, -i, z],
        Pauli::Z => [-o, z, z, o],
        Pauli::Plus => [z, z, o, z],
        Pauli::Minus => [z, o, z, z],
    };
    CMat::from_row_slice(2, 2, &e)
}

/// Kronecker product; the spaces concatenate.
pub fn kron(a: &Operator, b: &Operator) -> Operator {
    Operator {
        space: a.space.tensor(&b.space),
        m: a.m.kronecker(&b.m),
    }
}

/// `I ⊗ … ⊗ op ⊗ … ⊗ I` with `op` acting on `slot`.
pub fn embed(op: &Operator, slot: usize, space: &HilbertSpace) -> Result<Operator> {
    let m = embed_matrix(op.matrix(), slot, space)?;
    Operator::new(space.clone(), m)
}

pub fn embed_matrix(op: &CMat, slot: usize, space: &HilbertSpace) -> Result<CMat> {
    if slot >= space.len() {
        return Err(Error::SlotOutOfRange {
            slot,
            slots: space.len(),
        });
    }
    let d = space.dims()[slot];
    if op.nrows() != d || op.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: op.nrows(),
        });
    }
    let left: usize = space.dims()[..slot].iter().product();
    let right: usize = space.dims()[slot + 1..].iter().product();
    let n = left * d * right;
    let mut m = CMat::zeros(n, n);
    for l in 0..left {
        for i in 0..d {
            for j in 0..d {
                let v = op[(i, j)];
                if v == C64::zero() {
                    continue;
                }
                for r in 0..right {
                    m[((l * d + i) * right + r, (l * d + j) * right + r)] = v;
                }
            }
        }
    }
    Ok(m)
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn hermiticity_error(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut err: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            err = err.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    err
}

/// `(m + m†)/2`.
pub fn hermitize(m: &mut CMat) {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)].im = 0.0;
        for j in i + 1..n {
            let v = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = v;
            m[(j, i)] = v.conj();
        }
    }
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(m: &CMat) -> f64 {
    let mut h = m.clone();
    hermitize(&mut h);
    h.symmetric_eigenvalues()
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b))
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Matrix exponential by scaling and squaring of a degree-18 Taylor series,
/// with the scaled 1-norm at most 1/2.
pub fn expm<T, D>(a: &OMatrix<T, D, D>) -> OMatrix<T, D, D>
where
    T: nalgebra::ComplexField<RealField = f64> + Copy,
    D: Dim,
    DefaultAllocator: Allocator<D, D>,
{
    let (nr, nc) = a.shape_generic();
    let mut norm1: f64 = 0.0;
    for j in 0..a.ncols() {
        norm1 = norm1.max(a.column(j).iter().map(|z| z.modulus()).sum::<f64>());
    }
    let mut s = 0u32;
    while norm1 / (1u64 << s.min(62)) as f64 > 0.5 && s < 1000 {
        s += 1;
    }
    let scale = T::from_real(libm::ldexp(1.0, -(s as i32)));
    let x = a * scale;
    let id = OMatrix::<T, D, D>::identity_generic(nr, nc);
    let mut term = id.clone();
    let mut sum = id;
    for k in 1..=18 {
        term = &term * &x * T::from_real(1.0 / k as f64);
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn destroy_examples() {
        let a2 = destroy(2).unwrap();
        assert_eq!(
            a2.matrix(),
            &CMat::from_row_slice(2, 2, &[c(0.), c(1.), c(0.), c(0.)])
        );
        let a3 = destroy_matrix(3).unwrap();
        let mut fock2 = CVec::zeros(3);
        fock2[2] = c(1.0);
        let out = &a3 * fock2;
        assert!((out[1] - c(2f64.sqrt())).norm() < 1e-15);
        assert!(out[0].norm() < 1e-15 && out[2].norm() < 1e-15);
        for d in 2..6 {
            let a = destroy_matrix(d).unwrap();
            let n = a.adjoint() * &a;
            for k in 0..d {
                assert!((n[(k, k)] - c(k as f64)).norm() < 1e-14);
            }
        }
        assert_eq!(destroy(1), Err(Error::InvalidDimension(1)));
    }

    #[test]
    fn destroy_is_nilpotent() {
        for d in 2..7 {
            let a = destroy_matrix(d).unwrap();
            let mut p = CMat::identity(d, d);
            for _ in 0..d {
                p = &p * &a;
            }
            assert!(max_abs(&p) == 0.0);
        }
    }

    #[test]
    fn pauli_algebra() {
        let z = pauli_matrix(Pauli::Z);
        assert_eq!(z[(1, 1)], c(1.0));
        assert_eq!(z[(0, 0)], c(-1.0));
        let p = pauli_matrix(Pauli::Plus);
        let m = pauli_matrix(Pauli::Minus);
        let proj_e = &p * &m;
        assert_eq!(
            proj_e,
            CMat::from_row_slice(2, 2, &[c(0.), c(0.), c(0.), c(1.)])
        );
        assert!(max_abs(&(&p * &m - &m * &p - &z)) < 1e-15);
        let x = pauli_matrix(Pauli::X);
        let y = pauli_matrix(Pauli::Y);
        let i = C64::new(0.0, 1.0);
        assert!(max_abs(&((&x + &y * i) * C64::new(0.5, 0.0) - &p)) < 1e-15);
        // σ+|g⟩ = |e⟩
        let g = CVec::from_vec(alloc::vec![c(1.0), c(0.0)]);
        let e = &p * g;
        assert_eq!(e[1], c(1.0));
        assert!(pauli(Pauli::Y).is_hermitian(0.0));
        assert!(pauli(Pauli::X).is_unitary(1e-15));
    }

    #[test]
    fn embed_examples() {
        let sp = HilbertSpace::new(vec![3, 2], vec!["c".into(), "q".into()]).unwrap();
        let a = destroy(3).unwrap();
        let e = embed(&a, 0, &sp).unwrap();
        let k = kron(&a, &Operator::identity(HilbertSpace::single(2).unwrap()));
        assert_eq!(e.matrix(), k.matrix());
        let id = embed(
            &Operator::identity(HilbertSpace::single(2).unwrap()),
            1,
            &sp,
        )
        .unwrap();
        assert_eq!(id.matrix(), &CMat::identity(6, 6));
        assert!(matches!(
            embed(&a, 2, &sp),
            Err(Error::SlotOutOfRange { .. })
        ));
        assert!(matches!(
            embed(&a, 1, &sp),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn kron_examples() {
        let i2 = Operator::identity(HilbertSpace::single(2).unwrap());
        assert_eq!(kron(&i2, &i2).matrix(), &CMat::identity(4, 4));
        let a = pauli(Pauli::Plus);
        let b = destroy(3).unwrap();
        let k = kron(&a, &b);
        assert_eq!(k.space().dims(), &[2, 3]);
        assert_eq!(k.dagger().matrix(), kron(&a.dagger(), &b.dagger()).matrix());
    }

    #[test]
    fn index_round_trip() {
        let sp = HilbertSpace::cavity_qubit(2).unwrap();
        assert_eq!(sp.total_dim(), 36);
        for k in 0..36 {
            assert_eq!(sp.flat_index(&sp.multi_index(k)), k);
        }
        assert_eq!(sp.flat_index(&[1, 2, 1, 0]), ((1 * 3 + 2) * 2 + 1) * 2);
        assert_eq!(sp.slot("qubit_B"), Some(3));
    }

    #[test]
    fn state_validation() {
        let sp = HilbertSpace::single(2).unwrap();
        let mut rho = CMat::zeros(2, 2);
        rho[(0, 0)] = c(0.5);
        assert!(State::from_density(sp.clone(), rho.clone()).is_err());
        rho[(1, 1)] = c(0.5);
        let s = State::from_density(sp.clone(), rho.clone()).unwrap();
        assert!((s.purity() - 0.5).abs() < 1e-15);
        rho[(0, 0)] = c(1.5);
        rho[(1, 1)] = c(-0.5);
        assert!(State::from_density(sp, rho).is_err());
    }
}
