//! Two transmons in two photon-hopping cavities, driven at a single frequency
//! with a controllable relative phase, and cooled into a Bell state of chosen
//! exchange symmetry.
//!
//! Units: frequencies, couplings and rates are linear GHz; times are μs.
//! The factor `2π·1000` is applied once, inside the generators.
//!
//! Basis: subsystems are ordered `[cavity A, cavity B, qubit A, qubit B]`,
//! Fock index is photon number, qubit index 0 is `|g⟩`.
#![no_std]
#![cfg_attr(test, allow(unused_imports))]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod device;
pub mod dressed;
pub mod error;
pub mod experiments;
pub mod lindblad;
pub mod observables;
pub mod rates;
pub mod space;
pub mod units;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Dense complex matrix used for operators and density matrices.
pub type CMat = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVec = nalgebra::DVector<C64>;
