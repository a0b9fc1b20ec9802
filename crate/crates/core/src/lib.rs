//! Heisenberg-chain simulation in truncated total-spin eigenbases.
//!
//! The crate builds spin-adapted bases (configuration state functions labeled
//! by Yamaguchi-Kotani spin paths), represents the nearest-neighbour
//! antiferromagnetic Heisenberg Hamiltonian in them with symmetric-group
//! graphical rules, maps the band-truncated Hamiltonians onto sparse qubit
//! Pauli sums, compiles Trotter layers to gate lists and simulates real-time
//! evolution and adiabatic ground-state preparation.
//!
//! Module map:
//!
//! * [`basis`] - spin paths, truncated bases, step/height encodings.
//! * [`oracle`] - brute-force Clebsch-Gordan expansion in the `s_z` basis.
//! * [`sga`] - permutation and band Hamiltonian representations.
//! * [`encode`] - qubit layouts and Pauli-sum encodings.
//! * [`circuits`] - gate-level Trotter steps and gate-list export.
//! * [`sim`] - statevector simulation, exact propagation, observables.
//! * [`adiabatic`] - band-ramped adiabatic schedules.
//!
//! All energies are in units of the exchange coupling `J` unless a coupling is
//! passed explicitly. Spin quantum numbers are stored doubled (`*_x2`) so that
//! every label is an integer.

pub mod adiabatic;
pub mod basis;
pub mod circuits;
pub mod encode;
mod error;
pub mod linalg;
pub mod oracle;
pub mod sga;
pub mod sim;

pub use error::{Error, Result};

/// Complex amplitude type used throughout.
pub type C64 = num_complex::Complex64;
