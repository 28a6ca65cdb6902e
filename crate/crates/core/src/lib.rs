//! Flow-equation diagonalization of the quantum Hénon–Heiles Hamiltonian.
//!
//! Two bosonic modes `a`, `b` with frequencies `w`, `v` are coupled by a cubic
//! interaction. The crate transforms the Hamiltonian to a normal form that is
//! diagonal in the Fock basis, either by integrating a truncated coefficient
//! flow ([`cutoff`]) or by solving the flow order by order in the coupling
//! ([`iterative`]). [`spectrum`] turns normal forms into eigenvalue tables,
//! [`baseline`] provides brute-force truncated diagonalization as an oracle,
//! and [`dynamics`] evaluates transition amplitudes from the transformed
//! ladder operators.

pub mod algebra;
pub mod baseline;
pub mod cutoff;
pub mod dynamics;
pub mod exppoly;
pub mod iterative;
pub mod ode;
pub mod spectrum;

mod error;

pub use error::Error;
