//! Exact and numerical dynamics of the modulated Landau-Zener sweep
//!
//! The Hamiltonian `H(t) = η/(1+ν²t²)·(J_x + κνt·J_z)` with `κ = √(1−(ν/η)²)`
//! admits the dynamical invariant `I(t) = α(t)·J`, which makes the evolution
//! exactly solvable for any spin `j`. This crate provides:
//!
//! - [`model`]: parameters, spin matrices, the Hamiltonian and Wigner `d` matrices
//! - [`exact`]: the invariant, its eigenbasis, Lewis-Riesenfeld phases and the
//!   closed-form propagator and transfer probability
//! - [`oracle`]: brute-force Schrödinger integration, adiabatic frames and the
//!   transition-probability matrix
//! - [`open_system`]: Bloch-vector master equation for dephasing and spin-flip noise
//! - [`harness`]: scenario configuration, dataset emitters and the verification suite
//!
//! Basis vectors are always ordered `m = +j, +j−1, …, −j`.

pub mod error;
pub mod exact;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod ode;
pub mod open_system;
pub mod oracle;

pub use error::{Error, Result};
pub use model::{ModelParams, Spin, SpinOperators};
