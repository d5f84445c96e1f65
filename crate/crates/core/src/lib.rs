//! Rest-frame formulation of relativistic N-body mechanics.
//!
//! The dynamical arena is the Wigner 3-space of the inertial rest frame:
//! every particle is described by a pair of Wigner 3-vectors `(eta_i, kappa_i)`
//! evolving in the scalar time `tau`, with the invariant mass `M c` as
//! Hamiltonian and the rest-frame constraints `P = 0`, `K = 0` eliminating the
//! internal centre of mass. On top of that kinematics the crate provides
//!
//! * reconstruction of inertial-frame world-lines and their resampling on
//!   surfaces of constant `x^0` ([`frames`]),
//! * the collective/relative canonical transformation and the internal
//!   Poincare generators ([`canonical`]),
//! * free and quadratically-coupled Hamiltonian models with adaptive and
//!   symplectic integrators ([`dynamics`]),
//! * micro-canonical partition functions, analytic and Monte-Carlo, with
//!   entropy/temperature/pressure outputs ([`ensembles`]),
//! * one-particle distribution diagnostics and the Juttner equilibrium
//!   ([`kinetic`]),
//! * parametrized Galilei frames and relativistic non-inertial rest frames
//!   ([`noninertial`]).
//!
//! Conventions: metric signature `(+,-,-,-)`, `k_B = 1`, and `c` is an
//! explicit model parameter (default 1).

pub mod canonical;
pub mod dynamics;
pub mod ensembles;
pub mod frames;
pub mod io;
pub mod kinetic;
pub mod linalg;
pub mod noninertial;
pub mod quad;
pub mod rng;
pub mod special;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter failed validation before any computation started.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    /// A state left the domain of the model (e.g. negative energy radicand).
    #[error("model domain violation: {0}")]
    Domain(String),
    /// A numerical routine failed to converge or lost its bracket.
    #[error("numerical failure: {0}")]
    Numerics(String),
    /// The requested operation is not defined for this model or regime.
    #[error("unsupported: {0}")]
    Unsupported(String),
    /// I/O or serialization failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
