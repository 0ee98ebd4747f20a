//! Exact mixing analysis of the lazy k-flip random walk on the hypercube
//! `(Z/2Z)^n` and of the k-coordinate randomizing walk on `(Z/mZ)^n`.
//!
//! The crate is organized bottom-up:
//!
//! - [`numerics`]: big-integer binomials, hypergeometric laws, log space.
//! - [`krawtchouk`]: Krawtchouk polynomials in the `C(n,j)`-normalized form.
//! - [`spectrum`]: eigenvalue tables of both walks and the l² machinery.
//! - [`exactdist`]: exact distributions via lumped (Hamming-weight) chains,
//!   with brute-force and Fourier-inversion oracles.
//! - [`coupling`]: the mismatch-pairing coupling, its Monte Carlo estimator,
//!   its exact absorbing-chain law, and exact lemma verifiers.
//! - [`bounds`]: closed-form step counts and distance bounds.

pub mod bounds;
pub mod coupling;
pub mod exactdist;
pub mod krawtchouk;
pub mod numerics;
pub mod spectrum;

pub use numerics::{Backend, ExactRational, Value};
pub use spectrum::{CyclicWalkSpec, WalkSpec};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("size limit exceeded: {0}")]
    Size(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
