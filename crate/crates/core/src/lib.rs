//! Numerical toolkit for the information/estimation structure of the two-user
//! Gaussian multiple-access channel
//!
//! ```text
//!     y = sqrt(snr) * H1 P1 x1 + sqrt(snr) * H2 P2 x2 + n,     n ~ CN(0, I)
//! ```
//!
//! with finite (discrete) input constellations. The crate computes, by exact
//! posterior sums inside seeded Monte Carlo over the channel output:
//!
//! * per-user MMSE matrices `E_i = E[(x_i - x̂_i)(x_i - x̂_i)^H]` and the
//!   system MMSE `Tr{H1P1 E1 (H1P1)^H} + Tr{H2P2 E2 (H2P2)^H}` ([`mmse`]),
//! * the interference covariance term built from the cross-correlation of the
//!   two posterior-mean estimates ([`mmse::covariance_psi`]),
//! * joint, non-conditional and conditional mutual information, plus the
//!   Gaussian-interference surrogate rate ([`information`]),
//! * analytic gradients of mutual information with respect to channel and
//!   precoder matrices, with finite-difference verifiers ([`gradients`]),
//! * deterministic quadrature evaluations of the known BPSK closed forms
//!   ([`closed_form`]) and low-SNR Taylor expansions ([`lowsnr`]).
//!
//! All estimators are deterministic for a fixed seed: sampling is split into
//! per-batch ChaCha substreams and reduced in a fixed pairwise order, so
//! serial and parallel runs produce identical results. Density arithmetic is
//! done in the log domain throughout.
//!
//! Everything internal is in nats; reports carry bits alongside.

pub mod closed_form;
pub mod config;
pub mod gradients;
pub mod information;
pub mod lowsnr;
pub mod mc;
pub mod mmse;
pub mod model;
pub mod oracle;
mod pass;
pub mod posterior;
pub mod quadrature;
pub mod ser;

use thiserror::Error;

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex<f64>;
/// Dense complex matrix.
pub type CMat = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVec = nalgebra::DVector<C64>;

/// Error type shared by the whole crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid constellation: {0}")]
    Constellation(String),

    #[error("power constraint violated: trace(P P^H) = {got:.6} exceeds budget {budget:.6}")]
    Power { got: f64, budget: f64 },

    #[error("joint alphabet size {got} exceeds cap {cap}; exact posterior sums require a bounded alphabet")]
    AlphabetCap { got: usize, cap: usize },

    #[error("invalid Monte Carlo config: {0}")]
    McConfig(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("model file, line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

/// Nats-to-bits conversion factor (1/ln 2).
pub const NATS_TO_BITS: f64 = std::f64::consts::LOG2_E;

pub use model::{bpsk_scalar_mac, Constellation, MacModel, McConfig, UserLink};
