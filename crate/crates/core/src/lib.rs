//! Polynomial approximation of real functions for leveled homomorphic
//! evaluation.
//!
//! The crate trains feed-forward networks whose activations are trainable
//! polynomials, so the whole network is a polynomial in its input whose
//! degree grows exponentially with depth while its multiplicative depth grows
//! only linearly. It also provides the classical baselines (least squares
//! with Horner or Paterson–Stockmeyer evaluation, Fourier sine series) and a
//! leveled homomorphic arithmetic simulator that counts levels,
//! multiplications and bootstraps for all of them.

// `!(a > b)` is deliberate: NaN must fail range checks
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod extract;
pub mod fourier;
pub mod funcspec;
pub mod henc;
pub mod netcore;
pub mod poly;
pub mod quant;
pub mod report;

/// 17 significant digits: enough to round-trip any `f64` exactly.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}
