//! Entropy certification and randomness extraction for continuous-variable
//! quantum random number generators built on homodyne detection.
//!
//! The crate is `no_std` (it needs `alloc`) and covers the numerical side of
//! the generator:
//!
//! * [`state`]: Gaussian quadrature statistics, ADC partitions, binned
//!   distributions and simulated measurement blocks.
//! * [`entropy`]: classical min-entropy, max-entropy estimators, the
//!   position/momentum overlap constant and the uncertainty-relation lower
//!   bound on the conditional min-entropy.
//! * [`dsp`]: downconversion, FIR filtering, decimation, autocorrelation and
//!   shot-noise calibration of the raw receiver signal.
//! * [`protocol`]: random check-instant selection, seed accounting,
//!   certification of measurement blocks and secure-rate bookkeeping.
//! * [`extractor`]: two-universal hashing by random binary matrices over GF(2).
//!
//! File formats, reporting and the command-line front end live in the
//! `cvqrng` crate.

#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod bits;
pub mod combinatorics;
pub mod dsp;
pub mod entropy;
mod error;
pub mod extractor;
pub mod prolate;
pub mod protocol;
pub mod special;
pub mod state;

pub use error::{Error, Result};
