//! Hybrid QAM-MPPM modulation for turbulence-free optical intensity links.
//!
//! Each frame of `N` slots carries an MPPM pattern with `w` active slots,
//! and every active slot additionally carries a QAM symbol on an electrical
//! subcarrier. This crate provides
//!
//! * [`constellation`]: normalized Gray-labeled QAM sets, ML demapping and
//!   per-symbol / average QAM symbol error probabilities,
//! * [`mppm`]: exact combinatorics, the expurgated pattern set, bit mapping
//!   and nearest-pattern correction,
//! * [`special`] and [`distributions`]: scaled Bessel, Marcum-Q and the slot
//!   metric densities for the common-metrics (CMD) and independent-metrics
//!   (IMD) detectors,
//! * [`analytic`]: symbol and bit error probabilities of both detectors,
//! * [`link`]: energy, noise and complexity bookkeeping,
//! * [`sim`]: frame-level Monte-Carlo transmission and detection.
//!
//! The crate is `no_std` and only needs `alloc`.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod analytic;
pub mod constellation;
pub mod distributions;
mod error;
pub mod link;
pub mod mppm;
pub mod quadrature;
pub mod sim;
pub mod special;

pub use error::{Error, Result};
