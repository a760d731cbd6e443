//! Simulator of a GHz-clocked, polarization-encoded B92 quantum key
//! distribution link.
//!
//! [`optics`] and [`detector`] model the physical layer, [`protocol`] the
//! B92 exchange and classical post-processing, [`engine`] runs seeded
//! Monte Carlo trials and [`analytic`] gives the closed-form expectations
//! they are checked against.

pub mod analytic;
pub mod cli;
pub mod detector;
pub mod engine;
pub mod optics;
pub mod protocol;
