//! Simulation and finite-key analysis of three-party quantum secret sharing
//! with phase-encoded weak coherent pulses.
//!
//! Alice and Bob each send a coherent pulse of intensity `mu` carrying a bit
//! in the X (`0`, `pi`) or Y (`pi/2`, `3pi/2`) basis; the dealer Charlie adds
//! his own basis phase to Bob's pulse and interferes the two on a beam
//! splitter. The resulting keys satisfy `S_c = S_a xor S_b`.
//!
//! - [`optics`]: channel and source models, gain, error rates, coin imbalance.
//! - [`protocol`]: seeded pulse-level Monte Carlo and sifting.
//! - [`finite_key`]: Kato/Azuma bounds, phase-error bound, key length.
//! - [`keyrate`] and [`optimize`]: rate curves and parameter search.
//! - [`exp_data`]: detection-count tables and their analysis.

// `!(x >= lo)` guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod exp_data;
pub mod finite_key;
pub mod keyrate;
pub mod optics;
pub mod optimize;
pub mod protocol;
pub mod report;

pub use error::{QssError, Result};
