//! Transition-aware phase-shift design for liquid-crystal RIS.
//!
//! * [`lc_dynamics`]: voltage/phase map and exponential LC switching.
//! * [`geometry`] and [`channel`]: array geometry and Rician channels.
//! * [`precoder`]: beamformers and SNR.
//! * [`optimizer`]: per-user configurations with small weighted phase
//!   changes under SNR targets, plus the co-phasing benchmark.
//! * [`tdma`]: switch traces, time-to-threshold and effective rate.
//! * [`config`], [`experiment`], [`validation`]: scenario files, seeded
//!   experiment drivers and built-in oracle checks used by the CLI.

// `!(x > 0.0)` style checks are kept on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod config;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod lc_dynamics;
pub mod optimizer;
pub mod precoder;
pub mod tdma;
pub mod validation;

pub use error::{Error, Result};
