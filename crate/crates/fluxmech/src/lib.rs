//! Analysis toolkit for the readout of a magnetically levitated superconducting
//! microsphere through a flux-tunable microwave cavity.
//!
//! The crate models the full numerical chain of such an experiment at desk scale:
//!
//! * [`mech`] — trap mechanics of the levitated sphere (frequencies, zero-point
//!   motion, thermal occupation, linewidths),
//! * [`geometry`] — flux coupling between the moving sphere and a gradiometric
//!   pickup loop, the flux-transformer chain to the SQUID, and the inverse
//!   problem of locating the pickup loop from measured sensitivities,
//! * [`cavity`] — flux-tunable resonator lineshapes, complex reflection fits,
//!   SQUID inductance and tuning-curve models,
//! * [`spectral`] — Welch spectral estimation, quasi-heterodyne demodulation,
//!   the calibration-tone chain from detector units to flux, frequency and
//!   displacement densities, and a deterministic trace synthesizer,
//! * [`budget`] — imprecision, efficiency, back-action and cooperativity
//!   accounting, including the Friis cascade and improvement-factor ledger,
//! * [`config`] / [`commands`] — configuration ingestion and the CLI commands
//!   tying the chain together.
//!
//! All quantities are SI internally; angular frequencies are rad/s except where
//! a name says otherwise (`*_cyc`, `*_hz`). Flux is tracked in webers with
//! conversions to flux quanta at the interfaces that need them.

pub mod budget;
pub mod cavity;
pub mod commands;
pub mod config;
pub mod constants;
pub mod error;
mod fitting;
pub mod geometry;
pub mod io;
pub mod mech;
pub mod report;
pub mod selfcheck;
pub mod spectral;

pub use error::{Error, Result};
