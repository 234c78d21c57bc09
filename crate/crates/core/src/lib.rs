//! Twin-beam correlation noise simulator: analytic spectra of an
//! above-threshold non-degenerate OPO, a seeded time-domain realization of
//! its quadrature noise, unbalanced Mach-Zehnder detection and a Welch
//! spectrum analyzer.

pub mod config;
pub mod error;
pub mod mzi;
pub mod output;
pub mod par;
pub mod pipeline;
pub mod rng;
pub mod runner;
pub mod specan;
pub mod spectra;
pub mod synth;

pub use error::{Error, Result};
