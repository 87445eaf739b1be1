//! Forward simulation and inversion of photoelectrically detected magnetic
//! resonance (PDMR) on NV ensembles in diamond.

pub mod calibration;
pub mod error;
pub mod geometry;
pub mod cli;
pub mod inversion;
pub mod io;
pub mod photodynamics;
pub mod spectra;
pub mod spin;
pub mod transport;

pub use error::{Error, Result};
