//! Periodic-channel Navier-Stokes with a dynamic end-grafted polymer wall law,
//! and a micro-kinetic dumbbell simulator for validating the wall law.

pub mod bc;
pub mod diagnostics;
pub mod error;
pub mod micro;
pub mod params;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
