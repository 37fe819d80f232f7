//! Pseudo-spectral simulation of higher-order Hartree equations, local NLS
//! and mixed nonlocal nonlinearities on the torus `T³ = [0, 2π)³`.

pub mod dynamics;
pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod io;
pub mod nonlinearity;
pub mod observables;
pub mod potentials;
pub mod spectral;

pub use error::{Error, Result};
