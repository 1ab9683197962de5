//! Differentially private learners with confidence-margin guarantees.

pub mod audit;
pub mod cli;
pub mod cover;
pub mod data;
pub mod erm;
pub mod kernel;
pub mod labeldp;
pub mod error;
pub mod linear;
pub mod losses;
pub mod modelselect;
pub mod nn;
pub mod mech;
pub mod rng;
pub mod sketch;

pub use error::{Error, Result};
