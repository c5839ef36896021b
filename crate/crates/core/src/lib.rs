//! Pseudospectral laboratory for the Benjamin–Ono–Burgers equation.

pub mod data;
pub mod dyadic;
pub mod error;
pub mod estimates;
pub mod evolution;
pub mod experiments;
pub mod fft;
pub mod grid;
pub mod norms;
pub mod spacetime;
pub mod stats;

pub use error::{Error, Result};
