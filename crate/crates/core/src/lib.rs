//! Oscillating transport fields with invariant measures and rectifying coordinates,
//! exact characteristic solvers, homogenized limits and convergence diagnostics.

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod families;
pub mod fields;
pub mod flow;
pub mod grid;
pub mod homogenize;
pub mod linalg;
pub mod runner;
pub mod transport;

pub use error::{Error, Result};
