//! Command-line harness: single solves, convergence sweeps and quadrature demos.

pub mod config;
pub mod converge;
pub mod error;
pub mod fit;
pub mod quad_demo;
pub mod reference;
pub mod solve;

pub use config::RunConfig;
pub use error::{CliError, Result};
