//! Frequency-uniform decomposition toolkit for linear and nonlinear
//! Schrödinger equations on a large periodic torus.

pub mod ensemble;
pub mod error;
pub mod field;
pub mod grid;
pub mod io;
pub mod christ_kiselev;
pub mod cli;
pub mod decomp;
pub mod estimates;
pub mod norms;
pub mod propagator;
pub mod solver;

pub use error::{Error, Result};
pub use field::{Field, Kind, Rep};
pub use grid::{make_grid, Grid};
pub use num_complex::Complex64 as C64;
