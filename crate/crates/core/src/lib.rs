//! Pseudo-spectral simulation and verification tools for a compressible
//! Navier–Stokes–Korteweg system coupled to a chemotactic signal on the
//! periodic torus.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod field;
pub mod functionals;
pub mod grid;
pub mod harness;
pub mod inequality;
pub mod integrator;
pub mod io;
pub mod model;

pub use error::{Error, Result};
pub use field::{InitialData, ScalarField, State, TensorField, VectorField};
pub use grid::TorusGrid;
pub use model::{ModelParams, RegParams};
