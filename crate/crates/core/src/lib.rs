//! Adaptive Crouzeix–Raviart finite elements on newest-vertex-bisection
//! meshes for the Poisson and Stokes problems.

pub mod afem;
pub mod cli;
pub mod assembly;
pub mod error;
pub mod estimate;
pub mod mesh;
pub mod problems;
pub mod quadrature;
pub mod space;
pub mod sparse;
pub mod verify;

pub use error::{Error, Result};
