//! Positivity-preserving polygonal discontinuous Galerkin solver for the
//! Fisher-Kolmogorov equation, written for the logarithm of the concentration.

pub mod dgspace;
pub mod error;
pub mod forms;
pub mod linalg;
pub mod mesh;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
