//! Conformally invariant Poisson-type extension operators on the half-space
//! and the unit ball, the weighted isoperimetric functional built on them,
//! and a subcritical fixed-point solver for the associated integral equation
//! on the sphere.

pub mod diagnostics;
pub mod error;
pub mod functionals;
pub mod geometry;
pub mod kernels;
pub mod operators;
pub mod quadrature;
pub mod solver;

pub use error::{Error, Result};
pub use geometry::{BallPoint, HalfSpacePoint, ProblemParams};
