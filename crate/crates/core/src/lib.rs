//! Simulation and audit toolkit for asymptotic equivalence of nonparametric
//! regression experiments with Gaussian white-noise style approximations.

pub mod error;
pub mod families;
pub mod function_space;
pub mod quadrature;
pub mod seed;
pub mod stats;
pub mod experiments;
pub mod distances;
pub mod coupling;
pub mod globalization;
pub mod harness;

pub use error::{Error, Result};
