//! Numerical toolkit for the cubic normal matrix model: spectral curve,
//! vector equilibrium measures, the Laplacian growth domain, Airy weights and
//! the associated multiple orthogonal polynomials.

pub mod error;
pub mod growth;
pub mod airy;
pub mod curve;
pub mod measures;
pub mod numerics;
pub mod oracle;
pub mod orthopoly;

pub use error::{Error, Result};
pub use numerics::{Complex, PrecisionContext, Real};
