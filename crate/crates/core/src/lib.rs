//! Trotterized observable estimation with Richardson extrapolation and
//! Chebyshev interpolation of the Trotter step size.

pub mod acceptance;
pub mod chebyshev;
pub mod error;
pub mod evolution;
pub mod experiment;
pub mod linalg;
pub mod measurement;
pub mod oracles;
pub mod product_formula;
pub mod richardson;
pub mod rng;
pub mod terms;

pub use error::{Error, Result};
