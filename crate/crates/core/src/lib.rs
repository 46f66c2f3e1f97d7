pub mod dpp;
pub mod error;
pub mod forest;
pub mod harness;
pub mod impute;
pub mod numerics;
pub mod qdpp;
pub mod rng;
pub mod tolerance;

pub use error::{Error, Result};
pub use numerics::{EigenDecomposition, Matrix};
pub use rng::SeedStream;
