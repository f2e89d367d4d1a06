pub mod certify;
pub mod error;
pub mod fixtures;
pub mod linops;
pub mod netmetrics;
pub mod objective;
pub mod simplex;
pub mod solver;

pub use error::{Error, Result};
