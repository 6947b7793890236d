pub mod analysis;
pub mod cauchy;
pub mod domain;
pub mod error;
pub mod forms;
pub mod homotopy;
pub mod quadrature;
pub mod solver;
pub mod weights;

pub use error::{Error, Result};
