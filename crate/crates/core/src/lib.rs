pub mod clifford;
pub mod continuum;
pub mod error;
pub mod gauge;
pub mod interp;
pub mod latops;
pub mod lattice;
pub mod linalg;
pub mod overlap;
pub mod pipeline;
pub mod spectral;

pub use error::{Error, Result};
