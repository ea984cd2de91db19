pub mod asymptotics;
pub mod constraints;
pub mod eigensolver;
pub mod energy;
pub mod error;
pub mod inequalities;
pub mod io;
pub mod lattice;
pub mod model;
pub mod solvers;

pub use error::{FnlsError, Result};
