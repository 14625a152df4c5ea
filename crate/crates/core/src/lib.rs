//! Sparse parameter identification for stochastic systems, open or closed loop.

pub mod diagnostics;
pub mod error;
pub mod estimation;
pub mod hammerstein;
pub mod harness;
pub mod linalg;
pub mod pipeline;
pub mod rng;
pub mod solver;
pub mod str_loop;

pub use error::{Result, SysIdError};
