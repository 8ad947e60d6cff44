//! Time-of-arrival position estimation by nonlinear least squares, with a
//! lifted objective that turns spurious local minima into saddle points.

pub mod bench;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod objectives;
pub mod optimizer;
pub mod scenario;
pub mod stationarity;

pub use error::{Error, Result};
