//! Forward modeling and parameter estimation for EIT light storage in warm
//! cesium vapor inside lossy hollow-core waveguides.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod atomic;
pub mod config;
pub mod constants;
pub mod eit;
pub mod error;
pub mod estimation;
pub mod io;
pub mod commands;
pub mod quadrature;
pub mod rng;
pub mod storage;

pub use error::{Error, Result};
