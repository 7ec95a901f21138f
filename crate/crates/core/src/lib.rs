//! Interacting particle systems with common noise, their conditional
//! stochastic Fokker–Planck limit, and relative-entropy propagation of chaos.

// `!(x > 0.0)` guards must also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod entropy;
pub mod error;
pub mod harness;
pub mod model;
pub mod quad;
pub mod sde;
pub mod seed;
pub mod spde;

pub use error::{Error, Result};
