//! Variational compilation of three-qubit gates into Trotterized
//! anisotropic-Heisenberg evolutions, plus the noise models used to probe
//! the compiled circuits.
//!
//! Qubit 1 is the most significant bit of a basis index throughout.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ansatz;
pub mod cost;
pub mod error;
pub mod gates;
pub mod harness;
pub mod linalg;
pub mod noise;
pub mod optimizer;
pub mod pauli;
pub mod seed;
pub mod simulator;

pub use error::{Error, Result};
