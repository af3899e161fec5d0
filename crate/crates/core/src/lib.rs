//! Zero-dimensional Φ⁴ Green's functions: envelope sequences, the fixed-point
//! map `M*`, membership checks and the numerical study built on them.

// `!(x > 0.0)` is used on purpose to reject NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod combinatorics;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod logval;
pub mod membership;
pub mod sequences;

pub use error::{Error, Result};
