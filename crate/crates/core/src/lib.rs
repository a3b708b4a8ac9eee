// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod blowup;
pub mod charts;
pub mod distance;
pub mod error;
pub mod jet;
pub mod lattice;
pub mod order;
pub mod potential;
pub mod sampling;
pub mod subspace;
pub mod verify;

pub use error::{GeomError, Result};
