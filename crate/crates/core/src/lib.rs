// `!(x > 0.0)` is used deliberately so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agents;
pub mod ce;
pub mod error;
pub mod linalg;
pub mod operators;
pub mod pipeline;
pub mod priors;
pub mod simdata;

pub use error::{Error, Result};
