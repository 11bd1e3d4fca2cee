// NaN-rejecting range checks are written as negated comparisons.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod clustering;
pub mod error;
pub mod genome;
pub mod mcsa;
pub mod pipeline;
pub mod rng;
pub mod series;
pub mod synth;

pub use error::{Error, Result};
