// Negated float comparisons are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod colorspace;
pub mod error;
pub mod eval;
pub mod index;
pub mod matching;
pub mod signature;

pub use error::{Error, Result};
