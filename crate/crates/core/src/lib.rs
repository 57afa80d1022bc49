// `!(x > 0.0)` is used to reject NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod corpus;
pub mod error;
pub mod features;
pub mod pipeline;
pub mod prompt;
pub mod reranker;
pub mod topics;
pub mod utility;

pub use error::{Error, Result};
