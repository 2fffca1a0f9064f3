//! Protoform reconstruction from cognate sets.
//!
//! A GRU encoder-decoder proposes candidate protoforms with beam search;
//! a second GRU that predicts daughter reflexes from a protoform rescores
//! each candidate by how many of the attested reflexes it can derive.
//! The crate also ships the evaluation metrics, significance tests and
//! error analysis used to compare reconstruction systems.

// `!(x >= 0.0)` rejects NaN too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod autodiff;
pub mod corpus;
pub mod decode;
mod error;
pub mod metrics;
pub mod models;
pub mod pipeline;
pub mod rerank;
pub mod stats;

pub use error::{Error, Result};
