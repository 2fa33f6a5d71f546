//! Per-segment short-term passenger flow forecasting for transit stations.
//!
//! Raw turnstile registers are cleaned into one daily series per time
//! segment, analysed, and forecast one day ahead by seasonal lag models and
//! a naive Bayes hybrid that picks between two of them before each step.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod eval;
pub mod forecast;
pub mod hybrid;
pub mod ingest;
pub mod ols;
pub mod pipeline;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
