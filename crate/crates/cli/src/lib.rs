//! Command-line pipeline: ingest, analyze, fit, evaluate and demo.

pub mod config;
pub mod error;
pub mod run;
