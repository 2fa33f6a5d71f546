use std::io;

use crate::ingest::Segment;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("insufficient data: need at least {needed} values, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("degenerate series: {0}")]
    Degenerate(&'static str),

    #[error("segment {0} has no observed values to impute from")]
    UnrecoverableGap(Segment),

    #[error("empty selection: no candidate lags left after exclusions")]
    EmptySelection,

    #[error("rank-deficient design for lag set {lags:?}")]
    RankDeficient { lags: Vec<usize> },

    #[error("insufficient history: lag {lag} reaches before the start of the series")]
    InsufficientHistory { lag: usize },

    #[error("sequencing error: {0}")]
    Sequencing(String),

    #[error("no candidate order could be fitted")]
    NoViableOrder,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// `true` for failures of the numerical machinery rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RankDeficient { .. } | Error::NoViableOrder | Error::Degenerate(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
