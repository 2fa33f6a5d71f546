use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sample autocorrelations at lags `1..=max_lag`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcfResult {
    pub lags: Vec<usize>,
    pub values: Vec<f64>,
    /// Two-standard-error band, `2 / sqrt(T)`.
    pub threshold: f64,
}

impl AcfResult {
    pub fn get(&self, lag: usize) -> Option<f64> {
        self.lags
            .iter()
            .position(|l| *l == lag)
            .map(|i| self.values[i])
    }

    /// Lags whose correlation lies outside the two-standard-error band.
    pub fn significant(&self) -> Vec<usize> {
        self.lags
            .iter()
            .zip(&self.values)
            .filter(|(_, p)| p.abs() > self.threshold)
            .map(|(l, _)| *l)
            .collect()
    }
}

/// Autocorrelation normalised by the total sum of squares about the mean.
pub fn acf(values: &[f64], max_lag: usize) -> Result<AcfResult> {
    if max_lag == 0 {
        return Err(Error::InvalidInput("max_lag must be positive".into()));
    }
    let n = values.len();
    if n < max_lag + 2 {
        return Err(Error::InsufficientData {
            needed: max_lag + 2,
            got: n,
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite value".into()));
    }
    let mean = super::mean(values);
    let centered: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let denom: f64 = centered.iter().map(|c| c * c).sum();
    if !(denom > 0.0) {
        return Err(Error::Degenerate("zero variance"));
    }
    let lags: Vec<usize> = (1..=max_lag).collect();
    let values = lags
        .iter()
        .map(|&l| {
            let num: f64 = centered[l..]
                .iter()
                .zip(&centered[..n - l])
                .map(|(a, b)| a * b)
                .sum();
            num / denom
        })
        .collect();
    Ok(AcfResult {
        lags,
        values,
        threshold: 2.0 / (n as f64).sqrt(),
    })
}

/// The `k` lags with the largest absolute correlation, strongest first.
/// Equal magnitudes keep the smaller lag first.
pub fn top_lags(acf: &AcfResult, k: usize, exclude: &BTreeSet<usize>) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be positive".into()));
    }
    let mut ranked: Vec<(usize, f64)> = acf
        .lags
        .iter()
        .copied()
        .zip(acf.values.iter().map(|p| p.abs()))
        .filter(|(l, _)| *l > 0 && !exclude.contains(l))
        .collect();
    if ranked.is_empty() {
        return Err(Error::EmptySelection);
    }
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(ranked.into_iter().take(k).map(|(l, _)| l).collect())
}
