//! Flow decomposition, autocorrelation, distribution and stationarity
//! checks, and Gaussian fitting.

mod acf;
mod normality;
mod stationarity;

use serde::{Deserialize, Serialize};

pub use acf::{acf, top_lags, AcfResult};
pub use normality::{kolmogorov_survival, ks_normality, normal_cdf};
pub use stationarity::{adf_critical_value_1pct, adf_stationarity, adf_statistic};

use crate::error::{Error, Result};
use crate::ingest::SegmentSeries;

/// Split of a series into its traffic flow constant and the fluctuations
/// around it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowDecomposition {
    pub constant: f64,
    pub fluctuations: Vec<f64>,
    pub source_len: usize,
}

impl FlowDecomposition {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("cannot decompose an empty series"));
        }
        let constant = mean(values);
        Ok(FlowDecomposition {
            constant,
            fluctuations: values.iter().map(|z| z - constant).collect(),
            source_len: values.len(),
        })
    }

    /// `constant + fluctuation` for every sample.
    pub fn reconstruct(&self) -> Vec<f64> {
        self.fluctuations
            .iter()
            .map(|e| self.constant + e)
            .collect()
    }
}

pub fn decompose(series: &SegmentSeries) -> Result<FlowDecomposition> {
    FlowDecomposition::from_values(series.counts())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub mu: f64,
    pub sigma: f64,
}

impl GaussianFit {
    pub fn density(&self, x: f64) -> f64 {
        let z = (x - self.mu) / self.sigma;
        (-0.5 * z * z).exp() / ((2.0 * std::f64::consts::PI).sqrt() * self.sigma)
    }
}

/// Sample mean and (n - 1)-divisor standard deviation.
pub fn fit_gaussian(samples: &[f64]) -> Result<GaussianFit> {
    if samples.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: samples.len(),
        });
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite sample".into()));
    }
    let mu = mean(samples);
    let var = samples.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (samples.len() - 1) as f64;
    let sigma = var.sqrt();
    if !(sigma > 0.0) {
        return Err(Error::Degenerate("all samples identical"));
    }
    Ok(GaussianFit { mu, sigma })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    KsNormality,
    AdfStationarity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub kind: TestKind,
    pub statistic: f64,
    /// p-value for K-S, 1% critical value for ADF.
    pub critical_or_pvalue: f64,
    pub passed: bool,
}

impl TestReport {
    pub(crate) fn new(kind: TestKind, statistic: f64, critical_or_pvalue: f64) -> Self {
        let passed = match kind {
            TestKind::KsNormality => critical_or_pvalue > normality::KS_SIGNIFICANCE,
            TestKind::AdfStationarity => statistic < critical_or_pvalue,
        };
        TestReport {
            kind,
            statistic,
            critical_or_pvalue,
            passed,
        }
    }
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_series() {
        let d = FlowDecomposition::from_values(&[5.0, 5.0, 5.0]).unwrap();
        assert_eq!(d.constant, 5.0);
        assert_eq!(d.fluctuations, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn hand_decomposition() {
        let d = FlowDecomposition::from_values(&[10.0, 20.0, 30.0]).unwrap();
        assert_eq!(d.constant, 20.0);
        assert_eq!(d.fluctuations, vec![-10.0, 0.0, 10.0]);
        assert_eq!(d.source_len, 3);
    }

    #[test]
    fn empty_decomposition_fails() {
        assert!(matches!(
            FlowDecomposition::from_values(&[]),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn gaussian_pair() {
        let g = fit_gaussian(&[-1.0, 1.0]).unwrap();
        assert_eq!(g.mu, 0.0);
        assert!((g.sigma - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn gaussian_degenerate() {
        let c = 3.5;
        assert!(matches!(
            fit_gaussian(&[c, c, c, c + 0.0]),
            Err(Error::Degenerate(_))
        ));
        assert!(fit_gaussian(&[1.0]).is_err());
    }

    #[test]
    fn gaussian_density_peak() {
        let g = GaussianFit {
            mu: 2.0,
            sigma: 0.5,
        };
        let peak = 1.0 / (0.5 * (2.0 * std::f64::consts::PI).sqrt());
        assert!((g.density(2.0) - peak).abs() < 1e-15);
        assert!((g.density(2.5) - peak * (-0.5f64).exp()).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn decomposition_reconstructs(values in prop::collection::vec(0.0f64..1e5, 1..200)) {
            let d = FlowDecomposition::from_values(&values).unwrap();
            let tol = 1e-9 * d.constant.abs().max(1.0);
            prop_assert!(mean(&d.fluctuations).abs() <= tol);
            for (r, v) in d.reconstruct().iter().zip(&values) {
                prop_assert!((r - v).abs() <= 1e-9 * v.abs().max(1.0));
            }
        }

        #[test]
        fn gaussian_translation_equivariant(
            values in prop::collection::vec(-1e3f64..1e3, 2..100),
            shift in -1e4f64..1e4,
        ) {
            prop_assume!(values.iter().any(|v| (v - values[0]).abs() > 1e-3));
            let g = fit_gaussian(&values).unwrap();
            let shifted: Vec<f64> = values.iter().map(|v| v + shift).collect();
            let h = fit_gaussian(&shifted).unwrap();
            prop_assert!((h.mu - g.mu - shift).abs() < 1e-7);
            prop_assert!((h.sigma - g.sigma).abs() < 1e-7 * g.sigma.max(1.0));
        }
    }
}
