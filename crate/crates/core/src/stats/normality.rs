use std::f64::consts::{PI, SQRT_2};

use statrs::function::erf::erfc;

use super::{TestKind, TestReport};
use crate::error::{Error, Result};

/// Fluctuations are accepted as Gaussian when the K-S p-value exceeds this.
pub(crate) const KS_SIGNIFICANCE: f64 = 0.1;

const MIN_SAMPLES: usize = 8;

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// `P(K > lambda)` for the limiting Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if !(lambda > 0.0) {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi theta form converges quickly for small arguments.
        let coef = (2.0 * PI).sqrt() / lambda;
        let q = -PI * PI / (8.0 * lambda * lambda);
        let cdf: f64 = (1..=20)
            .map(|j| {
                let odd = (2 * j - 1) as f64;
                (odd * odd * q).exp()
            })
            .sum::<f64>()
            * coef;
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        let mut sum = 0.0;
        for j in 1..=100 {
            let jf = j as f64;
            let term = (-2.0 * jf * jf * lambda * lambda).exp();
            sum += if j % 2 == 1 { term } else { -term };
            if term < 1e-300 {
                break;
            }
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}

/// One-sample K-S test of `fluctuations` against a zero-mean Gaussian whose
/// scale is the sample standard deviation. The p-value is the plain
/// asymptotic one, without a correction for the estimated scale.
pub fn ks_normality(fluctuations: &[f64]) -> Result<TestReport> {
    let n = fluctuations.len();
    if n < MIN_SAMPLES {
        return Err(Error::InsufficientData {
            needed: MIN_SAMPLES,
            got: n,
        });
    }
    if fluctuations.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite fluctuation".into()));
    }
    let sigma = super::fit_gaussian(fluctuations)?.sigma;
    let mut sorted = fluctuations.to_vec();
    sorted.sort_by(f64::total_cmp);
    let nf = n as f64;
    let d = sorted
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let f = normal_cdf(x / sigma);
            let above = (i + 1) as f64 / nf - f;
            let below = f - i as f64 / nf;
            above.max(below)
        })
        .fold(0.0, f64::max);
    let p = kolmogorov_survival(nf.sqrt() * d);
    Ok(TestReport::new(TestKind::KsNormality, d, p))
}
