use super::{TestKind, TestReport};
use crate::error::{Error, Result};
use crate::ols;

const MIN_SAMPLES: usize = 20;
const LAG_ORDER: usize = 1;

/// MacKinnon (2010) response surface, constant + trend, one regressor, 1%.
const CT_1PCT: [f64; 4] = [-3.95877, -9.0531, -28.428, -134.155];

/// 1% critical value of the constant-plus-trend ADF statistic for `nobs`
/// regression observations.
pub fn adf_critical_value_1pct(nobs: usize) -> f64 {
    let t = nobs as f64;
    CT_1PCT[0] + CT_1PCT[1] / t + CT_1PCT[2] / (t * t) + CT_1PCT[3] / (t * t * t)
}

/// ADF t-statistic of the lagged level in
/// `Δy_t = a + b·t + γ·y_{t-1} + δ·Δy_{t-1} + e_t`, with the number of
/// regression rows.
pub fn adf_statistic(values: &[f64]) -> Result<(f64, usize)> {
    let n = values.len();
    if n < MIN_SAMPLES {
        return Err(Error::InsufficientData {
            needed: MIN_SAMPLES,
            got: n,
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite value".into()));
    }
    let diff: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let start = LAG_ORDER + 1;
    let mut rows = Vec::with_capacity(n - start);
    let mut y = Vec::with_capacity(n - start);
    for t in start..n {
        let mut row = vec![1.0, t as f64, values[t - 1]];
        row.extend((1..=LAG_ORDER).map(|k| diff[t - 1 - k]));
        rows.push(row);
        y.push(diff[t - 1]);
    }
    let fit = ols::solve(&rows, &y).map_err(|_| Error::Degenerate("singular ADF regression"))?;
    let se = fit.std_error(2);
    if !(se > 0.0) || !se.is_finite() {
        return Err(Error::Degenerate(
            "zero residual variance in ADF regression",
        ));
    }
    Ok((fit.coeffs[2] / se, rows.len()))
}

/// Augmented Dickey-Fuller test (constant + trend, one lagged difference).
/// Passes when the statistic lies below the 1% critical value.
pub fn adf_stationarity(values: &[f64]) -> Result<TestReport> {
    let (stat, nobs) = adf_statistic(values)?;
    Ok(TestReport::new(
        TestKind::AdfStationarity,
        stat,
        adf_critical_value_1pct(nobs),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn critical_value_near_reported_sample() {
        // -4.199 at 1% corresponds to roughly 41 regression observations.
        assert!((adf_critical_value_1pct(41) - (-4.199)).abs() < 2e-3);
        assert!(adf_critical_value_1pct(10_000) > -3.961);
        assert!(adf_critical_value_1pct(30) < adf_critical_value_1pct(100));
    }

    #[test]
    fn pass_rule_is_strict_comparison() {
        let r = TestReport::new(TestKind::AdfStationarity, -4.881, -4.199);
        assert!(r.passed);
        let r = TestReport::new(TestKind::AdfStationarity, -3.0, -4.199);
        assert!(!r.passed);
    }

    #[test]
    fn oscillating_series_is_stationary() {
        let x: Vec<f64> = (0..60)
            .map(|i| ((i * 7919) % 13) as f64 - 6.0 + if i % 2 == 0 { 3.0 } else { -3.0 })
            .collect();
        assert!(adf_stationarity(&x).unwrap().passed);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            adf_stationarity(&[1.0; 10]),
            Err(Error::InsufficientData { .. })
        ));
        assert!(adf_stationarity(&[5.0; 30]).is_err());
    }
}
