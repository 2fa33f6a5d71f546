//! Per-segment analysis, fitting and evaluation glued together.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{walk_forward, EvaluationReport, Forecaster, HybridEntry};
use crate::forecast::{
    fit_baseline_sarima, fit_rarima, fit_s_arima, select_order, Differencing, LagModel, SarimaOrder,
};
use crate::hybrid::{train_selector, HybridSelector};
use crate::ingest::{Segment, SegmentSeries};
use crate::stats::{self, AcfResult, TestReport};

pub const HYBRID_NAME: &str = "BARIMA";

/// How the regular difference is chosen before fitting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DifferencingChoice {
    /// Difference once when the training counts fail the ADF test.
    #[default]
    Auto,
    None,
    First,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub season_length: usize,
    /// Largest ACF lag considered; two seasons when unset.
    pub max_acf_lag: Option<usize>,
    /// Baseline order candidates; the default grid when unset.
    pub grid: Option<Vec<SarimaOrder>>,
    pub differencing: DifferencingChoice,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            season_length: 5,
            max_acf_lag: None,
            grid: None,
            differencing: DifferencingChoice::Auto,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.season_length < 2 {
            return Err(Error::InvalidInput(
                "season length must be at least 2".into(),
            ));
        }
        if self.max_acf_lag == Some(0) {
            return Err(Error::InvalidInput("ACF lag limit must be positive".into()));
        }
        for o in self.grid.iter().flatten() {
            o.validate()?;
        }
        Ok(())
    }

    pub fn acf_lags(&self) -> usize {
        self.max_acf_lag.unwrap_or(2 * self.season_length)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentAnalysis {
    pub station: String,
    pub segment: Segment,
    pub n: usize,
    pub constant: f64,
    pub fluctuation_sigma: f64,
    pub acf: AcfResult,
    pub top_lags: Vec<usize>,
    pub ks: TestReport,
    pub adf: TestReport,
}

/// Decomposition, ACF, K-S on the fluctuations and ADF on the counts.
pub fn analyze_segment(series: &SegmentSeries, config: &PipelineConfig) -> Result<SegmentAnalysis> {
    config.validate()?;
    let d = stats::decompose(series)?;
    let acf = stats::acf(&d.fluctuations, config.acf_lags())?;
    let top = stats::top_lags(&acf, crate::forecast::TOP_LAGS, &Default::default())?;
    let sigma = stats::fit_gaussian(&d.fluctuations)?.sigma;
    Ok(SegmentAnalysis {
        station: series.station().to_owned(),
        segment: series.segment(),
        n: series.len(),
        constant: d.constant,
        fluctuation_sigma: sigma,
        ks: stats::ks_normality(&d.fluctuations)?,
        adf: stats::adf_stationarity(series.counts())?,
        acf,
        top_lags: top,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedSegment {
    pub adf: TestReport,
    pub differencing: Differencing,
    pub order: SarimaOrder,
    pub baseline: LagModel,
    pub s_arima: LagModel,
    pub rarima: LagModel,
    pub selector: HybridSelector,
}

fn differencing_for(
    train: &SegmentSeries,
    config: &PipelineConfig,
) -> Result<(TestReport, Differencing)> {
    let adf = stats::adf_stationarity(train.counts())?;
    let diff = match config.differencing {
        DifferencingChoice::Auto if adf.passed => Differencing::none(),
        DifferencingChoice::Auto | DifferencingChoice::First => Differencing::first(),
        DifferencingChoice::None => Differencing::none(),
    };
    Ok((adf, diff))
}

/// Fits every model of one segment on `train` only.
pub fn fit_segment(train: &SegmentSeries, config: &PipelineConfig) -> Result<FittedSegment> {
    config.validate()?;
    let s = config.season_length;
    let (adf, differencing) = differencing_for(train, config)?;
    let w = differencing.apply(train.counts());
    let span = differencing.span();
    let acf = stats::acf(&w[span..], config.acf_lags())?;

    let grid = config
        .grid
        .clone()
        .unwrap_or_else(|| SarimaOrder::default_grid(s, differencing.regular));
    let order = select_order(train, &grid)?;
    let baseline = fit_baseline_sarima(train, order)?;
    let s_arima = fit_s_arima(train, &acf, differencing, s)?;
    // Centering does not move the ACF, so the fluctuations share `acf`.
    let rarima = fit_rarima(train, &acf, differencing, s)?;

    let from = s_arima.fitted_from.max(rarima.fitted_from);
    let a = s_arima.in_sample(train);
    let b = rarima.in_sample(train);
    let pick = |v: &[(usize, f64)]| -> Vec<f64> {
        v.iter().filter(|(t, _)| *t >= from).map(|p| p.1).collect()
    };
    let fa = pick(&a);
    let fb = pick(&b);
    let truth = &train.counts()[from..from + fa.len()];
    let constant = stats::decompose(train)?.constant;
    let selector = train_selector(truth, &fa, &fb, constant)?;

    Ok(FittedSegment {
        adf,
        differencing,
        order,
        baseline,
        s_arima,
        rarima,
        selector,
    })
}

/// The standalone model set in report order, plus the hybrid over the two
/// top-lag models.
pub fn model_set(fitted: &FittedSegment) -> (Vec<(String, Forecaster)>, HybridEntry) {
    let models = vec![
        (
            "SARIMA".to_owned(),
            Forecaster::Lag(fitted.baseline.clone()),
        ),
        (
            "S-ARIMA".to_owned(),
            Forecaster::Lag(fitted.s_arima.clone()),
        ),
        ("RARIMA".to_owned(), Forecaster::Lag(fitted.rarima.clone())),
        ("RW".to_owned(), Forecaster::RandomWalk),
        ("SM".to_owned(), Forecaster::SegmentMean),
    ];
    let hybrid = HybridEntry {
        name: HYBRID_NAME.to_owned(),
        selector: fitted.selector.clone(),
        model_a: "S-ARIMA".to_owned(),
        model_b: "RARIMA".to_owned(),
    };
    (models, hybrid)
}

pub fn evaluate_segment(
    fitted: &FittedSegment,
    train: &SegmentSeries,
    test: &SegmentSeries,
) -> Result<EvaluationReport> {
    let (models, hybrid) = model_set(fitted);
    walk_forward(&models, Some(&hybrid), train, test)
}

/// Fits on the first `n - test_len` observations and walks the rest.
pub fn run_segment(
    series: &SegmentSeries,
    test_len: usize,
    config: &PipelineConfig,
) -> Result<(FittedSegment, EvaluationReport)> {
    if test_len == 0 || test_len >= series.len() {
        return Err(Error::InvalidInput(format!(
            "test length {test_len} leaves no train or test data in {} observations",
            series.len()
        )));
    }
    let (train, test) = series.split_at(series.len() - test_len);
    let fitted = fit_segment(&train, config)?;
    let report = evaluate_segment(&fitted, &train, &test)?;
    Ok((fitted, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    fn seg(seed: u64) -> SegmentSeries {
        let v = synth::seasonal_ar(800.0, &[(1, 0.3), (5, 0.4)], 30.0, 120, seed).unwrap();
        synth::weekday_series(v, Segment::H07To11).unwrap()
    }

    #[test]
    fn config_defaults_and_validation() {
        let c = PipelineConfig::default();
        assert_eq!((c.season_length, c.acf_lags()), (5, 10));
        let bad = PipelineConfig {
            season_length: 1,
            ..c
        };
        assert!(bad.validate().is_err());
        let parsed: PipelineConfig = serde_json::from_str(r#"{"season_length": 7}"#).unwrap();
        assert_eq!(parsed.acf_lags(), 14);
    }

    #[test]
    fn analysis_reports_every_test() {
        let a = analyze_segment(&seg(1), &PipelineConfig::default()).unwrap();
        assert_eq!(a.n, 120);
        assert!((a.constant - 800.0).abs() < 40.0);
        assert_eq!(a.top_lags.len(), 3);
        assert!(a.top_lags.contains(&5) || a.top_lags.contains(&1));
        assert!(a.ks.passed);
        assert!(a.adf.passed);
    }

    #[test]
    fn fit_and_walk() {
        let series = seg(2);
        let (fitted, report) = run_segment(&series, 10, &PipelineConfig::default()).unwrap();
        assert!(fitted.differencing.is_identity());
        assert_eq!(fitted.s_arima.ar_lags, fitted.rarima.ar_lags);
        assert_eq!(fitted.baseline.training.n, 110);
        assert_eq!(report.n_steps, 10);
        assert_eq!(report.decisions.len(), 10);
        for name in ["SARIMA", "S-ARIMA", "RARIMA", "RW", "SM", "BARIMA"] {
            assert!(report.per_model.contains_key(name), "{name}");
        }
        assert!(report.per_model["BARIMA"].mae >= report.oracle_mae);
    }

    #[test]
    fn forced_differencing() {
        let config = PipelineConfig {
            differencing: DifferencingChoice::First,
            ..Default::default()
        };
        let fitted = fit_segment(&seg(3).split_at(100).0, &config).unwrap();
        assert_eq!(fitted.differencing, Differencing::first());
        assert_eq!(fitted.order.d, 1);
    }

    #[test]
    fn bad_split() {
        assert!(run_segment(&seg(4), 0, &PipelineConfig::default()).is_err());
        assert!(run_segment(&seg(4), 120, &PipelineConfig::default()).is_err());
    }
}
