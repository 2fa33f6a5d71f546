//! One-step-ahead walk-forward evaluation over a held-out window.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::{
    baseline_rw, baseline_sm, observe, predict_one, Forecast, LagModel, ModelKind,
};
use crate::hybrid::{select, Choice, HybridSelector, SelectionDecision};
use crate::ingest::{Segment, SegmentSeries};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Name the relative improvement is measured against.
pub const BASELINE_NAME: &str = "SARIMA";

/// A standalone forecaster taking part in the walk.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum Forecaster {
    Lag(LagModel),
    RandomWalk,
    SegmentMean,
}

impl Forecaster {
    fn kind(&self) -> ModelKind {
        match self {
            Forecaster::Lag(m) => m.kind,
            Forecaster::RandomWalk => ModelKind::RandomWalk,
            Forecaster::SegmentMean => ModelKind::SegmentMean,
        }
    }
}

/// The hybrid picks, per step, between the forecasts of two named members
/// of the standalone set.
#[derive(Debug, Clone)]
pub struct HybridEntry {
    pub name: String,
    pub selector: HybridSelector,
    pub model_a: String,
    pub model_b: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelScore {
    pub mae: f64,
    /// Percent over nonzero truths; `None` when every truth is zero.
    pub mape: Option<f64>,
    pub mape_excluded: usize,
    pub n_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub date: NaiveDate,
    pub truth: f64,
    pub forecasts: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub station: String,
    pub segment: Segment,
    pub per_model: BTreeMap<String, ModelScore>,
    /// MAE of the per-step best of `oracle_models`.
    pub oracle_mae: f64,
    pub oracle_models: Vec<String>,
    pub n_steps: usize,
    pub decisions: Vec<SelectionDecision>,
    pub steps: Vec<StepRecord>,
}

/// Mean absolute error and MAPE over nonzero truths.
pub fn score(truths: &[f64], points: &[f64]) -> Result<ModelScore> {
    if truths.len() != points.len() {
        return Err(Error::InvalidInput(
            "truth and forecast lengths differ".into(),
        ));
    }
    if truths.is_empty() {
        return Err(Error::EmptyInput("nothing to score"));
    }
    let n = truths.len();
    let mae = truths
        .iter()
        .zip(points)
        .map(|(z, p)| (z - p).abs())
        .sum::<f64>()
        / n as f64;
    let pct: Vec<f64> = truths
        .iter()
        .zip(points)
        .filter(|(z, _)| **z != 0.0)
        .map(|(z, p)| (z - p).abs() / z.abs() * 100.0)
        .collect();
    let mape = (!pct.is_empty()).then(|| pct.iter().sum::<f64>() / pct.len() as f64);
    Ok(ModelScore {
        mae,
        mape,
        mape_excluded: n - pct.len(),
        n_steps: n,
    })
}

fn check_protocol(
    models: &[(String, Forecaster)],
    train: &SegmentSeries,
    test: &SegmentSeries,
) -> Result<()> {
    if test.is_empty() {
        return Err(Error::EmptyInput("test window is empty"));
    }
    let Some((train_end, _)) = train.last() else {
        return Err(Error::EmptyInput("training window is empty"));
    };
    if train.segment() != test.segment() || train.station() != test.station() {
        return Err(Error::Protocol(format!(
            "train {}/{} and test {}/{} differ",
            train.station(),
            train.segment(),
            test.station(),
            test.segment()
        )));
    }
    if test.dates()[0] <= train_end {
        return Err(Error::Protocol(format!(
            "test starts {} but training runs to {train_end}",
            test.dates()[0]
        )));
    }
    for (name, f) in models {
        if let Forecaster::Lag(m) = f {
            let t = &m.training;
            if t.end != train_end || t.n != train.len() || m.last_observed != train_end {
                return Err(Error::Protocol(format!(
                    "{name} was not fitted on the supplied training window"
                )));
            }
        }
    }
    Ok(())
}

/// Walks the test window in order. At each day every model forecasts from
/// the history so far, the hybrid picks between its two members, and then
/// all lag models observe the truth before the next day.
pub fn walk_forward(
    models: &[(String, Forecaster)],
    hybrid: Option<&HybridEntry>,
    train: &SegmentSeries,
    test: &SegmentSeries,
) -> Result<EvaluationReport> {
    if models.is_empty() {
        return Err(Error::EmptyInput("no models to evaluate"));
    }
    check_protocol(models, train, test)?;
    let mut names: Vec<&str> = models.iter().map(|(n, _)| n.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidInput("duplicate model name".into()));
    }
    let index_of = |name: &str| {
        models
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| Error::InvalidInput(format!("hybrid member {name} not in model set")))
    };
    let hybrid_members = match hybrid {
        Some(h) => {
            if models.iter().any(|(n, _)| *n == h.name) {
                return Err(Error::InvalidInput(format!(
                    "hybrid name {} already used",
                    h.name
                )));
            }
            Some((index_of(&h.model_a)?, index_of(&h.model_b)?))
        }
        None => None,
    };

    let mut oracle_idx: Vec<usize> = models
        .iter()
        .enumerate()
        .filter(|(_, (_, f))| matches!(f.kind(), ModelKind::SArima | ModelKind::Rarima))
        .map(|(i, _)| i)
        .collect();
    if oracle_idx.is_empty() {
        oracle_idx = (0..models.len()).collect();
    }

    let mut state: Vec<Forecaster> = models.iter().map(|(_, f)| f.clone()).collect();
    let mut history = train.clone();
    let mut points: Vec<Vec<f64>> = vec![Vec::with_capacity(test.len()); models.len()];
    let mut hybrid_points = Vec::new();
    let mut oracle_err = Vec::with_capacity(test.len());
    let mut decisions = Vec::new();
    let mut steps = Vec::with_capacity(test.len());

    for (&date, &truth) in test.dates().iter().zip(test.counts()) {
        let forecasts: Vec<Forecast> = state
            .iter()
            .map(|f| match f {
                Forecaster::Lag(m) => predict_one(m, &history, date),
                Forecaster::RandomWalk => baseline_rw(&history, date),
                Forecaster::SegmentMean => baseline_sm(train, date),
            })
            .collect::<Result<_>>()?;

        let mut row = BTreeMap::new();
        for (i, fc) in forecasts.iter().enumerate() {
            points[i].push(fc.point);
            row.insert(models[i].0.clone(), fc.point);
        }
        oracle_err.push(
            oracle_idx
                .iter()
                .map(|&i| (truth - forecasts[i].point).abs())
                .fold(f64::INFINITY, f64::min),
        );
        if let (Some(h), Some((a, b))) = (hybrid, hybrid_members) {
            let decision = select(&h.selector, &forecasts[a], &forecasts[b])?;
            let chosen = match decision.chosen {
                Choice::SArima => forecasts[a].point,
                Choice::Rarima => forecasts[b].point,
            };
            hybrid_points.push(chosen);
            row.insert(h.name.clone(), chosen);
            decisions.push(decision);
        }
        steps.push(StepRecord {
            date,
            truth,
            forecasts: row,
        });

        for (f, fc) in state.iter_mut().zip(&forecasts) {
            if let Forecaster::Lag(m) = f {
                *m = observe(m, truth, fc)?;
            }
        }
        history.push(date, truth)?;
    }

    let truths = test.counts();
    let mut per_model = BTreeMap::new();
    for ((name, _), p) in models.iter().zip(&points) {
        per_model.insert(name.clone(), score(truths, p)?);
    }
    if let Some(h) = hybrid {
        per_model.insert(h.name.clone(), score(truths, &hybrid_points)?);
    }
    Ok(EvaluationReport {
        station: train.station().to_owned(),
        segment: train.segment(),
        per_model,
        oracle_mae: oracle_err.iter().sum::<f64>() / oracle_err.len() as f64,
        oracle_models: oracle_idx.iter().map(|&i| models[i].0.clone()).collect(),
        n_steps: test.len(),
        decisions,
        steps,
    })
}

#[derive(Serialize)]
struct ReportFileRef<'a> {
    schema_version: u32,
    #[serde(flatten)]
    report: &'a EvaluationReport,
}

#[derive(Deserialize)]
struct ReportFile {
    schema_version: u32,
    #[serde(flatten)]
    report: EvaluationReport,
}

impl EvaluationReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ReportFileRef {
            schema_version: REPORT_SCHEMA_VERSION,
            report: self,
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ReportFile = serde_json::from_str(text)?;
        if file.schema_version != REPORT_SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "report schema version {} (expected {REPORT_SCHEMA_VERSION})",
                file.schema_version
            )));
        }
        Ok(file.report)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub segment: Segment,
    pub model: String,
    pub mae: f64,
    pub mape: Option<f64>,
    pub n_steps: usize,
    /// Percent MAE reduction relative to the SARIMA baseline.
    pub improvement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

/// `(baseline − mae) / baseline` in percent.
pub fn improvement(mae: f64, baseline: f64) -> Option<f64> {
    (baseline > 0.0).then(|| (baseline - mae) / baseline * 100.0)
}

/// Flattens reports into one row per segment and model. Every report must
/// list the same models.
pub fn compare_report(reports: &[EvaluationReport]) -> Result<ComparisonTable> {
    let Some(first) = reports.first() else {
        return Err(Error::EmptyInput("no reports to compare"));
    };
    let models: Vec<&String> = first.per_model.keys().collect();
    if models.is_empty() {
        return Err(Error::Schema("report has no models".into()));
    }
    let mut rows = Vec::new();
    for r in reports {
        if r.per_model.keys().collect::<Vec<_>>() != models {
            return Err(Error::Schema(format!(
                "segment {} lists a different model set",
                r.segment
            )));
        }
        let base = r.per_model.get(BASELINE_NAME).map(|s| s.mae);
        for (name, s) in &r.per_model {
            rows.push(ComparisonRow {
                segment: r.segment,
                model: name.clone(),
                mae: s.mae,
                mape: s.mape,
                n_steps: s.n_steps,
                improvement: base.and_then(|b| improvement(s.mae, b)),
            });
        }
    }
    Ok(ComparisonTable { rows })
}

impl ComparisonTable {
    /// Flat `segment,model,mae,mape,n_steps` CSV.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.into());
        w.write_record(["segment", "model", "mae", "mape", "n_steps"])
            .map_err(io)?;
        for r in &self.rows {
            w.write_record([
                r.segment.label().to_owned(),
                r.model.clone(),
                r.mae.to_string(),
                r.mape.map(|m| m.to_string()).unwrap_or_default(),
                r.n_steps.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Per-step hybrid decisions as `date,attribute_a,attribute_b,score_a,score_b,chosen`.
pub fn write_decisions_csv<W: Write>(decisions: &[SelectionDecision], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.into());
    w.write_record([
        "date",
        "attribute_a",
        "attribute_b",
        "score_a",
        "score_b",
        "chosen",
    ])
    .map_err(io)?;
    for d in decisions {
        let chosen = match d.chosen {
            Choice::SArima => "s_arima",
            Choice::Rarima => "rarima",
        };
        w.write_record([
            d.date.to_string(),
            d.attribute_a.to_string(),
            d.attribute_b.to_string(),
            d.score_a.to_string(),
            d.score_b.to_string(),
            chosen.to_owned(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}
