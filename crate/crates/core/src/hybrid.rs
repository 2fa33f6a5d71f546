//! Two-class Gaussian naive Bayes choice between S-ARIMA (class A) and
//! RARIMA (class B), made before every prediction.
//!
//! The single attribute is a model's forecast minus the segment's training
//! constant. Each class density is evaluated at its own model's attribute.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::{predict_one, Forecast, LagModel};
use crate::ingest::SegmentSeries;
use crate::stats::{fit_gaussian, GaussianFit};

pub const SELECTOR_SCHEMA_VERSION: u32 = 1;

const MIN_TRAINING_STEPS: usize = 10;
const MIN_CLASS_SAMPLES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Choice {
    SArima,
    Rarima,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridSelector {
    pub prior_a: f64,
    pub prior_b: f64,
    pub gauss_a: Option<GaussianFit>,
    pub gauss_b: Option<GaussianFit>,
    pub n: usize,
    pub n_a: usize,
    pub n_b: usize,
    /// Training constant the attributes are measured from.
    pub constant: f64,
    /// Set when a class could not be trained; the selector then always
    /// answers RARIMA.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback: Option<String>,
}

#[derive(Serialize)]
struct SelectorFileRef<'a> {
    schema_version: u32,
    #[serde(flatten)]
    selector: &'a HybridSelector,
}

#[derive(Deserialize)]
struct SelectorFile {
    schema_version: u32,
    #[serde(flatten)]
    selector: HybridSelector,
}

impl HybridSelector {
    pub fn is_fallback(&self) -> bool {
        self.fallback.is_some()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Schema(m.to_owned()));
        let probs = [self.prior_a, self.prior_b];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p))
            || (self.prior_a + self.prior_b - 1.0).abs() > 1e-9
        {
            return bad("priors must be probabilities summing to one");
        }
        if self.n_a + self.n_b != self.n {
            return bad("class counts do not add up");
        }
        if !self.constant.is_finite() {
            return bad("non-finite constant");
        }
        for g in [self.gauss_a, self.gauss_b].into_iter().flatten() {
            if !g.mu.is_finite() || !(g.sigma > 0.0) || !g.sigma.is_finite() {
                return bad("class densities need finite mean and positive sigma");
            }
        }
        if self.fallback.is_none() && (self.gauss_a.is_none() || self.gauss_b.is_none()) {
            return bad("trained selector is missing a class density");
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&SelectorFileRef {
            schema_version: SELECTOR_SCHEMA_VERSION,
            selector: self,
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SelectorFile = serde_json::from_str(text)?;
        if file.schema_version != SELECTOR_SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "selector schema version {} (expected {SELECTOR_SCHEMA_VERSION})",
                file.schema_version
            )));
        }
        file.selector.validate()?;
        Ok(file.selector)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionDecision {
    pub date: NaiveDate,
    pub chosen: Choice,
    pub score_a: f64,
    pub score_b: f64,
    pub attribute_a: f64,
    pub attribute_b: f64,
}

/// Labels each training step with the model of smaller absolute error (ties
/// go to A), then fits add-one smoothed priors and per-class Gaussians.
pub fn train_selector(
    truth: &[f64],
    fc_a: &[f64],
    fc_b: &[f64],
    constant: f64,
) -> Result<HybridSelector> {
    if truth.len() != fc_a.len() || truth.len() != fc_b.len() {
        return Err(Error::InvalidInput(format!(
            "length mismatch: {} truths, {} and {} forecasts",
            truth.len(),
            fc_a.len(),
            fc_b.len()
        )));
    }
    if truth.len() < MIN_TRAINING_STEPS {
        return Err(Error::InsufficientData {
            needed: MIN_TRAINING_STEPS,
            got: truth.len(),
        });
    }
    let all = truth.iter().chain(fc_a).chain(fc_b).chain([&constant]);
    if all.into_iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite training value".into()));
    }

    let mut attr_a = Vec::new();
    let mut attr_b = Vec::new();
    for ((z, a), b) in truth.iter().zip(fc_a).zip(fc_b) {
        if (z - a).abs() <= (z - b).abs() {
            attr_a.push(a - constant);
        } else {
            attr_b.push(b - constant);
        }
    }
    let n = truth.len();
    let (n_a, n_b) = (attr_a.len(), attr_b.len());
    let prior_a = (n_a + 1) as f64 / (n + 2) as f64;

    let fit_class = |name: &str, samples: &[f64]| -> std::result::Result<GaussianFit, String> {
        if samples.len() < MIN_CLASS_SAMPLES {
            return Err(format!(
                "class {name} has {} labelled samples (need {MIN_CLASS_SAMPLES})",
                samples.len()
            ));
        }
        fit_gaussian(samples).map_err(|e| format!("class {name}: {e}"))
    };
    let a = fit_class("A (S-ARIMA)", &attr_a);
    let b = fit_class("B (RARIMA)", &attr_b);
    let fallback = match (&a, &b) {
        (Err(e), _) | (_, Err(e)) => Some(e.clone()),
        _ => None,
    };
    Ok(HybridSelector {
        prior_a,
        prior_b: 1.0 - prior_a,
        gauss_a: a.ok(),
        gauss_b: b.ok(),
        n,
        n_a,
        n_b,
        constant,
        fallback,
    })
}

/// Class A wins only on a strictly larger score.
pub fn decide(score_a: f64, score_b: f64) -> Choice {
    if score_a > score_b {
        Choice::SArima
    } else {
        Choice::Rarima
    }
}

fn log_score(prior: f64, g: &GaussianFit, x: f64) -> f64 {
    let z = (x - g.mu) / g.sigma;
    prior.ln() - g.sigma.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * z * z
}

/// Scores both candidate forecasts and picks one. The comparison runs on
/// log scores so that far-tail densities do not underflow into a tie.
pub fn select(
    selector: &HybridSelector,
    fc_a: &Forecast,
    fc_b: &Forecast,
) -> Result<SelectionDecision> {
    let attribute_a = fc_a.pre_clamp - selector.constant;
    let attribute_b = fc_b.pre_clamp - selector.constant;
    if !attribute_a.is_finite() || !attribute_b.is_finite() {
        return Err(Error::InvalidInput("non-finite attribute".into()));
    }
    let date = fc_a.date;
    let (Some(ga), Some(gb), None) = (&selector.gauss_a, &selector.gauss_b, &selector.fallback)
    else {
        return Ok(SelectionDecision {
            date,
            chosen: Choice::Rarima,
            score_a: 0.0,
            score_b: 0.0,
            attribute_a,
            attribute_b,
        });
    };
    let la = log_score(selector.prior_a, ga, attribute_a);
    let lb = log_score(selector.prior_b, gb, attribute_b);
    Ok(SelectionDecision {
        date,
        chosen: decide(la, lb),
        score_a: la.exp(),
        score_b: lb.exp(),
        attribute_a,
        attribute_b,
    })
}

/// Runs both models on `history` and returns the selected forecast with the
/// decision behind it. Callers must feed the truth to both models afterwards.
pub fn predict_hybrid(
    selector: &HybridSelector,
    model_a: &LagModel,
    model_b: &LagModel,
    history: &SegmentSeries,
    date: NaiveDate,
) -> Result<(Forecast, SelectionDecision)> {
    let fa = predict_one(model_a, history, date)?;
    let fb = predict_one(model_b, history, date)?;
    let decision = select(selector, &fa, &fb)?;
    let chosen = match decision.chosen {
        Choice::SArima => fa,
        Choice::Rarima => fb,
    };
    Ok((chosen, decision))
}
