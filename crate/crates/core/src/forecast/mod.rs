//! Lag-model forecasters: the seasonal ARIMA baseline, the top-lag S-ARIMA,
//! the fluctuation-based RARIMA, and the naive RW/SM baselines.

mod fit;
mod predict;

use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

pub use fit::{
    adjusted_r2, fit_baseline_sarima, fit_lag_model, fit_rarima, fit_s_arima, select_order,
    FitSpec, TOP_LAGS,
};
pub use predict::{baseline_rw, baseline_sm, observe, predict_one};

use crate::error::{Error, Result};
use crate::ingest::Segment;

/// Bumped whenever the model file layout changes incompatibly.
pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    SarimaBaseline,
    SArima,
    Rarima,
    RandomWalk,
    SegmentMean,
}

impl ModelKind {
    /// Display name used in reports.
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::SarimaBaseline => "SARIMA",
            ModelKind::SArima => "S-ARIMA",
            ModelKind::Rarima => "RARIMA",
            ModelKind::RandomWalk => "RW",
            ModelKind::SegmentMean => "SM",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `SARIMA(p,d,q)(P,D,Q)_s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SarimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    #[serde(rename = "P")]
    pub seasonal_p: usize,
    #[serde(rename = "D")]
    pub seasonal_d: usize,
    #[serde(rename = "Q")]
    pub seasonal_q: usize,
    pub s: usize,
}

impl SarimaOrder {
    pub fn new(
        p: usize,
        d: usize,
        q: usize,
        sp: usize,
        sd: usize,
        sq: usize,
        s: usize,
    ) -> Result<Self> {
        let order = SarimaOrder {
            p,
            d,
            q,
            seasonal_p: sp,
            seasonal_d: sd,
            seasonal_q: sq,
            s,
        };
        order.validate()?;
        Ok(order)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p + self.q + self.seasonal_p + self.seasonal_q == 0 {
            return Err(Error::InvalidInput(format!("{self}: no AR or MA terms")));
        }
        if self.d > 1 || self.seasonal_d > 1 {
            return Err(Error::InvalidInput(format!(
                "{self}: differencing orders must be 0 or 1"
            )));
        }
        if self.s < 2 {
            return Err(Error::InvalidInput(format!(
                "{self}: season length must be at least 2"
            )));
        }
        Ok(())
    }

    /// Lags of `φ_p(B)·Φ_P(B^s)` once the product is multiplied out.
    pub fn ar_lags(&self) -> Vec<usize> {
        expand_lags(self.p, self.seasonal_p, self.s)
    }

    /// Lags of `θ_q(B)·Θ_Q(B^s)` once the product is multiplied out.
    pub fn ma_lags(&self) -> Vec<usize> {
        expand_lags(self.q, self.seasonal_q, self.s)
    }

    pub fn differencing(&self) -> Differencing {
        Differencing {
            regular: self.d,
            seasonal: self.seasonal_d,
            season: self.s,
        }
    }

    pub fn param_count(&self) -> usize {
        self.p + self.q + self.seasonal_p + self.seasonal_q
    }

    /// Every order with `p, q ∈ {1,2,3}`, `P ∈ {0,1}`, `Q = D = 0`.
    pub fn default_grid(s: usize, d: usize) -> Vec<SarimaOrder> {
        let mut out = Vec::new();
        for p in 1..=3 {
            for q in 1..=3 {
                for sp in 0..=1 {
                    out.push(SarimaOrder {
                        p,
                        d,
                        q,
                        seasonal_p: sp,
                        seasonal_d: 0,
                        seasonal_q: 0,
                        s,
                    });
                }
            }
        }
        out
    }
}

impl fmt::Display for SarimaOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({},{},{})({},{},{})_{}",
            self.p, self.d, self.q, self.seasonal_p, self.seasonal_d, self.seasonal_q, self.s
        )
    }
}

fn expand_lags(regular: usize, seasonal: usize, s: usize) -> Vec<usize> {
    let mut lags: Vec<usize> = (0..=seasonal)
        .flat_map(|j| (0..=regular).map(move |i| i + j * s))
        .filter(|l| *l > 0)
        .collect();
    lags.sort_unstable();
    lags.dedup();
    lags
}

/// `(1 - B)^regular (1 - B^season)^seasonal`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Differencing {
    pub regular: usize,
    pub seasonal: usize,
    pub season: usize,
}

impl Differencing {
    pub fn none() -> Self {
        Differencing::default()
    }

    pub fn first() -> Self {
        Differencing {
            regular: 1,
            ..Differencing::default()
        }
    }

    pub fn is_identity(&self) -> bool {
        self.regular == 0 && self.seasonal == 0
    }

    /// Coefficients `c_k` for `k >= 1` with `c_k != 0`.
    pub fn lag_terms(&self) -> Vec<(usize, f64)> {
        let mut poly = vec![1.0];
        let mut mul = |lag: usize| {
            let mut next = vec![0.0; poly.len() + lag];
            for (i, c) in poly.iter().enumerate() {
                next[i] += c;
                next[i + lag] -= c;
            }
            poly = next;
        };
        for _ in 0..self.regular {
            mul(1);
        }
        for _ in 0..self.seasonal {
            mul(self.season);
        }
        poly.into_iter()
            .enumerate()
            .skip(1)
            .filter(|(_, c)| *c != 0.0)
            .collect()
    }

    /// Number of leading observations consumed.
    pub fn span(&self) -> usize {
        self.regular + self.seasonal * self.season
    }

    /// Differenced value at index `t` of `z`; requires `t >= span()`.
    pub fn apply_at(&self, z: &[f64], t: usize) -> f64 {
        self.lag_terms()
            .iter()
            .fold(z[t], |acc, (k, c)| acc + c * z[t - k])
    }

    /// Full-length differenced series; entries before `span()` are zero.
    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        let terms = self.lag_terms();
        let span = self.span();
        (0..z.len())
            .map(|t| {
                if t < span {
                    0.0
                } else {
                    terms.iter().fold(z[t], |acc, (k, c)| acc + c * z[t - k])
                }
            })
            .collect()
    }

    /// Level at index `n = z.len()` given the differenced value there.
    pub fn integrate(&self, w: f64, z: &[f64]) -> f64 {
        let n = z.len();
        self.lag_terms()
            .iter()
            .fold(w, |acc, (k, c)| acc - c * z[n - k])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingInfo {
    pub station: String,
    pub segment: Segment,
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub n: usize,
    pub season_length: usize,
}

/// A fitted lag model. Coefficients are fixed after fitting; only the
/// innovation history grows as truths are observed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagModel {
    pub kind: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<SarimaOrder>,
    pub ar_lags: Vec<usize>,
    pub ar_coeffs: Vec<f64>,
    pub ma_lags: Vec<usize>,
    pub ma_coeffs: Vec<f64>,
    /// Level added back after predicting the fluctuation (RARIMA), else 0.
    pub constant: f64,
    pub intercept: f64,
    #[serde(default)]
    pub differencing: Differencing,
    /// One residual per observed day, aligned with the count index. Days
    /// before `fitted_from` carry zero (pre-sample convention).
    pub innovations: Vec<f64>,
    pub fitted_from: usize,
    /// Date of the most recent observation folded into `innovations`.
    pub last_observed: NaiveDate,
    pub training: TrainingInfo,
}

#[derive(Serialize)]
struct ModelFileRef<'a> {
    schema_version: u32,
    #[serde(flatten)]
    model: &'a LagModel,
}

#[derive(Deserialize)]
struct ModelFile {
    schema_version: u32,
    #[serde(flatten)]
    model: LagModel,
}

impl LagModel {
    /// `S-ARIMA(2,7,5)`, `RARIMA(1,5,7)` or `SARIMA(2,0,2)(1,0,0)_5`.
    pub fn label(&self) -> String {
        match (self.kind, self.order) {
            (ModelKind::SarimaBaseline, Some(order)) => format!("SARIMA{order}"),
            _ => {
                let lags: Vec<String> = self.ar_lags.iter().map(|l| l.to_string()).collect();
                format!("{}({})", self.kind.name(), lags.join(","))
            }
        }
    }

    /// Largest AR or MA lag.
    pub fn max_lag(&self) -> usize {
        self.ar_lags
            .iter()
            .chain(&self.ma_lags)
            .copied()
            .max()
            .unwrap_or(0)
    }

    /// Checks the structural invariants of a deserialized model.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Schema(m.to_owned()));
        if !matches!(
            self.kind,
            ModelKind::SarimaBaseline | ModelKind::SArima | ModelKind::Rarima
        ) {
            return bad("model kind is not a lag model");
        }
        if self.ar_lags.len() != self.ar_coeffs.len() || self.ma_lags.len() != self.ma_coeffs.len()
        {
            return bad("lag and coefficient lists differ in length");
        }
        if self.ar_lags.iter().chain(&self.ma_lags).any(|l| *l == 0) {
            return bad("lags must be positive");
        }
        if matches!(self.kind, ModelKind::SArima | ModelKind::Rarima)
            && (self.ar_lags.len() > 3 || self.ma_lags.len() > 3)
        {
            return bad("top-lag models use at most three lags");
        }
        if self.differencing.regular > 1 || self.differencing.seasonal > 1 {
            return bad("differencing orders must be 0 or 1");
        }
        if self.differencing.seasonal > 0 && self.differencing.season < 2 {
            return bad("seasonal differencing needs a season of at least 2");
        }
        if self.max_lag() > 10_000 || self.differencing.span() > 10_000 {
            return bad("lag out of range");
        }
        let numbers = self
            .ar_coeffs
            .iter()
            .chain(&self.ma_coeffs)
            .chain(&self.innovations)
            .chain([&self.constant, &self.intercept]);
        if numbers.into_iter().any(|v| !v.is_finite()) {
            return bad("non-finite parameter");
        }
        if self.fitted_from > self.innovations.len() {
            return bad("fitted_from beyond innovation history");
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelFileRef {
            schema_version: MODEL_SCHEMA_VERSION,
            model: self,
        })?)
    }

    /// Parses and validates a model file. Unknown fields are ignored so newer
    /// writers stay readable.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "model schema version {} (expected {MODEL_SCHEMA_VERSION})",
                file.schema_version
            )));
        }
        file.model.validate()?;
        Ok(file.model)
    }
}

/// One-step-ahead point forecast.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub date: NaiveDate,
    /// Count index being forecast (the history length at prediction time).
    pub step: usize,
    pub point: f64,
    pub pre_clamp: f64,
    pub model_kind: ModelKind,
}

impl Forecast {
    pub(crate) fn new(date: NaiveDate, step: usize, pre_clamp: f64, model_kind: ModelKind) -> Self {
        Forecast {
            date,
            step,
            point: pre_clamp.max(0.0),
            pre_clamp,
            model_kind,
        }
    }
}
