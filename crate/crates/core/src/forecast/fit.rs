use std::collections::BTreeSet;

use nalgebra::{DMatrix, Schur};

use super::{Differencing, LagModel, ModelKind, SarimaOrder, TrainingInfo};
use crate::error::{Error, Result};
use crate::ingest::SegmentSeries;
use crate::ols;
use crate::stats::{self, AcfResult};

/// Number of lags kept by the top-lag models.
pub const TOP_LAGS: usize = 3;

/// Spectral radius the MA polynomial is pulled back to when the fitted one
/// is not invertible.
const MA_RADIUS_CAP: f64 = 0.95;

const SCHUR_MAX_ITER: usize = 10_000;

/// Everything that determines a lag-model fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitSpec {
    pub kind: ModelKind,
    pub order: Option<SarimaOrder>,
    pub ar_lags: Vec<usize>,
    pub ma_lags: Vec<usize>,
    pub intercept: bool,
    /// Subtract the training mean of the (differenced) series before fitting
    /// and add it back when predicting.
    pub center: bool,
    pub differencing: Differencing,
    pub season_length: usize,
}

fn min_length(season: usize) -> usize {
    4 * season + 10
}

fn check_length(series: &SegmentSeries, season: usize) -> Result<()> {
    let needed = min_length(season);
    if series.len() < needed {
        return Err(Error::InsufficientData {
            needed,
            got: series.len(),
        });
    }
    Ok(())
}

/// Seasonal ARIMA baseline with a fitted intercept; every lag implied by the
/// multiplied-out polynomials gets a free coefficient.
pub fn fit_baseline_sarima(series: &SegmentSeries, order: SarimaOrder) -> Result<LagModel> {
    order.validate()?;
    check_length(series, order.s)?;
    fit_lag_model(
        series,
        &FitSpec {
            kind: ModelKind::SarimaBaseline,
            order: Some(order),
            ar_lags: order.ar_lags(),
            ma_lags: order.ma_lags(),
            intercept: true,
            center: false,
            differencing: order.differencing(),
            season_length: order.s,
        },
    )
}

/// S-ARIMA on raw counts: AR and MA terms at the three most correlated lags,
/// no intercept. `acf` must come from the same (differenced) series.
pub fn fit_s_arima(
    series: &SegmentSeries,
    acf: &AcfResult,
    differencing: Differencing,
    season_length: usize,
) -> Result<LagModel> {
    check_length(series, season_length)?;
    let lags = stats::top_lags(acf, TOP_LAGS, &BTreeSet::new())?;
    fit_lag_model(
        series,
        &FitSpec {
            kind: ModelKind::SArima,
            order: None,
            ar_lags: lags.clone(),
            ma_lags: lags,
            intercept: false,
            center: false,
            differencing,
            season_length,
        },
    )
}

/// RARIMA: the S-ARIMA structure fitted on the fluctuations around the
/// training mean, which is stored and added back at prediction time.
pub fn fit_rarima(
    series: &SegmentSeries,
    acf_of_fluct: &AcfResult,
    differencing: Differencing,
    season_length: usize,
) -> Result<LagModel> {
    check_length(series, season_length)?;
    let lags = stats::top_lags(acf_of_fluct, TOP_LAGS, &BTreeSet::new())?;
    fit_lag_model(
        series,
        &FitSpec {
            kind: ModelKind::Rarima,
            order: None,
            ar_lags: lags.clone(),
            ma_lags: lags,
            intercept: false,
            center: true,
            differencing,
            season_length,
        },
    )
}

fn rms(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

/// Two-stage conditional least squares. Stage one regresses on the AR lags
/// alone; stage two adds the lagged stage-one residuals as MA regressors.
/// Pre-sample residuals are zero.
pub fn fit_lag_model(series: &SegmentSeries, spec: &FitSpec) -> Result<LagModel> {
    let z = series.counts();
    let n = z.len();
    let span = spec.differencing.span();
    let max_ar = spec.ar_lags.iter().copied().max().unwrap_or(0);
    let start = span + max_ar;
    let n_params = spec.ar_lags.len() + spec.ma_lags.len() + usize::from(spec.intercept);
    if n_params == 0 {
        return Err(Error::InvalidInput("model has no terms".into()));
    }
    let needed = start + 2 * n_params + 5;
    if n < needed {
        return Err(Error::InsufficientData { needed, got: n });
    }
    let all_lags = || -> Vec<usize> {
        let mut l: Vec<usize> = spec.ar_lags.iter().chain(&spec.ma_lags).copied().collect();
        l.sort_unstable();
        l.dedup();
        l
    };

    let w = spec.differencing.apply(z);
    let constant = if spec.center {
        stats::FlowDecomposition::from_values(&w[span..])?.constant
    } else {
        0.0
    };
    let x: Vec<f64> = w.iter().map(|v| v - constant).collect();
    let target = &x[start..];

    let ar_row = |t: usize| -> Vec<f64> {
        let mut row = Vec::with_capacity(n_params);
        if spec.intercept {
            row.push(1.0);
        }
        row.extend(spec.ar_lags.iter().map(|l| x[t - l]));
        row
    };

    // Conditional recursion of the innovations for a coefficient set.
    let recurse = |c: f64, ar: &[f64], ma: &[f64]| -> Vec<f64> {
        let mut a = vec![0.0; n];
        for t in start..n {
            let predicted = c
                + dot(&spec.ar_lags, ar, |l| x[t - l])
                + dot(&spec.ma_lags, ma, |m| if t >= m { a[t - m] } else { 0.0 });
            a[t] = x[t] - predicted;
        }
        a
    };
    let css = |a: &[f64]| -> f64 {
        let v: f64 = a[start..].iter().map(|e| e * e).sum();
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let degenerate =
        rms(target) <= f64::MIN_POSITIVE || (!spec.intercept && target.iter().all(|v| *v == 0.0));
    let (intercept, ar_coeffs, ma_coeffs) = if degenerate {
        (
            0.0,
            vec![0.0; spec.ar_lags.len()],
            vec![0.0; spec.ma_lags.len()],
        )
    } else {
        let rank_err = || Error::RankDeficient { lags: all_lags() };
        // Stage one.
        let mut resid = vec![0.0; n];
        let stage1 = if spec.ar_lags.is_empty() && !spec.intercept {
            resid[start..].copy_from_slice(target);
            None
        } else {
            let rows: Vec<Vec<f64>> = (start..n).map(ar_row).collect();
            let fit = ols::solve(&rows, target).map_err(|_| rank_err())?;
            resid[start..].copy_from_slice(&fit.residuals);
            Some(fit)
        };
        let coeffs = stage1.map(|f| f.coeffs).unwrap_or_else(|| vec![0.0; spec.ar_lags.len()]);
        let (c1, ar1) = split_intercept(&coeffs, spec.intercept);
        let no_ma = vec![0.0; spec.ma_lags.len()];

        let ma_identifiable = rms(&resid[start..]) > 1e-9 * rms(target);
        if spec.ma_lags.is_empty() || !ma_identifiable {
            (c1, ar1, no_ma)
        } else {
            let rows: Vec<Vec<f64>> = (start..n)
                .map(|t| {
                    let mut row = ar_row(t);
                    row.extend(
                        spec.ma_lags
                            .iter()
                            .map(|m| if t >= *m { resid[t - m] } else { 0.0 }),
                    );
                    row
                })
                .collect();
            let fit = ols::solve(&rows, target).map_err(|_| rank_err())?;
            let (c2, rest) = split_intercept(&fit.coeffs, spec.intercept);
            let (ar2, ma2) = rest.split_at(spec.ar_lags.len());
            let ma2 = cap_ma_radius(&spec.ma_lags, ma2.to_vec());
            // AR and MA terms on shared lags can nearly cancel, giving large
            // coefficients whose recursion fits worse than the AR stage alone.
            if css(&recurse(c2, ar2, &ma2)) <= css(&recurse(c1, &ar1, &no_ma)) {
                (c2, ar2.to_vec(), ma2)
            } else {
                (c1, ar1, no_ma)
            }
        }
    };
    let innovations = recurse(intercept, &ar_coeffs, &ma_coeffs);

    let model = LagModel {
        kind: spec.kind,
        order: spec.order,
        ar_lags: spec.ar_lags.clone(),
        ar_coeffs,
        ma_lags: spec.ma_lags.clone(),
        ma_coeffs,
        constant,
        intercept,
        differencing: spec.differencing,
        innovations,
        fitted_from: start,
        last_observed: *series.dates().last().expect("non-empty"),
        training: TrainingInfo {
            station: series.station().to_owned(),
            segment: series.segment(),
            start: series.dates()[0],
            end: *series.dates().last().expect("non-empty"),
            n,
            season_length: spec.season_length,
        },
    };
    if model.innovations.iter().any(|a| !a.is_finite()) {
        return Err(Error::RankDeficient { lags: all_lags() });
    }
    Ok(model)
}

pub(super) fn dot(lags: &[usize], coeffs: &[f64], mut value: impl FnMut(usize) -> f64) -> f64 {
    lags.iter().zip(coeffs).map(|(l, c)| c * value(*l)).sum()
}

fn split_intercept(coeffs: &[f64], intercept: bool) -> (f64, Vec<f64>) {
    if intercept {
        (coeffs[0], coeffs[1..].to_vec())
    } else {
        (0.0, coeffs.to_vec())
    }
}

/// Largest root magnitude of `λ^M + Σ β_m λ^(M-m)`; the innovation
/// recursion is stable when this is below one.
fn ma_spectral_radius(lags: &[usize], coeffs: &[f64]) -> f64 {
    let order = lags.iter().copied().max().unwrap_or(0);
    if order == 0 {
        return 0.0;
    }
    let mut companion = DMatrix::<f64>::zeros(order, order);
    for (l, c) in lags.iter().zip(coeffs) {
        companion[(0, l - 1)] = -c;
    }
    for i in 1..order {
        companion[(i, i - 1)] = 1.0;
    }
    match Schur::try_new(companion, f64::EPSILON, SCHUR_MAX_ITER) {
        Some(schur) => schur
            .complex_eigenvalues()
            .iter()
            .map(|e| e.norm())
            .fold(0.0, f64::max),
        // Every root lies within max(1, Σ|β|); capping against the bound is
        // conservative but still stabilises the recursion.
        None => coeffs.iter().map(|c| c.abs()).sum::<f64>().max(1.0),
    }
}

/// Scales `β_m` by `r^m`, which scales every root of the MA polynomial by
/// `r`, so the recursion becomes stable with radius `MA_RADIUS_CAP`.
fn cap_ma_radius(lags: &[usize], mut coeffs: Vec<f64>) -> Vec<f64> {
    let radius = ma_spectral_radius(lags, &coeffs);
    if radius.is_finite() && radius >= 1.0 {
        let r = MA_RADIUS_CAP / radius;
        for (l, c) in lags.iter().zip(coeffs.iter_mut()) {
            *c *= r.powi(*l as i32);
        }
    }
    coeffs
}

/// Adjusted R² of a fitted model over count indices `from..n`, measured on
/// the differenced series.
pub fn adjusted_r2(model: &LagModel, series: &SegmentSeries, from: usize) -> Option<f64> {
    let n = series.len().min(model.innovations.len());
    let from = from.max(model.fitted_from);
    let rows = n.checked_sub(from)?;
    let regressors = model.ar_lags.len() + model.ma_lags.len();
    if rows <= regressors + 1 {
        return None;
    }
    let w = model.differencing.apply(series.counts());
    let window = &w[from..n];
    let mean = window.iter().sum::<f64>() / rows as f64;
    let sst: f64 = window.iter().map(|v| (v - mean).powi(2)).sum();
    let ssr: f64 = model.innovations[from..n].iter().map(|a| a * a).sum();
    if !(sst > 0.0) {
        return None;
    }
    let r2 = 1.0 - ssr / sst;
    Some(1.0 - (1.0 - r2) * (rows - 1) as f64 / (rows - regressors - 1) as f64)
}

/// Picks the candidate with the highest adjusted R² on a window common to all
/// fitted candidates. Ties go to fewer parameters, then the smaller order.
pub fn select_order(series: &SegmentSeries, candidates: &[SarimaOrder]) -> Result<SarimaOrder> {
    if candidates.len() < 2 {
        return Err(Error::InvalidInput(
            "order selection needs at least two candidates".into(),
        ));
    }
    let fitted: Vec<(SarimaOrder, LagModel)> = candidates
        .iter()
        .filter_map(|o| fit_baseline_sarima(series, *o).ok().map(|m| (*o, m)))
        .collect();
    let common = fitted.iter().map(|(_, m)| m.fitted_from).max();
    let Some(common) = common else {
        return Err(Error::NoViableOrder);
    };
    let mut best: Option<(SarimaOrder, f64)> = None;
    for (order, model) in &fitted {
        let Some(score) = adjusted_r2(model, series, common) else {
            continue;
        };
        let better = match best {
            None => true,
            Some((b, s)) => {
                score > s || (score == s && (order.param_count(), *order) < (b.param_count(), b))
            }
        };
        if better {
            best = Some((*order, score));
        }
    }
    best.map(|(o, _)| o).ok_or(Error::NoViableOrder)
}
