use chrono::NaiveDate;

use super::fit::dot;
use super::{Forecast, LagModel, ModelKind};
use crate::error::{Error, Result};
use crate::ingest::SegmentSeries;
use crate::stats;

/// One-step forecast for the day after `history`, dated `date`.
///
/// `history` holds raw counts; differencing and the stored constant are
/// applied internally.
pub fn predict_one(model: &LagModel, history: &SegmentSeries, date: NaiveDate) -> Result<Forecast> {
    let z = history.counts();
    let n = z.len();
    let span = model.differencing.span();
    if let Some(last) = history.dates().last() {
        if date <= *last {
            return Err(Error::Sequencing(format!(
                "forecast date {date} does not follow history end {last}"
            )));
        }
    }
    if n < span {
        return Err(Error::InsufficientHistory { lag: span });
    }
    for &lag in &model.ar_lags {
        if n < span + lag {
            return Err(Error::InsufficientHistory { lag });
        }
    }
    for &lag in &model.ma_lags {
        if n >= lag && n - lag >= model.innovations.len() {
            return Err(Error::InsufficientHistory { lag });
        }
    }

    let x = |t: usize| model.differencing.apply_at(z, t) - model.constant;
    let fluctuation = model.intercept
        + dot(&model.ar_lags, &model.ar_coeffs, |l| x(n - l))
        + dot(&model.ma_lags, &model.ma_coeffs, |m| {
            if n >= m {
                model.innovations[n - m]
            } else {
                0.0
            }
        });
    let level = model
        .differencing
        .integrate(fluctuation + model.constant, z);
    Ok(Forecast::new(date, n, level, model.kind))
}

/// Folds an observed truth into the innovation history. Coefficients are
/// left untouched.
pub fn observe(model: &LagModel, truth: f64, forecast: &Forecast) -> Result<LagModel> {
    if forecast.model_kind != model.kind {
        return Err(Error::Sequencing(format!(
            "forecast from {} fed to {}",
            forecast.model_kind, model.kind
        )));
    }
    if forecast.step != model.innovations.len() || forecast.date <= model.last_observed {
        return Err(Error::Sequencing(format!(
            "forecast for step {} ({}) but model expects step {} after {}",
            forecast.step,
            forecast.date,
            model.innovations.len(),
            model.last_observed
        )));
    }
    if !truth.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite truth {truth}")));
    }
    let mut next = model.clone();
    next.innovations.push(truth - forecast.pre_clamp);
    next.last_observed = forecast.date;
    Ok(next)
}

/// Random walk: tomorrow equals today.
pub fn baseline_rw(history: &SegmentSeries, date: NaiveDate) -> Result<Forecast> {
    let (_, last) = history
        .last()
        .ok_or(Error::EmptyInput("random walk needs one observation"))?;
    Ok(Forecast::new(
        date,
        history.len(),
        last,
        ModelKind::RandomWalk,
    ))
}

/// Segment mean of the training window.
pub fn baseline_sm(training: &SegmentSeries, date: NaiveDate) -> Result<Forecast> {
    let d = stats::decompose(training)
        .map_err(|_| Error::EmptyInput("segment mean needs training data"))?;
    Ok(Forecast::new(
        date,
        training.len(),
        d.constant,
        ModelKind::SegmentMean,
    ))
}

impl LagModel {
    /// In-sample one-step forecasts (pre-clamp) for training indices from
    /// `fitted_from` on, reconstructed from the stored innovations.
    pub fn in_sample(&self, training: &SegmentSeries) -> Vec<(usize, f64)> {
        let n = training.len().min(self.innovations.len());
        (self.fitted_from..n)
            .map(|t| (t, training.counts()[t] - self.innovations[t]))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::{Differencing, TrainingInfo};
    use crate::ingest::Segment;

    fn day(d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2016, 1, d).unwrap()
    }

    fn hist(counts: &[f64]) -> SegmentSeries {
        let dates = (0..counts.len()).map(|i| day(1 + i as u32)).collect();
        SegmentSeries::new("T", Segment::H03To07, dates, counts.to_vec()).unwrap()
    }

    fn model(kind: ModelKind, ar: &[(usize, f64)], ma: &[(usize, f64)], n: usize) -> LagModel {
        LagModel {
            kind,
            order: None,
            ar_lags: ar.iter().map(|p| p.0).collect(),
            ar_coeffs: ar.iter().map(|p| p.1).collect(),
            ma_lags: ma.iter().map(|p| p.0).collect(),
            ma_coeffs: ma.iter().map(|p| p.1).collect(),
            constant: 0.0,
            intercept: 0.0,
            differencing: Differencing::none(),
            innovations: vec![0.0; n],
            fitted_from: 0,
            last_observed: day(n as u32),
            training: TrainingInfo {
                station: "T".into(),
                segment: Segment::H03To07,
                start: day(1),
                end: day(n as u32),
                n,
                season_length: 5,
            },
        }
    }

    #[test]
    fn zero_rarima_returns_constant() {
        let mut m = model(ModelKind::Rarima, &[(1, 0.0), (5, 0.0)], &[(1, 0.0)], 6);
        m.constant = 244.865;
        let f = predict_one(&m, &hist(&[1.0, 9.0, 3.0, 2.0, 8.0, 4.0]), day(7)).unwrap();
        assert_eq!(f.point, 244.865);
    }

    #[test]
    fn identity_lag_is_random_walk() {
        let m = model(ModelKind::SArima, &[(1, 1.0)], &[], 4);
        let h = hist(&[3.0, 5.0, 8.0, 13.0]);
        let f = predict_one(&m, &h, day(5)).unwrap();
        assert_eq!(f.point, baseline_rw(&h, day(5)).unwrap().point);
        assert_eq!(f.point, 13.0);
    }

    #[test]
    fn hand_ar_model() {
        let mut m = model(ModelKind::SarimaBaseline, &[(1, 0.5), (2, 0.25)], &[], 4);
        m.intercept = 1.0;
        let f = predict_one(&m, &hist(&[100.0, 50.0, 8.0, 4.0]), day(5)).unwrap();
        assert_eq!(f.pre_clamp, 5.0);
    }

    #[test]
    fn negative_forecasts_clamped() {
        let mut m = model(ModelKind::SarimaBaseline, &[(1, 1.0)], &[], 2);
        m.intercept = -50.0;
        let f = predict_one(&m, &hist(&[10.0, 20.0]), day(3)).unwrap();
        assert_eq!(f.pre_clamp, -30.0);
        assert_eq!(f.point, 0.0);
        let next = observe(&m, 5.0, &f).unwrap();
        assert_eq!(*next.innovations.last().unwrap(), 35.0);
    }

    #[test]
    fn differenced_model_integrates() {
        let mut m = model(ModelKind::SArima, &[(1, 0.5)], &[], 4);
        m.differencing = Differencing::first();
        // diffs: 2, 4, 6 -> next diff 3 -> level 12 + 3.
        let f = predict_one(&m, &hist(&[0.0, 2.0, 6.0, 12.0]), day(5)).unwrap();
        assert_eq!(f.pre_clamp, 15.0);
    }

    #[test]
    fn ma_terms_use_innovations() {
        let mut m = model(ModelKind::SArima, &[], &[(1, 0.5), (2, -1.0)], 3);
        m.innovations = vec![0.0, 4.0, 2.0];
        let f = predict_one(&m, &hist(&[1.0, 1.0, 1.0]), day(4)).unwrap();
        assert_eq!(f.pre_clamp, 0.5 * 2.0 - 4.0);
    }

    #[test]
    fn missing_lag_coverage() {
        let m = model(ModelKind::SArima, &[(1, 0.3), (7, 0.3)], &[], 5);
        let err = predict_one(&m, &hist(&[1.0; 5]), day(6)).unwrap_err();
        assert!(matches!(err, Error::InsufficientHistory { lag: 7 }));
        let m = model(ModelKind::SArima, &[(1, 0.3)], &[(1, 0.2)], 2);
        let err = predict_one(&m, &hist(&[1.0; 5]), day(6)).unwrap_err();
        assert!(matches!(err, Error::InsufficientHistory { lag: 1 }));
    }

    #[test]
    fn observe_bookkeeping() {
        let mut m = model(ModelKind::SArima, &[(1, 1.0)], &[], 3);
        let mut h = hist(&[10.0, 20.0, 30.0]);
        let truths = [30.0, 45.0, 40.0];
        for (k, truth) in truths.iter().enumerate() {
            let date = day(4 + k as u32);
            let f = predict_one(&m, &h, date).unwrap();
            let before = m.innovations.len();
            m = observe(&m, *truth, &f).unwrap();
            assert_eq!(m.innovations.len(), before + 1);
            assert_eq!(*m.innovations.last().unwrap(), truth - f.pre_clamp);
            h.push(date, *truth).unwrap();
        }
        assert_eq!(&m.innovations[3..], &[0.0, 15.0, -5.0]);
        assert_eq!(m.ar_coeffs, vec![1.0]);
    }

    #[test]
    fn observe_rejects_out_of_sequence() {
        let m = model(ModelKind::SArima, &[(1, 1.0)], &[], 3);
        let h = hist(&[10.0, 20.0, 30.0]);
        let f = predict_one(&m, &h, day(4)).unwrap();
        let m2 = observe(&m, 31.0, &f).unwrap();
        assert!(matches!(observe(&m2, 31.0, &f), Err(Error::Sequencing(_))));
        let mut stale = f;
        stale.date = day(2);
        assert!(matches!(
            observe(&m, 1.0, &stale),
            Err(Error::Sequencing(_))
        ));
        let mut other = f;
        other.model_kind = ModelKind::Rarima;
        assert!(matches!(
            observe(&m, 1.0, &other),
            Err(Error::Sequencing(_))
        ));
    }

    #[test]
    fn observe_exact_truth_is_zero_innovation() {
        let m = model(ModelKind::SArima, &[(1, 0.5)], &[], 2);
        let f = predict_one(&m, &hist(&[4.0, 8.0]), day(3)).unwrap();
        let m = observe(&m, f.pre_clamp, &f).unwrap();
        assert_eq!(*m.innovations.last().unwrap(), 0.0);
    }

    #[test]
    fn naive_baselines() {
        let h = hist(&[10.0, 20.0, 30.0, 37.0]);
        assert_eq!(baseline_rw(&h, day(5)).unwrap().point, 37.0);
        let (train, _) = h.split_at(3);
        assert_eq!(baseline_sm(&train, day(5)).unwrap().point, 20.0);
        assert_eq!(baseline_sm(&hist(&[7.5]), day(2)).unwrap().point, 7.5);
        let empty = hist(&[]);
        assert!(matches!(
            baseline_rw(&empty, day(1)),
            Err(Error::EmptyInput(_))
        ));
        assert!(matches!(
            baseline_sm(&empty, day(1)),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn rw_follows_last_observation() {
        let mut h = hist(&[10.0, 12.0]);
        h.push(day(3), 99.0).unwrap();
        assert_eq!(baseline_rw(&h, day(4)).unwrap().point, 99.0);
    }
}
