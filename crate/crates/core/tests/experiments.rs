//! Seeded studies behind the statistical claims of each module.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use flowcast::forecast::{
    fit_s_arima, select_order, Differencing, Forecast, ModelKind, SarimaOrder,
};
use flowcast::hybrid::{select, train_selector, Choice};
use flowcast::ingest::Segment;
use flowcast::pipeline::{run_segment, DifferencingChoice, PipelineConfig};
use flowcast::stats::{acf, fit_gaussian, ks_normality};
use flowcast::synth;

fn oracle_acf(x: &[f64], k: usize) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let num: f64 = (k..x.len()).map(|t| (x[t] - mean) * (x[t - k] - mean)).sum();
    let den: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    num / den
}

#[test]
fn s_arima_takes_planted_lags() {
    let planted = [(2, 0.3), (5, 0.3), (7, 0.3)];
    for seed in 0..5 {
        let x = synth::seasonal_ar(2000.0, &planted, 30.0, 300, 10 + seed).unwrap();
        let s = synth::weekday_series(x.clone(), Segment::H07To11).unwrap();
        let m = fit_s_arima(&s, &acf(&x, 10).unwrap(), Differencing::none(), 5).unwrap();

        let mut ranked: Vec<(usize, f64)> = (1..=10).map(|k| (k, oracle_acf(&x, k).abs())).collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let top: Vec<usize> = ranked[..3].iter().map(|r| r.0).collect();
        assert_eq!(m.ar_lags, top, "seed {seed}");
        assert_eq!(m.ar_lags.iter().copied().collect::<BTreeSet<_>>(), BTreeSet::from([2, 5, 7]));
    }
}

#[test]
fn rarima_beats_segment_mean_on_planted_fluctuations() {
    let config = PipelineConfig {
        differencing: DifferencingChoice::None,
        ..Default::default()
    };
    for seed in 0..3 {
        let x = synth::seasonal_ar(100.0, &[(5, 0.6)], 5.0, 200, 20 + seed).unwrap();
        let s = synth::weekday_series(x, Segment::H03To07).unwrap();
        let (_, r) = run_segment(&s, 50, &config).unwrap();
        assert!(r.per_model["RARIMA"].mae < r.per_model["SM"].mae, "seed {seed}: {:?}", r.per_model);
    }
}

/// Adjusted R² admits an extra regressor whenever its |t| exceeds one, so
/// over-fitted orders win a sizable share of seeds. The true order is still
/// the single most frequent pick.
#[test]
fn select_order_study() {
    let o = |p, q, sp| SarimaOrder::new(p, 0, q, sp, 0, 0, 5).unwrap();
    let truth = o(1, 0, 0);
    let candidates = [truth, o(2, 0, 0), o(1, 1, 0), o(2, 2, 0), o(1, 0, 1), o(3, 3, 1)];
    let mut picks: BTreeMap<SarimaOrder, usize> = BTreeMap::new();
    for seed in 0..50 {
        let x = synth::seasonal_ar(500.0, &[(1, 0.6)], 10.0, 200, 50_000 + seed).unwrap();
        let s = synth::weekday_series(x, Segment::H07To11).unwrap();
        *picks.entry(select_order(&s, &candidates).unwrap()).or_default() += 1;
    }
    let true_or_smaller: usize = picks.iter().filter(|(o, _)| o.param_count() <= 1).map(|p| p.1).sum();
    let modal = picks.iter().max_by_key(|p| *p.1).unwrap().0;
    assert_eq!(*modal, truth, "{picks:?}");
    assert!(true_or_smaller >= 20, "{true_or_smaller}/50 {picks:?}");
}

fn forecast(point: f64, kind: ModelKind) -> Forecast {
    Forecast {
        date: NaiveDate::from_ymd_opt(2016, 1, 4).unwrap(),
        step: 0,
        point: point.max(0.0),
        pre_clamp: point,
        model_kind: kind,
    }
}

/// `(truth, fc_a, fc_b)` triples from a generator closure.
fn draws(n: usize, seed: u64, f: impl Fn(f64, f64, f64, f64) -> (f64, f64, f64)) -> Vec<(f64, f64, f64)> {
    let u = synth::white_noise(0.0, 1.0, 4 * n, seed).unwrap();
    u.chunks(4).map(|c| f(c[0], c[1], c[2], c[3])).collect()
}

fn train(rows: &[(f64, f64, f64)], d: f64) -> flowcast::hybrid::HybridSelector {
    let t: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let a: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let b: Vec<f64> = rows.iter().map(|r| r.2).collect();
    train_selector(&t, &a, &b, d).unwrap()
}

#[test]
fn selector_null_experiment_is_a_coin_flip() {
    // Forecasts sit near d while the truth is far off in a random direction,
    // so which model wins carries no information about either attribute.
    let d = 1000.0;
    let gen = |w: f64, u: f64, v: f64, _| (d + 100.0 * w, d + u, d + v);
    let selector = train(&draws(400, 31, gen), d);
    assert!(!selector.is_fallback());
    let fresh = draws(2000, 32, gen);
    let mut right = 0;
    for (truth, a, b) in &fresh {
        let dec = select(&selector, &forecast(*a, ModelKind::SArima), &forecast(*b, ModelKind::Rarima)).unwrap();
        let better = if (truth - a).abs() < (truth - b).abs() { Choice::SArima } else { Choice::Rarima };
        right += (dec.chosen == better) as usize;
    }
    let acc = right as f64 / fresh.len() as f64;
    assert!((0.45..=0.55).contains(&acc), "accuracy {acc}");
}

#[test]
fn selector_exploits_a_planted_regime_switch() {
    // When A's attribute is positive A is accurate, otherwise B is.
    let d = 500.0;
    let gen = |r: f64, e1: f64, e2: f64, e3: f64| {
        let truth = d + 20.0 * r;
        if r > 0.0 {
            (truth, truth + e1, truth + 15.0 * e2 - 10.0 * r)
        } else {
            (truth, truth + 15.0 * e3 + 10.0, truth + e1)
        }
    };
    let selector = train(&draws(300, 41, gen), d);
    let test = draws(200, 42, gen);
    let (mut ea, mut eb, mut eh) = (0.0, 0.0, 0.0);
    for (truth, a, b) in &test {
        let dec = select(&selector, &forecast(*a, ModelKind::SArima), &forecast(*b, ModelKind::Rarima)).unwrap();
        let h = if dec.chosen == Choice::SArima { a } else { b };
        ea += (truth - a).abs();
        eb += (truth - b).abs();
        eh += (truth - h).abs();
    }
    assert!(eh <= 1.05 * ea.min(eb), "hybrid {eh:.1} vs A {ea:.1} B {eb:.1}");
}

#[test]
fn ks_passes_large_gaussian_samples() {
    let mut passed = 0;
    for seed in 0..50 {
        let x = synth::white_noise(0.0, 1.0, 500, 60 + seed).unwrap();
        passed += ks_normality(&x).unwrap().passed as usize;
    }
    assert!(passed >= 45, "{passed}/50");
}

#[test]
fn ks_rejects_large_two_point_samples() {
    for seed in 0..10 {
        let coin = synth::white_noise(0.0, 1.0, 500, 70 + seed).unwrap();
        let x: Vec<f64> = coin.iter().map(|c| c.signum()).collect();
        assert!(!ks_normality(&x).unwrap().passed, "seed {seed}");
    }
}

#[test]
fn gaussian_fit_recovers_parameters() {
    let x = synth::white_noise(3.0, 2.0, 5000, 80).unwrap();
    let g = fit_gaussian(&x).unwrap();
    assert!((g.mu - 3.0).abs() < 0.1 && (g.sigma - 2.0).abs() < 0.1, "{g:?}");
}
