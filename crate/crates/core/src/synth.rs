//! Seeded synthetic data: segment series with known structure and raw
//! turnstile registers for end-to-end fixtures.

use chrono::{Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::ingest::{is_weekend, RawRecord, Segment, SegmentSeries};

const BURN_IN: usize = 200;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(sigma: f64) -> Result<Normal<f64>> {
    Normal::new(0.0, sigma).map_err(|_| Error::InvalidInput(format!("bad noise scale {sigma}")))
}

/// Gaussian white noise around `level`.
pub fn white_noise(level: f64, sigma: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    let mut r = rng(seed);
    let noise = normal(sigma)?;
    Ok((0..n).map(|_| level + noise.sample(&mut r)).collect())
}

/// Gaussian random walk started at `start`.
pub fn random_walk(start: f64, sigma: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    let mut r = rng(seed);
    let noise = normal(sigma)?;
    let mut x = start;
    Ok((0..n)
        .map(|_| {
            x += noise.sample(&mut r);
            x
        })
        .collect())
}

/// `constant + ε_t` with `ε_t = Σ α_l ε_{t-l} + e_t`, `e_t ~ N(0, σ²)`.
/// Values are floored at zero so the result is a valid count series.
pub fn seasonal_ar(
    constant: f64,
    coeffs: &[(usize, f64)],
    sigma: f64,
    n: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut r = rng(seed);
    let noise = normal(sigma)?;
    let total = n + BURN_IN;
    let mut eps = vec![0.0; total];
    for t in 0..total {
        let ar: f64 = coeffs
            .iter()
            .filter(|(l, _)| *l <= t)
            .map(|(l, a)| a * eps[t - l])
            .sum();
        eps[t] = ar + noise.sample(&mut r);
    }
    Ok(eps[BURN_IN..]
        .iter()
        .map(|e| (constant + e).max(0.0))
        .collect())
}

/// Parameters of a two-regime series: calm days scatter around `constant`,
/// surges lift the level by `surge_level` for a run of days.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeSwitching {
    pub constant: f64,
    /// Noise scale on calm days.
    pub sigma: f64,
    pub surge_level: f64,
    /// Noise scale on surge days.
    pub surge_sigma: f64,
    /// Chance that a calm day starts a surge.
    pub surge_start: f64,
    /// Chance that a surge day is the last one.
    pub surge_end: f64,
}

impl RegimeSwitching {
    /// Returns the series together with the regime flag of each day.
    pub fn generate(&self, n: usize, seed: u64) -> Result<(Vec<f64>, Vec<bool>)> {
        let probs = [self.surge_start, self.surge_end];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidInput(
                "regime probabilities out of range".into(),
            ));
        }
        let mut r = rng(seed);
        let calm_noise = normal(self.sigma)?;
        let surge_noise = normal(self.surge_sigma)?;
        let mut surge = false;
        let mut values = Vec::with_capacity(n);
        let mut flags = Vec::with_capacity(n);
        for _ in 0..n {
            surge = if surge {
                !r.random_bool(self.surge_end)
            } else {
                r.random_bool(self.surge_start)
            };
            let v = if surge {
                self.constant + self.surge_level + surge_noise.sample(&mut r)
            } else {
                self.constant + calm_noise.sample(&mut r)
            };
            values.push(v.max(0.0));
            flags.push(surge);
        }
        Ok((values, flags))
    }
}

/// Noiseless `x_t = Σ α_l x_{t-l}` driven only by random initial values.
pub fn noiseless(coeffs: &[(usize, f64)], offset: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    let span = coeffs.iter().map(|c| c.0).max().unwrap_or(0);
    let mut x: Vec<f64> = (0..span).map(|_| r.random_range(-50.0..50.0)).collect();
    while x.len() < n {
        let t = x.len();
        let v = coeffs.iter().map(|(l, a)| a * x[t - l]).sum();
        x.push(v);
    }
    x.truncate(n);
    x.iter().map(|v| v + offset).collect()
}

/// Wraps counts as a weekday series starting on 2016-01-04.
pub fn weekday_series(counts: Vec<f64>, segment: Segment) -> Result<SegmentSeries> {
    let start = NaiveDate::from_ymd_opt(2016, 1, 4).expect("valid date");
    SegmentSeries::on_weekdays("SYN", segment, start, counts)
}

/// Cumulative turnstile registers read every four hours at the segment
/// boundaries. Each device carries its share of the segment profile, with
/// Gaussian day-to-day variation and lighter weekends.
pub fn turnstile_records(
    station: &str,
    devices: usize,
    start: NaiveDate,
    days: usize,
    profile: &[f64; 6],
    seed: u64,
) -> Result<Vec<RawRecord>> {
    if devices == 0 {
        return Err(Error::InvalidInput("at least one device".into()));
    }
    let mut r = rng(seed);
    let mut registers: Vec<u64> = (0..devices)
        .map(|_| r.random_range(1_000..1_000_000))
        .collect();
    let share = devices as f64;
    let mut out = Vec::new();
    let first = start.and_hms_opt(3, 0, 0).expect("valid time");
    for (k, reg) in registers.iter().enumerate() {
        out.push(RawRecord {
            station: station.to_owned(),
            device: format!("D{k:02}"),
            timestamp: first,
            register: *reg,
        });
    }
    for day in 0..days {
        let date = start + Duration::days(day as i64);
        let scale = if is_weekend(date) { 0.4 } else { 1.0 };
        for (i, seg) in Segment::ALL.iter().enumerate() {
            let ts = seg.end_instant(date);
            let noise = normal(0.08 * profile[i] / share)?;
            for (k, reg) in registers.iter_mut().enumerate() {
                let mean = scale * profile[i] / share;
                let add = (mean + noise.sample(&mut r)).max(0.0).round() as u64;
                *reg += add;
                out.push(RawRecord {
                    station: station.to_owned(),
                    device: format!("D{k:02}"),
                    timestamp: ts,
                    register: *reg,
                });
            }
        }
    }
    Ok(out)
}

/// Writes records in the plain CSV layout accepted by `parse_records`.
pub fn write_records<W: std::io::Write>(records: &[RawRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["station", "device", "datetime", "entries"])
        .map_err(|e| Error::Io(e.into()))?;
    for rec in records {
        w.write_record([
            rec.station.as_str(),
            rec.device.as_str(),
            &rec.timestamp.format("%Y-%m-%dT%H:%M:%S").to_string(),
            &rec.register.to_string(),
        ])
        .map_err(|e| Error::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}
