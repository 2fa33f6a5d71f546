use std::collections::BTreeMap;

use chrono::{Duration, NaiveDate, NaiveDateTime};
use flowcast::ingest::{
    clean_and_bucket, to_interval_records, CleaningPolicy, CounterMode, RawRecord, Segment,
};
use proptest::prelude::*;

fn start() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2016, 1, 4).unwrap().and_hms_opt(3, 0, 0).unwrap()
}

fn rec(device: &str, ts: NaiveDateTime, register: u64) -> RawRecord {
    RawRecord {
        station: "S".into(),
        device: device.into(),
        timestamp: ts,
        register,
    }
}

fn interval() -> CleaningPolicy {
    CleaningPolicy {
        counter_mode: CounterMode::Interval,
        ..Default::default()
    }
}

fn total(cleaned: &flowcast::ingest::CleanedStation) -> f64 {
    cleaned.series.values().flat_map(|s| s.counts()).sum()
}

/// Interval readings: device A at every segment end over `days` days, plus
/// extra readings from device B at arbitrary minutes inside the same span.
fn covered_interval() -> impl Strategy<Value = Vec<RawRecord>> {
    (1usize..5)
        .prop_flat_map(|days| {
            let slots = days * 6;
            (
                prop::collection::vec(0u64..2000, slots),
                prop::collection::btree_map(1i64..(slots as i64 * 240), 0u64..500, 0..30),
            )
        })
        .prop_map(|(a, extra)| {
            let mut out: Vec<RawRecord> = a
                .iter()
                .enumerate()
                .map(|(i, v)| rec("A", start() + Duration::hours(4 * (i as i64 + 1)), *v))
                .collect();
            out.extend(extra.iter().map(|(m, v)| rec("B", start() + Duration::minutes(*m), *v)));
            out
        })
}

/// Monotone cumulative registers read at every segment end, per device.
fn covered_cumulative() -> impl Strategy<Value = Vec<Vec<u64>>> {
    (1usize..5, 1usize..4).prop_flat_map(|(days, devices)| {
        prop::collection::vec(
            (0u64..1_000_000, prop::collection::vec(0u64..3000, days * 6)),
            devices,
        )
        .prop_map(|devs| {
            devs.into_iter()
                .map(|(base, steps)| {
                    let mut reg = base;
                    let mut out = vec![reg];
                    for s in steps {
                        reg += s;
                        out.push(reg);
                    }
                    out
                })
                .collect()
        })
    })
}

proptest! {
    #[test]
    fn interval_mode_conserves_counts(records in covered_interval()) {
        let cleaned = clean_and_bucket(&records, &interval(), "S").unwrap();
        prop_assert!(cleaned.stats.imputed_cells.values().all(|g| *g == 0));
        let raw: f64 = records.iter().map(|r| r.register as f64).sum();
        prop_assert_eq!(total(&cleaned), raw);
    }

    #[test]
    fn cumulative_mode_sums_to_register_span(devices in covered_cumulative()) {
        let mut records = Vec::new();
        let mut span = 0u64;
        for (k, regs) in devices.iter().enumerate() {
            let name = format!("D{k}");
            for (i, r) in regs.iter().enumerate() {
                records.push(rec(&name, start() + Duration::hours(4 * i as i64), *r));
            }
            span += regs.last().unwrap() - regs[0];
        }
        let cleaned = clean_and_bucket(&records, &CleaningPolicy::default(), "S").unwrap();
        prop_assert_eq!(cleaned.stats.first_reading, devices.len());
        prop_assert_eq!(total(&cleaned), span as f64);
    }

    #[test]
    fn flattening_is_idempotent(records in covered_interval()) {
        let once = clean_and_bucket(&records, &interval(), "S").unwrap();
        let twice = clean_and_bucket(&to_interval_records(&once, "X"), &interval(), "S").unwrap();
        prop_assert_eq!(&once.series, &twice.series);
        let thrice = clean_and_bucket(&to_interval_records(&twice, "Y"), &interval(), "S").unwrap();
        prop_assert_eq!(&twice.series, &thrice.series);
    }

    #[test]
    fn record_order_is_irrelevant(records in covered_interval(), seed in any::<u64>()) {
        let mut shuffled = records.clone();
        // Deterministic shuffle keyed on the seed.
        let mut keyed: Vec<(u64, RawRecord)> = shuffled
            .drain(..)
            .enumerate()
            .map(|(i, r)| ((i as u64).wrapping_mul(seed | 1).rotate_left(17), r))
            .collect();
        keyed.sort_by_key(|k| k.0);
        let shuffled: Vec<RawRecord> = keyed.into_iter().map(|k| k.1).collect();
        let a = clean_and_bucket(&records, &interval(), "S").unwrap();
        let b = clean_and_bucket(&shuffled, &interval(), "S").unwrap();
        prop_assert_eq!(a.series, b.series);
    }

    #[test]
    fn every_segment_shares_the_axis(records in covered_interval()) {
        let cleaned = clean_and_bucket(&records, &interval(), "S").unwrap();
        let axes: BTreeMap<Segment, usize> = cleaned.series.iter().map(|(k, s)| (*k, s.len())).collect();
        prop_assert_eq!(axes.len(), 6);
        let first = cleaned.get(Segment::H03To07).dates().to_vec();
        for s in cleaned.series.values() {
            prop_assert_eq!(s.dates(), first.as_slice());
            prop_assert!(s.counts().iter().all(|c| c.is_finite() && *c >= 0.0));
        }
    }
}
