//! Turnstile record parsing, cleaning and bucketing into six daily 4-hour
//! segments.
//!
//! A reading stamped at time `T` covers the period that ends at `T`, so it is
//! attributed to the segment whose half-open window `(start, end]` contains
//! `T`. A reading at exactly 07:00 therefore lands in `03-07`. The overnight
//! window `23-03` is dated by the day on which it starts.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One of the six fixed 4-hour windows of a day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Segment {
    H03To07,
    H07To11,
    H11To15,
    H15To19,
    H19To23,
    H23To03,
}

impl Segment {
    pub const ALL: [Segment; 6] = [
        Segment::H03To07,
        Segment::H07To11,
        Segment::H11To15,
        Segment::H15To19,
        Segment::H19To23,
        Segment::H23To03,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Segment::H03To07 => "03-07",
            Segment::H07To11 => "07-11",
            Segment::H11To15 => "11-15",
            Segment::H15To19 => "15-19",
            Segment::H19To23 => "19-23",
            Segment::H23To03 => "23-03",
        }
    }

    /// Hour of day at which the window opens.
    pub fn start_hour(self) -> u32 {
        match self {
            Segment::H03To07 => 3,
            Segment::H07To11 => 7,
            Segment::H11To15 => 11,
            Segment::H15To19 => 15,
            Segment::H19To23 => 19,
            Segment::H23To03 => 23,
        }
    }

    /// The instant at which the window closes for the segment dated `date`.
    pub fn end_instant(self, date: NaiveDate) -> NaiveDateTime {
        let start = date
            .and_hms_opt(self.start_hour(), 0, 0)
            .expect("valid hour");
        start + Duration::hours(4)
    }

    /// Segment and segment date for a reading stamped at `ts`.
    pub fn locate(ts: NaiveDateTime) -> (NaiveDate, Segment) {
        let just_before = ts - Duration::seconds(1);
        let hour = just_before.hour();
        let segment = match hour {
            3..=6 => Segment::H03To07,
            7..=10 => Segment::H07To11,
            11..=14 => Segment::H11To15,
            15..=18 => Segment::H15To19,
            19..=22 => Segment::H19To23,
            _ => Segment::H23To03,
        };
        let mut date = just_before.date();
        if hour < 3 {
            date = date.pred_opt().unwrap_or(date);
        }
        (date, segment)
    }
}

impl fmt::Display for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Segment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Segment::ALL
            .into_iter()
            .find(|seg| seg.label() == s.trim())
            .ok_or_else(|| Error::Schema(format!("unknown segment {s:?}")))
    }
}

impl Serialize for Segment {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for Segment {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A single register reading from one turnstile device.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRecord {
    pub station: String,
    pub device: String,
    pub timestamp: NaiveDateTime,
    pub register: u64,
}

/// A data row that could not be parsed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    /// 1-based line number in the input, header included.
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedRecords {
    pub records: Vec<RawRecord>,
    pub rejects: Vec<Reject>,
}

enum Layout {
    /// `station,device,datetime,entries`
    Plain {
        station: usize,
        device: usize,
        datetime: usize,
        entries: usize,
    },
    /// The public MTA turnstile export (`C/A,UNIT,SCP,...,DATE,TIME,DESC,ENTRIES,EXITS`).
    Mta {
        booth: usize,
        unit: usize,
        scp: usize,
        date: usize,
        time: usize,
        entries: usize,
    },
}

impl Layout {
    fn from_header(header: &csv::StringRecord) -> Result<Self> {
        let names: Vec<String> = header
            .iter()
            .map(|h| h.trim().to_ascii_lowercase())
            .collect();
        let find = |name: &str| names.iter().position(|n| n == name);
        if find("c/a").is_some() && find("scp").is_some() {
            let need = |name: &str| {
                find(name).ok_or_else(|| Error::Schema(format!("missing column {name:?}")))
            };
            return Ok(Layout::Mta {
                booth: need("c/a")?,
                unit: need("unit")?,
                scp: need("scp")?,
                date: need("date")?,
                time: need("time")?,
                entries: need("entries")?,
            });
        }
        let need = |name: &str| {
            find(name).ok_or_else(|| Error::Schema(format!("missing column {name:?}")))
        };
        Ok(Layout::Plain {
            station: need("station")?,
            device: need("device")?,
            datetime: need("datetime")?,
            entries: need("entries")?,
        })
    }

    fn record(&self, row: &csv::StringRecord) -> std::result::Result<RawRecord, String> {
        let field = |i: usize| {
            row.get(i)
                .map(str::trim)
                .ok_or_else(|| format!("missing field {}", i + 1))
        };
        match *self {
            Layout::Plain {
                station,
                device,
                datetime,
                entries,
            } => Ok(RawRecord {
                station: non_empty(field(station)?, "station")?,
                device: non_empty(field(device)?, "device")?,
                timestamp: parse_datetime(field(datetime)?)?,
                register: parse_register(field(entries)?)?,
            }),
            Layout::Mta {
                booth,
                unit,
                scp,
                date,
                time,
                entries,
            } => {
                let unit = non_empty(field(unit)?, "unit")?;
                let device = format!("{}|{}|{}", field(booth)?, unit, field(scp)?);
                let date = NaiveDate::parse_from_str(field(date)?, "%m/%d/%Y")
                    .map_err(|e| format!("bad date: {e}"))?;
                let time = chrono::NaiveTime::parse_from_str(field(time)?, "%H:%M:%S")
                    .map_err(|e| format!("bad time: {e}"))?;
                Ok(RawRecord {
                    station: unit,
                    device,
                    timestamp: date.and_time(time),
                    register: parse_register(field(entries)?)?,
                })
            }
        }
    }
}

fn non_empty(s: &str, what: &str) -> std::result::Result<String, String> {
    if s.is_empty() {
        Err(format!("empty {what}"))
    } else {
        Ok(s.to_owned())
    }
}

fn parse_register(s: &str) -> std::result::Result<u64, String> {
    s.parse::<u64>()
        .map_err(|_| format!("entries {s:?} is not a non-negative integer"))
}

/// Parses an ISO-8601 local timestamp, with `T` or space separator and
/// optional seconds.
pub fn parse_datetime(s: &str) -> std::result::Result<NaiveDateTime, String> {
    const FORMATS: [&str; 4] = [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ];
    FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .ok_or_else(|| format!("datetime {s:?} is not ISO-8601"))
}

/// Parses turnstile CSV. Malformed rows are collected as rejects rather
/// than failing the whole file.
pub fn parse_records<R: Read>(input: R) -> Result<ParsedRecords> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input);
    let header = match reader.headers() {
        Ok(h) => h.clone(),
        Err(e) => return Err(csv_error(e)),
    };
    if header.is_empty() {
        return Err(Error::Schema("missing header row".into()));
    }
    let layout = Layout::from_header(&header)?;

    let mut out = ParsedRecords::default();
    let mut row = csv::StringRecord::new();
    loop {
        let line = reader.position().line();
        match reader.read_record(&mut row) {
            Ok(false) => break,
            Ok(true) => {
                let line = row.position().map_or(line, |p| p.line());
                if row.iter().all(|f| f.trim().is_empty()) {
                    continue;
                }
                match layout.record(&row) {
                    Ok(rec) => out.records.push(rec),
                    Err(reason) => out.rejects.push(Reject { line, reason }),
                }
            }
            Err(e) if e.is_io_error() => return Err(csv_error(e)),
            Err(e) => {
                let line = e.position().map_or(line, |p| p.line());
                out.rejects.push(Reject {
                    line,
                    reason: e.to_string(),
                });
                // A UTF-8 error leaves the reader positioned after the bad row.
                if !matches!(e.kind(), csv::ErrorKind::Utf8 { .. }) {
                    break;
                }
            }
        }
    }
    Ok(out)
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Schema(format!("{other:?}")),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CounterMode {
    /// Registers are running totals; first differences give entries.
    #[default]
    Cumulative,
    /// Registers already hold the entries of the period ending at the timestamp.
    Interval,
}

impl FromStr for CounterMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cumulative" => Ok(CounterMode::Cumulative),
            "interval" => Ok(CounterMode::Interval),
            other => Err(Error::Schema(format!("unknown counter mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissingValueStrategy {
    #[default]
    SegmentMean,
}

/// Dates whose values must not feed the imputation mean.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Holdout {
    #[default]
    None,
    /// The last `n` dates of the axis.
    LastDays(usize),
    /// Every date on or after this one.
    FromDate(NaiveDate),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CleaningPolicy {
    pub excluded_dates: BTreeSet<NaiveDate>,
    pub faulty_devices: BTreeSet<String>,
    pub missing_value_strategy: MissingValueStrategy,
    pub counter_mode: CounterMode,
    pub holdout: Holdout,
}

pub fn is_weekend(date: NaiveDate) -> bool {
    matches!(date.weekday(), Weekday::Sat | Weekday::Sun)
}

/// All Saturdays and Sundays in `[start, end]`.
pub fn weekends_between(start: NaiveDate, end: NaiveDate) -> BTreeSet<NaiveDate> {
    start
        .iter_days()
        .take_while(|d| *d <= end)
        .filter(|d| is_weekend(*d))
        .collect()
}

/// Parses an exclusion list: one `YYYY-MM-DD` per line, `#` comments allowed.
pub fn parse_date_list(text: &str) -> Result<BTreeSet<NaiveDate>> {
    let mut out = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let date = NaiveDate::parse_from_str(line, "%Y-%m-%d")
            .map_err(|e| Error::Schema(format!("line {}: {line:?}: {e}", i + 1)))?;
        out.insert(date);
    }
    Ok(out)
}

/// Daily passenger counts of one station for one segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSeries {
    station: String,
    segment: Segment,
    dates: Vec<NaiveDate>,
    counts: Vec<f64>,
}

impl SegmentSeries {
    pub fn new(
        station: impl Into<String>,
        segment: Segment,
        dates: Vec<NaiveDate>,
        counts: Vec<f64>,
    ) -> Result<Self> {
        if dates.len() != counts.len() {
            return Err(Error::InvalidInput(format!(
                "{} dates but {} counts",
                dates.len(),
                counts.len()
            )));
        }
        if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(format!(
                "dates not strictly increasing at {}",
                w[1]
            )));
        }
        if let Some(c) = counts.iter().find(|c| !c.is_finite() || **c < 0.0) {
            return Err(Error::InvalidInput(format!("invalid count {c}")));
        }
        Ok(SegmentSeries {
            station: station.into(),
            segment,
            dates,
            counts,
        })
    }

    /// Builds a series on consecutive weekdays starting at `start`.
    pub fn on_weekdays(
        station: impl Into<String>,
        segment: Segment,
        start: NaiveDate,
        counts: Vec<f64>,
    ) -> Result<Self> {
        let dates = start
            .iter_days()
            .filter(|d| !is_weekend(*d))
            .take(counts.len())
            .collect();
        Self::new(station, segment, dates, counts)
    }

    pub fn station(&self) -> &str {
        &self.station
    }

    pub fn segment(&self) -> Segment {
        self.segment
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn last(&self) -> Option<(NaiveDate, f64)> {
        Some((*self.dates.last()?, *self.counts.last()?))
    }

    /// Splits into the first `n` observations and the rest.
    pub fn split_at(&self, n: usize) -> (SegmentSeries, SegmentSeries) {
        let n = n.min(self.len());
        let head = SegmentSeries {
            station: self.station.clone(),
            segment: self.segment,
            dates: self.dates[..n].to_vec(),
            counts: self.counts[..n].to_vec(),
        };
        let tail = SegmentSeries {
            station: self.station.clone(),
            segment: self.segment,
            dates: self.dates[n..].to_vec(),
            counts: self.counts[n..].to_vec(),
        };
        (head, tail)
    }

    /// Appends one observation; the date must follow the last one.
    pub fn push(&mut self, date: NaiveDate, count: f64) -> Result<()> {
        if let Some(last) = self.dates.last() {
            if date <= *last {
                return Err(Error::Sequencing(format!("{date} does not follow {last}")));
            }
        }
        if !count.is_finite() || count < 0.0 {
            return Err(Error::InvalidInput(format!("invalid count {count}")));
        }
        self.dates.push(date);
        self.counts.push(count);
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["date", "count"]).map_err(csv_error)?;
        for (d, c) in self.dates.iter().zip(&self.counts) {
            w.write_record([d.to_string(), c.to_string()])
                .map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a `date,count` file written by [`SegmentSeries::write_csv`].
    pub fn read_csv<R: Read>(input: R, station: &str, segment: Segment) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(input);
        let header = reader.headers().map_err(csv_error)?.clone();
        let names: Vec<String> = header
            .iter()
            .map(|h| h.trim().to_ascii_lowercase())
            .collect();
        let col = |name: &str| {
            names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::Schema(format!("missing column {name:?}")))
        };
        let (date_col, count_col) = (col("date")?, col("count")?);
        let mut dates = Vec::new();
        let mut counts = Vec::new();
        for row in reader.records() {
            let row = row.map_err(csv_error)?;
            let line = row.position().map_or(0, |p| p.line());
            let date = row.get(date_col).unwrap_or("").trim();
            let count = row.get(count_col).unwrap_or("").trim();
            dates.push(
                NaiveDate::parse_from_str(date, "%Y-%m-%d")
                    .map_err(|e| Error::Schema(format!("line {line}: date {date:?}: {e}")))?,
            );
            counts.push(
                count
                    .parse::<f64>()
                    .map_err(|e| Error::Schema(format!("line {line}: count {count:?}: {e}")))?,
            );
        }
        SegmentSeries::new(station, segment, dates, counts)
    }
}

/// Rows removed or altered by each cleaning rule.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningStats {
    pub rows_in: usize,
    pub other_station: usize,
    pub faulty_device: usize,
    pub duplicate: usize,
    pub excluded_date: usize,
    /// Cumulative mode: first reading of each device has no predecessor.
    pub first_reading: usize,
    /// Cumulative mode: negative first differences (counter reset).
    pub counter_reset: usize,
    /// Cumulative mode: differences spanning more than a day.
    pub long_gap: usize,
    pub imputed_cells: BTreeMap<Segment, usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CleanedStation {
    pub series: BTreeMap<Segment, SegmentSeries>,
    pub stats: CleaningStats,
}

impl CleanedStation {
    pub fn get(&self, segment: Segment) -> &SegmentSeries {
        &self.series[&segment]
    }
}

/// One device's entries attributed to a (date, segment) cell. `value` is
/// `None` when the reading carries no usable count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contribution {
    pub date: NaiveDate,
    pub segment: Segment,
    pub value: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Missing {
    FirstReading,
    CounterReset,
    LongGap,
}

/// Turns deduplicated, time-ordered readings of a single device into cell
/// contributions.
fn device_contributions(
    readings: &[(NaiveDateTime, u64)],
    mode: CounterMode,
) -> Vec<(Contribution, Option<Missing>)> {
    let mut out = Vec::with_capacity(readings.len());
    let mut prev: Option<(NaiveDateTime, u64)> = None;
    for &(ts, reg) in readings {
        let (date, segment) = Segment::locate(ts);
        let (value, missing) = match mode {
            CounterMode::Interval => (Some(reg as f64), None),
            CounterMode::Cumulative => match prev {
                None => (None, Some(Missing::FirstReading)),
                Some((pts, _)) if ts - pts > Duration::hours(24) => (None, Some(Missing::LongGap)),
                Some((_, preg)) if reg < preg => (None, Some(Missing::CounterReset)),
                Some((_, preg)) => (Some((reg - preg) as f64), None),
            },
        };
        out.push((
            Contribution {
                date,
                segment,
                value,
            },
            missing,
        ));
        prev = Some((ts, reg));
    }
    out
}

/// Contributions of one device's readings, in timestamp order. Exposed for
/// inspection of the differencing rule.
pub fn contributions(readings: &[(NaiveDateTime, u64)], mode: CounterMode) -> Vec<Contribution> {
    let mut sorted = readings.to_vec();
    sorted.sort_by_key(|r| r.0);
    sorted.dedup_by_key(|r| r.0);
    device_contributions(&sorted, mode)
        .into_iter()
        .map(|(c, _)| c)
        .collect()
}

/// Cleans one station's records and buckets them into six segment series on
/// a shared date axis.
pub fn clean_and_bucket(
    records: &[RawRecord],
    policy: &CleaningPolicy,
    station: &str,
) -> Result<CleanedStation> {
    let mut stats = CleaningStats {
        rows_in: records.len(),
        ..CleaningStats::default()
    };

    // Filter to station and healthy devices, dedupe on (device, timestamp)
    // keeping the first occurrence in file order.
    let mut seen: HashSet<(&str, NaiveDateTime)> = HashSet::new();
    let mut by_device: BTreeMap<&str, Vec<(NaiveDateTime, u64)>> = BTreeMap::new();
    for rec in records {
        if rec.station != station {
            stats.other_station += 1;
            continue;
        }
        if policy.faulty_devices.contains(&rec.device) {
            stats.faulty_device += 1;
            continue;
        }
        if !seen.insert((rec.device.as_str(), rec.timestamp)) {
            stats.duplicate += 1;
            continue;
        }
        by_device
            .entry(rec.device.as_str())
            .or_default()
            .push((rec.timestamp, rec.register));
    }
    if by_device.is_empty() {
        return Err(Error::EmptyInput("no records for station"));
    }

    let mut axis: BTreeSet<NaiveDate> = BTreeSet::new();
    let mut cells: BTreeMap<(Segment, NaiveDate), f64> = BTreeMap::new();
    for readings in by_device.values_mut() {
        readings.sort_by_key(|r| r.0);
        for (c, missing) in device_contributions(readings, policy.counter_mode) {
            if policy.excluded_dates.contains(&c.date) {
                stats.excluded_date += 1;
                continue;
            }
            // A device's first reading only anchors its counter; it does not
            // put the day before on the axis.
            if missing != Some(Missing::FirstReading) {
                axis.insert(c.date);
            }
            match (c.value, missing) {
                (Some(v), _) => *cells.entry((c.segment, c.date)).or_insert(0.0) += v,
                (None, Some(Missing::FirstReading)) => stats.first_reading += 1,
                (None, Some(Missing::CounterReset)) => stats.counter_reset += 1,
                (None, Some(Missing::LongGap)) => stats.long_gap += 1,
                (None, None) => {}
            }
        }
    }
    if axis.is_empty() {
        return Err(Error::EmptyInput("no records left after date exclusion"));
    }
    let dates: Vec<NaiveDate> = axis.into_iter().collect();
    let held_out = |i: usize, d: NaiveDate| match policy.holdout {
        Holdout::None => false,
        Holdout::LastDays(n) => i + n >= dates.len(),
        Holdout::FromDate(from) => d >= from,
    };

    let mut series = BTreeMap::new();
    for segment in Segment::ALL {
        let observed: Vec<Option<f64>> = dates
            .iter()
            .map(|d| cells.get(&(segment, *d)).copied())
            .collect();
        let reference: Vec<f64> = observed
            .iter()
            .enumerate()
            .filter(|(i, _)| !held_out(*i, dates[*i]))
            .filter_map(|(_, v)| *v)
            .collect();
        let gaps = observed.iter().filter(|v| v.is_none()).count();
        let fill = if gaps == 0 {
            0.0
        } else if reference.is_empty() {
            return Err(Error::UnrecoverableGap(segment));
        } else {
            match policy.missing_value_strategy {
                MissingValueStrategy::SegmentMean => {
                    reference.iter().sum::<f64>() / reference.len() as f64
                }
            }
        };
        stats.imputed_cells.insert(segment, gaps);
        let counts = observed.into_iter().map(|v| v.unwrap_or(fill)).collect();
        series.insert(
            segment,
            SegmentSeries::new(station, segment, dates.clone(), counts)?,
        );
    }
    Ok(CleanedStation { series, stats })
}

/// Flattens cleaned series back into interval-mode records, one reading per
/// cell stamped at the window's closing instant.
pub fn to_interval_records(cleaned: &CleanedStation, device: &str) -> Vec<RawRecord> {
    let mut out = Vec::new();
    for s in cleaned.series.values() {
        for (d, c) in s.dates().iter().zip(s.counts()) {
            out.push(RawRecord {
                station: s.station().to_owned(),
                device: device.to_owned(),
                timestamp: s.segment().end_instant(*d),
                register: c.round() as u64,
            });
        }
    }
    out.sort_by_key(|r| r.timestamp);
    out
}
