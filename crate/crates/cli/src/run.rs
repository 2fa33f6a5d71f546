use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use flowcast::eval::{compare_report, write_decisions_csv, ComparisonTable, EvaluationReport};
use flowcast::forecast::{Differencing, LagModel, SarimaOrder};
use flowcast::hybrid::HybridSelector;
use flowcast::ingest::{
    clean_and_bucket, parse_date_list, parse_records, weekends_between, CleaningPolicy,
    CleaningStats, Holdout, RawRecord, Reject, Segment, SegmentSeries,
};
use flowcast::pipeline::{analyze_segment, evaluate_segment, fit_segment, FittedSegment, SegmentAnalysis};
use flowcast::stats::TestReport;
use flowcast::synth;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::CliError;

pub const ARTIFACT_SCHEMA_VERSION: u32 = 1;

pub const DEMO_STATION: &str = "DEMO";
pub const DEMO_SEED: u64 = 2016;
const DEMO_FIXTURE: &str = include_str!("../fixtures/demo_station.csv");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestManifest {
    pub schema_version: u32,
    pub kind: String,
    pub config: RunConfig,
    pub station: String,
    pub n_days: usize,
    pub first_date: NaiveDate,
    pub last_date: NaiveDate,
    pub rejects: Vec<Reject>,
    pub stats: CleaningStats,
    pub segments: BTreeMap<Segment, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisFile {
    pub schema_version: u32,
    pub kind: String,
    pub config: RunConfig,
    pub station: String,
    pub segments: BTreeMap<Segment, SegmentAnalysis>,
    /// Segments whose fluctuations fail the K-S normality check.
    pub ks_failures: Vec<Segment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitEntry {
    pub train_days: usize,
    pub test_days: usize,
    pub adf: TestReport,
    pub differencing: Differencing,
    pub order: SarimaOrder,
    pub sarima: String,
    pub s_arima: String,
    pub rarima: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selector_fallback: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitManifest {
    pub schema_version: u32,
    pub kind: String,
    pub config: RunConfig,
    pub station: String,
    pub segments: BTreeMap<Segment, FitEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSummary {
    pub schema_version: u32,
    pub kind: String,
    pub config: RunConfig,
    pub station: String,
    pub comparison: ComparisonTable,
}

const MODEL_FILES: [&str; 4] = ["sarima.json", "s_arima.json", "rarima.json", "selector.json"];

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(flowcast::Error::from)?;
    s.push('\n');
    Ok(s)
}

/// Adds the config snapshot to a JSON object produced by the library.
fn with_config(json: &str, config: &RunConfig) -> Result<String, CliError> {
    let mut v: serde_json::Value = serde_json::from_str(json).map_err(flowcast::Error::from)?;
    if let serde_json::Value::Object(map) = &mut v {
        map.insert(
            "config".into(),
            serde_json::to_value(config).map_err(flowcast::Error::from)?,
        );
    }
    to_json(&v)
}

fn read_manifest<T: for<'de> Deserialize<'de>>(path: &Path, kind: &str) -> Result<T, CliError> {
    let text = read(path)?;
    let v: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::in_file(path, e.into()))?;
    let version = v.get("schema_version").and_then(|x| x.as_u64());
    let found = v.get("kind").and_then(|x| x.as_str());
    if version != Some(ARTIFACT_SCHEMA_VERSION as u64) || found != Some(kind) {
        return Err(CliError::in_file(
            path,
            flowcast::Error::Schema(format!(
                "expected a {kind} manifest with schema version {ARTIFACT_SCHEMA_VERSION}"
            )),
        ));
    }
    serde_json::from_value(v).map_err(|e| CliError::in_file(path, e.into()))
}

fn input_path(config: &RunConfig) -> Result<&Path, CliError> {
    config
        .input
        .as_deref()
        .ok_or_else(|| CliError::Usage("--input is required".into()))
}

fn pick_station(records: &[RawRecord], wanted: Option<&str>) -> Result<String, CliError> {
    if let Some(s) = wanted {
        return Ok(s.to_owned());
    }
    let mut stations: Vec<&str> = records.iter().map(|r| r.station.as_str()).collect();
    stations.sort_unstable();
    stations.dedup();
    match stations.as_slice() {
        [one] => Ok((*one).to_owned()),
        [] => Err(flowcast::Error::EmptyInput("no records").into()),
        many => Err(CliError::Usage(format!(
            "input holds {} stations; choose one with --station",
            many.len()
        ))),
    }
}

fn policy(config: &RunConfig, records: &[RawRecord]) -> Result<CleaningPolicy, CliError> {
    let mut excluded = match &config.excluded_dates {
        Some(path) => parse_date_list(&read(path)?).map_err(|e| CliError::in_file(path, e))?,
        None => Default::default(),
    };
    if config.exclude_weekends {
        let first = records.iter().map(|r| r.timestamp.date()).min();
        let last = records.iter().map(|r| r.timestamp.date()).max();
        if let (Some(a), Some(b)) = (first, last) {
            // One day of margin: the overnight segment is dated by its start.
            excluded.extend(weekends_between(a.pred_opt().unwrap_or(a), b));
        }
    }
    Ok(CleaningPolicy {
        excluded_dates: excluded,
        faulty_devices: config.faulty_devices.iter().cloned().collect(),
        counter_mode: config.counter_mode,
        holdout: match config.test_from {
            Some(d) => Holdout::FromDate(d),
            None => Holdout::LastDays(config.test_days),
        },
        ..Default::default()
    })
}

fn ingest_from<R: Read>(input: R, config: &RunConfig, dir: &Path) -> Result<IngestManifest, CliError> {
    let parsed = parse_records(input)?;
    let station = pick_station(&parsed.records, config.station.as_deref())?;
    let policy = policy(config, &parsed.records)?;
    let cleaned = clean_and_bucket(&parsed.records, &policy, &station)?;

    let mut segments = BTreeMap::new();
    for (segment, series) in &cleaned.series {
        let file = format!("segments/{}.csv", segment.label());
        let mut buf = Vec::new();
        series.write_csv(&mut buf)?;
        write(&dir.join(&file), buf)?;
        segments.insert(*segment, file);
    }
    let dates = cleaned.get(Segment::H03To07).dates();
    let manifest = IngestManifest {
        schema_version: ARTIFACT_SCHEMA_VERSION,
        kind: "ingest".into(),
        config: config.clone(),
        station,
        n_days: dates.len(),
        first_date: dates[0],
        last_date: dates[dates.len() - 1],
        rejects: parsed.rejects,
        stats: cleaned.stats,
        segments,
    };
    write(&dir.join("manifest.json"), to_json(&manifest)?)?;
    Ok(manifest)
}

/// Parses and cleans the raw input into `<out>/ingest`.
pub fn cmd_ingest(config: &RunConfig) -> Result<PathBuf, CliError> {
    let path = input_path(config)?;
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let dir = config.out_dir().join("ingest");
    let m = ingest_from(file, config, &dir).map_err(|e| match e {
        CliError::Core(flowcast::Error::Io(source)) => CliError::io(path, source),
        other => other,
    })?;
    println!(
        "ingest: station {} with {} days ({} to {}), {} rejected rows -> {}",
        m.station,
        m.n_days,
        m.first_date,
        m.last_date,
        m.rejects.len(),
        dir.display()
    );
    Ok(dir)
}

fn load_segments(ingest_dir: &Path) -> Result<(IngestManifest, BTreeMap<Segment, SegmentSeries>), CliError> {
    let manifest: IngestManifest = read_manifest(&ingest_dir.join("manifest.json"), "ingest")?;
    let mut out = BTreeMap::new();
    for (segment, file) in &manifest.segments {
        let path = ingest_dir.join(file);
        let text = read(&path)?;
        let series = SegmentSeries::read_csv(text.as_bytes(), &manifest.station, *segment)
            .map_err(|e| CliError::in_file(&path, e))?;
        out.insert(*segment, series);
    }
    Ok((manifest, out))
}

/// Decomposition, ACF, K-S and ADF per segment on the training window.
pub fn cmd_analyze(config: &RunConfig) -> Result<PathBuf, CliError> {
    run_analyze(input_path(config)?, config)
}

fn run_analyze(ingest_dir: &Path, config: &RunConfig) -> Result<PathBuf, CliError> {
    let (manifest, series) = load_segments(ingest_dir)?;
    let pipeline = config.pipeline();
    let mut segments = BTreeMap::new();
    let mut ks_failures = Vec::new();
    for (segment, s) in &series {
        let (train, _) = s.split_at(config.train_len(s.dates())?);
        let a = analyze_segment(&train, &pipeline)?;
        if !a.ks.passed {
            ks_failures.push(*segment);
        }
        println!(
            "analyze {segment}: d = {:.3}, top lags {:?}, K-S p = {:.3} ({}), ADF {:.3} vs {:.3} ({})",
            a.constant,
            a.top_lags,
            a.ks.critical_or_pvalue,
            if a.ks.passed { "pass" } else { "FAIL" },
            a.adf.statistic,
            a.adf.critical_or_pvalue,
            if a.adf.passed { "pass" } else { "FAIL" },
        );
        segments.insert(*segment, a);
    }
    let file = AnalysisFile {
        schema_version: ARTIFACT_SCHEMA_VERSION,
        kind: "analysis".into(),
        config: config.clone(),
        station: manifest.station,
        segments,
        ks_failures,
    };
    let dir = config.out_dir().join("analyze");
    write(&dir.join("analysis.json"), to_json(&file)?)?;
    Ok(dir)
}

/// Fits every model on each segment's training window.
pub fn cmd_fit(config: &RunConfig) -> Result<PathBuf, CliError> {
    run_fit(input_path(config)?, config)
}

fn run_fit(ingest_dir: &Path, config: &RunConfig) -> Result<PathBuf, CliError> {
    let (manifest, series) = load_segments(ingest_dir)?;
    let dir = config.out_dir().join("fit");
    let pipeline = config.pipeline();
    let mut segments = BTreeMap::new();
    for (segment, s) in &series {
        let train_days = config.train_len(s.dates())?;
        let (train, _) = s.split_at(train_days);
        let fitted = fit_segment(&train, &pipeline)?;
        let label = segment.label();

        let mut buf = Vec::new();
        s.write_csv(&mut buf)?;
        write(&dir.join(format!("data/{label}.csv")), buf)?;
        let models = dir.join("models").join(label);
        let jsons = [
            fitted.baseline.to_json()?,
            fitted.s_arima.to_json()?,
            fitted.rarima.to_json()?,
            fitted.selector.to_json()?,
        ];
        for (name, json) in MODEL_FILES.iter().zip(&jsons) {
            write(&models.join(name), with_config(json, config)?)?;
        }

        println!(
            "fit {segment}: {} {} {}{}",
            fitted.baseline.label(),
            fitted.s_arima.label(),
            fitted.rarima.label(),
            match &fitted.selector.fallback {
                Some(why) => format!(" (hybrid falls back to RARIMA: {why})"),
                None => String::new(),
            }
        );
        segments.insert(
            *segment,
            FitEntry {
                train_days,
                test_days: s.len() - train_days,
                adf: fitted.adf,
                differencing: fitted.differencing,
                order: fitted.order,
                sarima: fitted.baseline.label(),
                s_arima: fitted.s_arima.label(),
                rarima: fitted.rarima.label(),
                selector_fallback: fitted.selector.fallback.clone(),
            },
        );
    }
    let fit = FitManifest {
        schema_version: ARTIFACT_SCHEMA_VERSION,
        kind: "fit".into(),
        config: config.clone(),
        station: manifest.station,
        segments,
    };
    write(&dir.join("manifest.json"), to_json(&fit)?)?;
    Ok(dir)
}

/// Walks the held-out window of every segment with the fitted models.
pub fn cmd_evaluate(config: &RunConfig) -> Result<PathBuf, CliError> {
    run_evaluate(input_path(config)?, config)
}

fn load_fitted(fit_dir: &Path, segment: Segment, entry: &FitEntry) -> Result<FittedSegment, CliError> {
    let models = fit_dir.join("models").join(segment.label());
    let lag = |name: &str| -> Result<LagModel, CliError> {
        let path = models.join(name);
        LagModel::from_json(&read(&path)?).map_err(|e| CliError::in_file(&path, e))
    };
    let selector_path = models.join(MODEL_FILES[3]);
    let selector = HybridSelector::from_json(&read(&selector_path)?)
        .map_err(|e| CliError::in_file(&selector_path, e))?;
    Ok(FittedSegment {
        adf: entry.adf,
        differencing: entry.differencing,
        order: entry.order,
        baseline: lag(MODEL_FILES[0])?,
        s_arima: lag(MODEL_FILES[1])?,
        rarima: lag(MODEL_FILES[2])?,
        selector,
    })
}

fn run_evaluate(fit_dir: &Path, config: &RunConfig) -> Result<PathBuf, CliError> {
    let manifest: FitManifest = read_manifest(&fit_dir.join("manifest.json"), "fit")?;
    let dir = config.out_dir().join("evaluate");
    let mut reports: Vec<EvaluationReport> = Vec::new();
    for (segment, entry) in &manifest.segments {
        let path = fit_dir.join(format!("data/{}.csv", segment.label()));
        let series = SegmentSeries::read_csv(read(&path)?.as_bytes(), &manifest.station, *segment)
            .map_err(|e| CliError::in_file(&path, e))?;
        let (train, test) = series.split_at(entry.train_days);
        let fitted = load_fitted(fit_dir, *segment, entry)?;
        let report = evaluate_segment(&fitted, &train, &test)?;

        write(
            &dir.join(format!("reports/{}.json", segment.label())),
            with_config(&report.to_json()?, config)?,
        )?;
        let mut buf = Vec::new();
        write_decisions_csv(&report.decisions, &mut buf)?;
        write(&dir.join(format!("decisions/{}.csv", segment.label())), buf)?;
        reports.push(report);
    }
    let comparison = compare_report(&reports)?;
    let mut buf = Vec::new();
    comparison.write_csv(&mut buf)?;
    write(&dir.join("comparison.csv"), buf)?;
    let summary = EvaluationSummary {
        schema_version: ARTIFACT_SCHEMA_VERSION,
        kind: "evaluate".into(),
        config: config.clone(),
        station: manifest.station,
        comparison,
    };
    write(&dir.join("summary.json"), to_json(&summary)?)?;

    println!("{:<6} {:<8} {:>10} {:>8} {:>9}", "segment", "model", "MAE", "MAPE%", "vs SARIMA");
    for r in &summary.comparison.rows {
        println!(
            "{:<7} {:<8} {:>10.2} {:>8} {:>9}",
            r.segment.label(),
            r.model,
            r.mae,
            r.mape.map(|m| format!("{m:.2}")).unwrap_or_else(|| "-".into()),
            r.improvement.map(|i| format!("{i:+.1}%")).unwrap_or_else(|| "-".into()),
        );
    }
    Ok(dir)
}

/// Plain-layout CSV of the synthetic demo station for `seed`.
pub fn demo_csv(seed: u64) -> Result<String, CliError> {
    let start = NaiveDate::from_ymd_opt(2016, 1, 4).expect("valid date");
    let profile = [245.0, 3335.0, 2412.0, 7719.0, 3428.0, 528.0];
    let records = synth::turnstile_records(DEMO_STATION, 4, start, 70, &profile, seed)?;
    let mut buf = Vec::new();
    synth::write_records(&records, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv writer emits UTF-8"))
}

/// Runs ingest, analyze, fit and evaluate on the bundled fixture, or on a
/// freshly generated station when a seed is given.
pub fn cmd_demo(config: &RunConfig) -> Result<PathBuf, CliError> {
    let mut config = config.clone();
    config.station.get_or_insert_with(|| DEMO_STATION.to_owned());
    config.exclude_weekends = true;
    let text = match config.seed {
        None | Some(DEMO_SEED) => DEMO_FIXTURE.to_owned(),
        Some(seed) => demo_csv(seed)?,
    };
    let out = config.out_dir();
    let ingest_dir = out.join("ingest");
    let m = ingest_from(text.as_bytes(), &config, &ingest_dir)?;
    println!("demo: station {} with {} weekdays", m.station, m.n_days);
    run_analyze(&ingest_dir, &config)?;
    let fit_dir = run_fit(&ingest_dir, &config)?;
    run_evaluate(&fit_dir, &config)?;
    Ok(out)
}
