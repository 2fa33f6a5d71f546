use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use flowcast::forecast::SarimaOrder;
use flowcast::ingest::CounterMode;
use flowcast::pipeline::{DifferencingChoice, PipelineConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Resolved settings of one run. Loaded from an optional JSON file, then
/// overridden by command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub station: Option<String>,
    pub counter_mode: CounterMode,
    /// File with one excluded date per line.
    pub excluded_dates: Option<PathBuf>,
    pub exclude_weekends: bool,
    pub faulty_devices: Vec<String>,
    pub season_length: usize,
    /// Held-out days at the end of each series.
    pub test_days: usize,
    /// When set, the test window starts at this date instead.
    pub test_from: Option<NaiveDate>,
    pub max_acf_lag: Option<usize>,
    pub grid: Option<Vec<SarimaOrder>>,
    pub differencing: DifferencingChoice,
    /// Seed for the synthetic demo station.
    pub seed: Option<u64>,
    /// Where the run writes; left out of snapshots so that identical runs
    /// into different directories produce identical files.
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: None,
            station: None,
            counter_mode: CounterMode::Cumulative,
            excluded_dates: None,
            exclude_weekends: false,
            faulty_devices: Vec::new(),
            season_length: 5,
            test_days: 5,
            test_from: None,
            max_acf_lag: None,
            grid: None,
            differencing: DifferencingChoice::Auto,
            seed: None,
            out: None,
        }
    }
}

/// Values given on the command line; `None` leaves the config untouched.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub input: Option<PathBuf>,
    pub station: Option<String>,
    pub counter_mode: Option<CounterMode>,
    pub excluded_dates: Option<PathBuf>,
    pub exclude_weekends: bool,
    pub season_length: Option<usize>,
    pub test_days: Option<usize>,
    pub test_from: Option<NaiveDate>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let config: RunConfig =
            serde_json::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn apply(&mut self, o: Overrides) {
        macro_rules! take {
            ($($field:ident),*) => {$(
                if let Some(v) = o.$field {
                    self.$field = v.into();
                }
            )*};
        }
        take!(input, station, excluded_dates, test_from, seed, out);
        if let Some(v) = o.counter_mode {
            self.counter_mode = v;
        }
        if let Some(v) = o.season_length {
            self.season_length = v;
        }
        if let Some(v) = o.test_days {
            self.test_days = v;
        }
        self.exclude_weekends |= o.exclude_weekends;
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.season_length < 2 {
            return Err(CliError::Usage("season length must be at least 2".into()));
        }
        if self.test_days == 0 && self.test_from.is_none() {
            return Err(CliError::Usage("test window must hold at least one day".into()));
        }
        self.pipeline().validate().map_err(|e| CliError::Usage(e.to_string()))
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            season_length: self.season_length,
            max_acf_lag: self.max_acf_lag,
            grid: self.grid.clone(),
            differencing: self.differencing,
        }
    }

    /// Number of training days for a series over `dates`.
    pub fn train_len(&self, dates: &[NaiveDate]) -> Result<usize, CliError> {
        let n = match self.test_from {
            Some(from) => dates.iter().take_while(|d| **d < from).count(),
            None => dates.len().saturating_sub(self.test_days),
        };
        if n == 0 || n == dates.len() {
            return Err(CliError::Usage(format!(
                "split leaves an empty train or test window over {} days",
                dates.len()
            )));
        }
        Ok(n)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("flowcast-out"))
    }
}
