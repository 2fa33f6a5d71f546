use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use flowcast::ingest::CounterMode;
use flowcast_cli::config::{Overrides, RunConfig};
use flowcast_cli::error::CliError;
use flowcast_cli::run;

#[derive(Parser)]
#[command(name = "flowcast", version, about = "Per-segment passenger flow forecasting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and clean turnstile records into six segment series.
    Ingest(Flags),
    /// Decomposition, ACF, normality and stationarity checks on an ingest directory.
    Analyze(Flags),
    /// Fit SARIMA, S-ARIMA, RARIMA and the hybrid selector on an ingest directory.
    Fit(Flags),
    /// Walk-forward evaluation of a fit directory.
    Evaluate(Flags),
    /// Run every stage on the bundled demo station.
    Demo(Flags),
}

#[derive(Args)]
struct Flags {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Raw CSV for ingest, or the output directory of the previous stage.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    station: Option<String>,
    /// Season length in observations.
    #[arg(long)]
    season: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_counter_mode)]
    counter_mode: Option<CounterMode>,
    /// File with one excluded date per line.
    #[arg(long)]
    excluded_dates: Option<PathBuf>,
    #[arg(long)]
    exclude_weekends: bool,
    #[arg(long)]
    test_days: Option<usize>,
    #[arg(long)]
    test_from: Option<NaiveDate>,
}

fn parse_counter_mode(s: &str) -> Result<CounterMode, String> {
    s.parse::<CounterMode>().map_err(|e| e.to_string())
}

impl Flags {
    fn resolve(self) -> Result<RunConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        config.apply(Overrides {
            input: self.input,
            station: self.station,
            counter_mode: self.counter_mode,
            excluded_dates: self.excluded_dates,
            exclude_weekends: self.exclude_weekends,
            season_length: self.season,
            test_days: self.test_days,
            test_from: self.test_from,
            seed: self.seed,
            out: self.out,
        });
        config.validate()?;
        Ok(config)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest(f) => f.resolve().and_then(|c| run::cmd_ingest(&c)),
        Command::Analyze(f) => f.resolve().and_then(|c| run::cmd_analyze(&c)),
        Command::Fit(f) => f.resolve().and_then(|c| run::cmd_fit(&c)),
        Command::Evaluate(f) => f.resolve().and_then(|c| run::cmd_evaluate(&c)),
        Command::Demo(f) => f.resolve().and_then(|c| run::cmd_demo(&c)),
    };
    match result {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
