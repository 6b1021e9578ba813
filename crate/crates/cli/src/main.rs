use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use larvae::ingest::DEFAULT_MAX_STATION_KM;
use larvae::lstm::{WindowConfig, HORIZON, LOOKBACK};
use larvae::pipeline::{
    self, ForecastCmdConfig, PrepareConfig, ProjectConfig, ReportConfig, TrainAbundanceConfig, TrainClimateConfig,
    COMPARISON_YEAR, HOLDOUT_OLDEST, TARGET_YEAR,
};
use larvae::synth::{SyntheticDataset, DEFAULT_SEED};
use larvae::Error;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "larvae", version, about = "Larvae abundance regression and climate-driven projections")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clean observations and join them to station weather, writing features.csv.
    Prepare(PrepareArgs),
    /// Train the abundance regressor with a chronological holdout.
    TrainAbundance(TrainAbundanceArgs),
    /// Train the climate LSTMs, temperature offsets and days-of-precipitation line.
    TrainClimate(TrainClimateArgs),
    /// Recursively forecast every region's climate series.
    Forecast(ForecastArgs),
    /// Project larvae abundance from forecast climate.
    Project(ProjectArgs),
    /// Write choropleth data and percent-change tables.
    Report(ReportArgs),
    /// Write the bundled synthetic dataset.
    Synth(SynthArgs),
}

#[derive(Args)]
struct PrepareArgs {
    #[arg(long)]
    observations: PathBuf,
    #[arg(long)]
    stations: PathBuf,
    /// Output features CSV.
    #[arg(long)]
    out: PathBuf,
    /// Ingestion report (JSON).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Maximum distance to the joined station.
    #[arg(long, default_value_t = DEFAULT_MAX_STATION_KM)]
    max_km: f64,
}

#[derive(Args)]
struct TrainAbundanceArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    model_out: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    report: Option<PathBuf>,
    /// Per-row observed and predicted log counts for both splits.
    #[arg(long)]
    predictions: Option<PathBuf>,
    #[arg(long, default_value_t = HOLDOUT_OLDEST)]
    holdout_oldest: usize,
    #[arg(long)]
    max_epochs: Option<usize>,
}

#[derive(Args)]
struct TrainClimateArgs {
    #[arg(long)]
    series: PathBuf,
    /// Features CSV used to fit the days-of-precipitation line.
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    model_out: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = LOOKBACK)]
    lookback: usize,
    #[arg(long, default_value_t = HORIZON)]
    horizon: usize,
    #[arg(long)]
    max_epochs: Option<usize>,
}

#[derive(Args)]
struct ForecastArgs {
    #[arg(long)]
    series: PathBuf,
    #[arg(long)]
    climate_model: PathBuf,
    /// Output forecast CSV.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = LOOKBACK)]
    lookback: usize,
    /// Number of recursive prediction blocks.
    #[arg(long, default_value_t = larvae::forecast::DEFAULT_ROUNDS)]
    rounds: usize,
}

#[derive(Args)]
struct ProjectArgs {
    #[arg(long)]
    forecast: PathBuf,
    #[arg(long)]
    abundance_model: PathBuf,
    /// CSV of region_id,elevation_m.
    #[arg(long)]
    regions: PathBuf,
    /// Output projections CSV.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = TARGET_YEAR)]
    target_year: i32,
    #[arg(long, default_value_t = COMPARISON_YEAR)]
    comparison_year: i32,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    projections: PathBuf,
    #[arg(long)]
    choropleth_out: PathBuf,
    #[arg(long)]
    change_out: PathBuf,
    #[arg(long, default_value_t = COMPARISON_YEAR)]
    start_year: i32,
    #[arg(long, default_value_t = TARGET_YEAR)]
    end_year: i32,
    /// GeoJSON feature collection whose properties receive the projections.
    #[arg(long, requires = "geometry_out")]
    geometry: Option<PathBuf>,
    #[arg(long, requires = "geometry")]
    geometry_out: Option<PathBuf>,
    /// Feature property holding the region id.
    #[arg(long, default_value = "region_id")]
    region_key: String,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

fn error_json(e: &Error) -> Value {
    let mut v = json!({
        "error": e.kind(),
        "exit_code": e.exit_code(),
        "message": e.to_string(),
    });
    match e {
        Error::Parse {
            source_name,
            line,
            field,
            message,
        } => {
            v["source"] = json!(source_name);
            v["line"] = json!(line);
            v["field"] = json!(field);
            v["detail"] = json!(message);
        }
        Error::Io { path, .. } => v["path"] = json!(path.display().to_string()),
        _ => {}
    }
    v
}

fn warn(v: Value) {
    eprintln!("{}", json!({ "warning": v }));
}

fn run(cli: Cli) -> larvae::Result<Value> {
    Ok(match cli.command {
        Command::Prepare(a) => {
            let cfg = PrepareConfig {
                report_out: a.report,
                max_km: a.max_km,
                ..PrepareConfig::new(a.observations, a.stations, a.out)
            };
            json!(pipeline::cmd_prepare(&cfg)?)
        }
        Command::TrainAbundance(a) => {
            let cfg = TrainAbundanceConfig {
                report_out: a.report,
                predictions_out: a.predictions,
                holdout_oldest: a.holdout_oldest,
                max_epochs: a.max_epochs,
                ..TrainAbundanceConfig::new(a.features, a.model_out, a.seed)
            };
            json!(pipeline::cmd_train_abundance(&cfg)?)
        }
        Command::TrainClimate(a) => {
            let cfg = TrainClimateConfig {
                report_out: a.report,
                window: WindowConfig {
                    lookback: a.lookback,
                    horizon: a.horizon,
                },
                max_epochs: a.max_epochs,
                ..TrainClimateConfig::new(a.series, a.features, a.model_out, a.seed)
            };
            let report = pipeline::cmd_train_climate(&cfg)?;
            for s in &report.skipped {
                warn(json!(s));
            }
            json!(report)
        }
        Command::Forecast(a) => {
            let cfg = ForecastCmdConfig {
                lookback: a.lookback,
                rounds: a.rounds,
                ..ForecastCmdConfig::new(a.series, a.climate_model, a.out)
            };
            let outcome = pipeline::cmd_forecast(&cfg)?;
            for f in &outcome.failures {
                warn(json!(f));
            }
            json!(outcome)
        }
        Command::Project(a) => {
            let cfg = ProjectConfig {
                years: vec![a.comparison_year, a.target_year],
                ..ProjectConfig::new(a.forecast, a.abundance_model, a.regions, a.out)
            };
            let rows = pipeline::cmd_project(&cfg)?;
            json!({ "rows": rows.len(), "years": cfg.years })
        }
        Command::Report(a) => {
            let cfg = ReportConfig {
                start_year: a.start_year,
                end_year: a.end_year,
                geometry: a.geometry,
                geometry_out: a.geometry_out,
                region_key: a.region_key,
                ..ReportConfig::new(a.projections, a.choropleth_out, a.change_out)
            };
            let outcome = pipeline::cmd_report(&cfg)?;
            for r in &outcome.undefined {
                warn(json!({ "region_id": r, "status": pipeline::UNDEFINED_CHANGE }));
            }
            if !outcome.unmatched_regions.is_empty() {
                warn(json!({ "regions_without_geometry": outcome.unmatched_regions }));
            }
            if !outcome.unmatched_features.is_empty() {
                warn(json!({ "features_without_projection": outcome.unmatched_features }));
            }
            json!(outcome)
        }
        Command::Synth(a) => {
            SyntheticDataset::generate(a.seed).write_to(&a.out)?;
            json!({ "out": a.out.display().to_string(), "seed": a.seed })
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(summary) => {
            let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
            // A closed stdout (e.g. piped into `head`) is not a failure.
            let _ = writeln!(std::io::stdout(), "{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_json(&e));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
