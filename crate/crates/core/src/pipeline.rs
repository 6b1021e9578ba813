//! The pipeline commands: prepare, train-abundance, train-climate, forecast,
//! project and report. Each reads its inputs from files, writes its outputs
//! to files and returns a serializable summary.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::forecast::{forecast_window, ForecastConfig, InputWindow, DEFAULT_ROUNDS};
use crate::ingest::{
    self, clean_and_join, FeatureRow, IngestionReport, RegionSeries, VariableKind, DEFAULT_MAX_STATION_KM,
};
use crate::lstm::{make_windows, train_lstm, WindowConfig, LOOKBACK};
use crate::model_doc::{ModelDocument, ModelEntry};
use crate::nn::{train_abundance, DenseNetwork, Example, TrainConfig};
use crate::preprocess::{FeatureScalers, LogCountTransform};
use crate::stats::{residual_summary, CorrelationReport, ResidualSummary, Tail};
use crate::trend::{derive_min_max, fit_linear, predict_days, LinearModel, OffsetK};

pub const HOLDOUT_OLDEST: usize = 35;
pub const TARGET_YEAR: i32 = 2050;
pub const COMPARISON_YEAR: i32 = 2030;

pub const ABUNDANCE_ENTRY: &str = "abundance";
pub const SCALERS_ENTRY: &str = "feature_scalers";
pub const LOG_TRANSFORM_ENTRY: &str = "log_transform";
pub const OFFSETS_ENTRY: &str = "temperature_offsets";
pub const PRECIP_DAYS_ENTRY: &str = "precip_days";

/// Series forecast by an LSTM; the other forecast variables are derived.
pub const FORECAST_VARIABLES: [VariableKind; 2] = [VariableKind::SummerTmean, VariableKind::SummerPrecip];

pub fn lstm_entry(variable: VariableKind) -> String {
    format!("lstm_{variable}")
}

pub const PROJECTION_COLUMNS: [&str; 10] = [
    "region_id",
    "year",
    "log10_abundance",
    "abundance",
    "tmean_c",
    "tmax_c",
    "tmin_c",
    "precip_days",
    "precip_mm",
    "elevation_m",
];

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("reports always serialize");
    text.push('\n');
    write_file(path, text)
}

fn csv_bytes<I, R>(header: &[&str], rows: I) -> Result<Vec<u8>>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::data(format!("formatting csv: {e}"));
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(row).map_err(err)?;
    }
    w.into_inner().map_err(|e| Error::data(format!("formatting csv: {e}")))
}

// ---------------------------------------------------------------------------
// prepare

#[derive(Debug, Clone)]
pub struct PrepareConfig {
    pub observations: PathBuf,
    pub stations: PathBuf,
    pub features_out: PathBuf,
    pub report_out: Option<PathBuf>,
    pub max_km: f64,
}

impl PrepareConfig {
    pub fn new(observations: PathBuf, stations: PathBuf, features_out: PathBuf) -> Self {
        Self {
            observations,
            stations,
            features_out,
            report_out: None,
            max_km: DEFAULT_MAX_STATION_KM,
        }
    }
}

pub fn cmd_prepare(cfg: &PrepareConfig) -> Result<IngestionReport> {
    if !(cfg.max_km.is_finite() && cfg.max_km > 0.0) {
        return Err(Error::config(format!("max station distance {} km must be positive", cfg.max_km)));
    }
    let obs = ingest::parse_observations(&cfg.observations)?;
    let stations = ingest::parse_stations(&cfg.stations)?;
    let (rows, report) = clean_and_join(obs, &stations, cfg.max_km)?;
    if rows.is_empty() {
        let reason = if report.input_rows == 0 {
            "the observations file has no rows".to_string()
        } else if report.container == report.input_rows {
            format!("container filter removed all {} observations", report.input_rows)
        } else {
            format!(
                "station proximity rule ({} km) excluded all {} remaining observations",
                cfg.max_km, report.proximity
            )
        };
        return Err(Error::data(format!("no feature rows survived cleaning: {reason}")));
    }
    let mut buf = Vec::new();
    ingest::write_features(&mut buf, &rows)?;
    write_file(&cfg.features_out, buf)?;
    if let Some(path) = &cfg.report_out {
        write_json(path, &report)?;
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// train-abundance

/// The trained regressor with its input scalers and target transform.
#[derive(Debug, Clone, PartialEq)]
pub struct AbundanceModel {
    pub network: DenseNetwork,
    pub scalers: FeatureScalers,
    pub transform: LogCountTransform,
}

impl AbundanceModel {
    pub fn from_document(doc: &ModelDocument) -> Result<Self> {
        let model = Self {
            network: doc.dense(ABUNDANCE_ENTRY)?.clone(),
            scalers: doc.scalers(SCALERS_ENTRY)?.clone(),
            transform: doc.log_transform(LOG_TRANSFORM_ENTRY)?,
        };
        if model.scalers.scalers.len() != model.network.input_dim() {
            return Err(Error::data(format!(
                "{} feature scalers for a network with {} inputs",
                model.scalers.scalers.len(),
                model.network.input_dim()
            )));
        }
        Ok(model)
    }

    pub fn to_document(&self) -> ModelDocument {
        let mut doc = ModelDocument::new();
        doc.insert(ABUNDANCE_ENTRY, ModelEntry::Dense(self.network.clone()));
        doc.insert(SCALERS_ENTRY, ModelEntry::Scalers(self.scalers.clone()));
        doc.insert(LOG_TRANSFORM_ENTRY, ModelEntry::LogTransform(self.transform));
        doc
    }

    /// Eval-mode prediction of `log10(count + offset)` from raw features.
    pub fn predict_log(&self, features: &[f64; 6]) -> Result<f64> {
        let x = self.scalers.transform(features)?;
        Ok(self.network.predict(&x)?[0])
    }
}

#[derive(Debug, Clone)]
pub struct TrainAbundanceConfig {
    pub features: PathBuf,
    pub model_out: PathBuf,
    pub report_out: Option<PathBuf>,
    pub predictions_out: Option<PathBuf>,
    pub holdout_oldest: usize,
    pub seed: u64,
    pub max_epochs: Option<usize>,
}

impl TrainAbundanceConfig {
    pub fn new(features: PathBuf, model_out: PathBuf, seed: u64) -> Self {
        Self {
            features,
            model_out,
            report_out: None,
            predictions_out: None,
            holdout_oldest: HOLDOUT_OLDEST,
            seed,
            max_epochs: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AbundanceReport {
    pub n: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub seed: u64,
    pub epochs_run: usize,
    pub stopped_on_plateau: bool,
    pub final_train_loss: f64,
    pub train: CorrelationReport,
    /// Absent when the validation split is too small or constant.
    pub validation: Option<CorrelationReport>,
    pub validation_note: Option<String>,
    pub validation_residuals: Option<ResidualSummary>,
}

/// Oldest `holdout` rows by (date, location) for validation, the rest for training.
pub fn chronological_split(mut rows: Vec<FeatureRow>, holdout: usize) -> Result<(Vec<FeatureRow>, Vec<FeatureRow>)> {
    if holdout >= rows.len() {
        return Err(Error::config(format!(
            "holdout of {holdout} oldest rows leaves no training data out of {}",
            rows.len()
        )));
    }
    rows.sort_by(|a, b| (a.date, &a.location_id).cmp(&(b.date, &b.location_id)));
    let train = rows.split_off(holdout);
    Ok((train, rows))
}

pub fn cmd_train_abundance(cfg: &TrainAbundanceConfig) -> Result<AbundanceReport> {
    let rows = ingest::parse_features(&cfg.features)?;
    let n = rows.len();
    let (train, val) = chronological_split(rows, cfg.holdout_oldest)?;
    let mut tcfg = TrainConfig::with_seed(cfg.seed);
    if let Some(m) = cfg.max_epochs {
        tcfg.max_epochs = m;
    }
    tcfg.validate()?;
    if train.len() < tcfg.batch_size {
        return Err(Error::config(format!(
            "{} training rows is fewer than the batch size {}",
            train.len(),
            tcfg.batch_size
        )));
    }

    let train_x: Vec<Vec<f64>> = train.iter().map(|r| r.features().to_vec()).collect();
    let scalers = FeatureScalers::fit(&train_x)?;
    if scalers.fit_rows != train.len() {
        return Err(Error::shape(format!(
            "scalers fitted on {} rows but the training split has {}",
            scalers.fit_rows,
            train.len()
        )));
    }
    let transform = LogCountTransform::default();
    let targets = |rows: &[FeatureRow]| -> Result<Vec<f64>> {
        rows.iter().map(|r| transform.forward(r.larvae_count as f64)).collect()
    };
    let train_y = targets(&train)?;
    let val_y = targets(&val)?;
    let examples: Vec<Example> = train_x
        .iter()
        .zip(&train_y)
        .map(|(x, &y)| Ok(Example { features: scalers.transform(x)?, target: y }))
        .collect::<Result<_>>()?;

    let (network, training) = train_abundance(&examples, &tcfg)?;
    let model = AbundanceModel {
        network,
        scalers,
        transform,
    };
    let predict = |rows: &[FeatureRow]| -> Result<Vec<f64>> { rows.iter().map(|r| model.predict_log(&r.features())).collect() };
    let train_pred = predict(&train)?;
    let val_pred = predict(&val)?;

    let train_corr = CorrelationReport::compute(&train_pred, &train_y, Tail::One)?;
    let (validation, validation_note) = match CorrelationReport::compute(&val_pred, &val_y, Tail::One) {
        Ok(c) => (Some(c), None),
        Err(e) => (None, Some(format!("validation correlation unavailable: {e}"))),
    };
    let validation_residuals = if val.is_empty() {
        None
    } else {
        Some(residual_summary(&val_pred, &val_y)?)
    };

    model.to_document().save(&cfg.model_out)?;
    if let Some(path) = &cfg.predictions_out {
        let rows = val
            .iter()
            .zip(val_y.iter().zip(&val_pred))
            .map(|(r, (y, p))| (r, "validation", y, p))
            .chain(train.iter().zip(train_y.iter().zip(&train_pred)).map(|(r, (y, p))| (r, "train", y, p)))
            .map(|(r, split, y, p)| {
                vec![
                    r.location_id.clone(),
                    r.date.format("%Y-%m-%d").to_string(),
                    split.to_string(),
                    y.to_string(),
                    p.to_string(),
                ]
            });
        write_file(
            path,
            csv_bytes(&["location_id", "date", "split", "observed_log10", "predicted_log10"], rows)?,
        )?;
    }

    let report = AbundanceReport {
        n,
        n_train: train.len(),
        n_val: val.len(),
        seed: cfg.seed,
        epochs_run: training.epochs_run(),
        stopped_on_plateau: training.stopped_on_plateau,
        final_train_loss: training.final_loss(),
        train: train_corr,
        validation,
        validation_note,
        validation_residuals,
    };
    if let Some(path) = &cfg.report_out {
        write_json(path, &report)?;
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// train-climate

#[derive(Debug, Clone)]
pub struct TrainClimateConfig {
    pub series: PathBuf,
    pub features: PathBuf,
    pub model_out: PathBuf,
    pub report_out: Option<PathBuf>,
    pub seed: u64,
    pub window: WindowConfig,
    pub max_epochs: Option<usize>,
}

impl TrainClimateConfig {
    pub fn new(series: PathBuf, features: PathBuf, model_out: PathBuf, seed: u64) -> Self {
        Self {
            series,
            features,
            model_out,
            report_out: None,
            seed,
            window: WindowConfig::default(),
            max_epochs: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VariableTraining {
    pub variable: String,
    pub regions: usize,
    pub windows: usize,
    pub epochs_run: usize,
    pub stopped_on_plateau: bool,
    pub final_train_loss: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Skipped {
    pub region_id: String,
    pub variable: String,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClimateReport {
    pub seed: u64,
    pub lookback: usize,
    pub horizon: usize,
    pub variables: Vec<VariableTraining>,
    pub skipped: Vec<Skipped>,
    pub offsets: BTreeMap<String, OffsetK>,
    pub precip_days_model: LinearModel,
    pub precip_days_rows: usize,
}

fn by_region(series: Vec<RegionSeries>) -> BTreeMap<String, BTreeMap<VariableKind, RegionSeries>> {
    let mut out: BTreeMap<String, BTreeMap<VariableKind, RegionSeries>> = BTreeMap::new();
    for s in series {
        out.entry(s.region_id().to_string()).or_default().insert(s.variable(), s);
    }
    out
}

/// Offsets fitted over the years all three temperature series share.
fn region_offsets(vars: &BTreeMap<VariableKind, RegionSeries>) -> std::result::Result<OffsetK, String> {
    let get = |v: VariableKind| vars.get(&v).ok_or_else(|| format!("no {v} series"));
    let (mean, min, max) = (
        get(VariableKind::SummerTmean)?,
        get(VariableKind::SummerTmin)?,
        get(VariableKind::SummerTmax)?,
    );
    let first = mean.start_year().max(min.start_year()).max(max.start_year());
    let last = mean.end_year().min(min.end_year()).min(max.end_year());
    if first > last {
        return Err("temperature series share no years".into());
    }
    let slice = |s: &RegionSeries| -> Vec<f64> { (first..=last).filter_map(|y| s.value_in(y)).collect() };
    OffsetK::fit(&slice(mean), &slice(min), &slice(max)).map_err(|e| e.to_string())
}

pub fn cmd_train_climate(cfg: &TrainClimateConfig) -> Result<ClimateReport> {
    cfg.window.validate()?;
    let mut tcfg = TrainConfig::with_seed(cfg.seed);
    if let Some(m) = cfg.max_epochs {
        tcfg.max_epochs = m;
    }
    tcfg.validate()?;

    let regions = by_region(ingest::parse_series(&cfg.series)?);
    if regions.is_empty() {
        return Err(Error::data(format!("{} contains no series", cfg.series.display())));
    }
    let mut doc = ModelDocument::new();
    let mut variables = Vec::new();
    let mut skipped = Vec::new();

    for variable in FORECAST_VARIABLES {
        let mut pairs = Vec::new();
        let mut used = 0;
        for (region, vars) in &regions {
            let Some(series) = vars.get(&variable) else {
                skipped.push(Skipped {
                    region_id: region.clone(),
                    variable: variable.to_string(),
                    reason: "series missing".into(),
                });
                continue;
            };
            match make_windows(series, cfg.window) {
                Ok(w) => {
                    pairs.extend(w);
                    used += 1;
                }
                Err(Error::Data(reason)) => skipped.push(Skipped {
                    region_id: region.clone(),
                    variable: variable.to_string(),
                    reason,
                }),
                Err(e) => return Err(e),
            }
        }
        if pairs.is_empty() {
            return Err(Error::data(format!("no region has a {variable} series long enough to train on")));
        }
        let (model, report) = train_lstm(&pairs, &tcfg)?;
        doc.insert(lstm_entry(variable), ModelEntry::Lstm(model));
        variables.push(VariableTraining {
            variable: variable.to_string(),
            regions: used,
            windows: pairs.len(),
            epochs_run: report.epochs_run(),
            stopped_on_plateau: report.stopped_on_plateau,
            final_train_loss: report.final_loss(),
        });
    }

    let mut offsets = BTreeMap::new();
    for (region, vars) in &regions {
        match region_offsets(vars) {
            Ok(k) => {
                offsets.insert(region.clone(), k);
            }
            Err(reason) => skipped.push(Skipped {
                region_id: region.clone(),
                variable: "temperature_offsets".into(),
                reason,
            }),
        }
    }
    doc.insert(OFFSETS_ENTRY, ModelEntry::Offsets(offsets.clone()));

    let rows = ingest::parse_features(&cfg.features)?;
    let amount: Vec<f64> = rows.iter().map(|r| r.precip_mm).collect();
    let days: Vec<f64> = rows.iter().map(|r| r.precip_days).collect();
    let linear = fit_linear(&amount, &days)?;
    doc.insert(PRECIP_DAYS_ENTRY, ModelEntry::Linear(linear));

    doc.save(&cfg.model_out)?;
    let report = ClimateReport {
        seed: cfg.seed,
        lookback: cfg.window.lookback,
        horizon: cfg.window.horizon,
        variables,
        skipped,
        offsets,
        precip_days_model: linear,
        precip_days_rows: rows.len(),
    };
    if let Some(path) = &cfg.report_out {
        write_json(path, &report)?;
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// forecast

#[derive(Debug, Clone)]
pub struct ForecastCmdConfig {
    pub series: PathBuf,
    pub climate_model: PathBuf,
    pub forecast_out: PathBuf,
    pub lookback: usize,
    pub rounds: usize,
}

impl ForecastCmdConfig {
    pub fn new(series: PathBuf, climate_model: PathBuf, forecast_out: PathBuf) -> Self {
        Self {
            series,
            climate_model,
            forecast_out,
            lookback: LOOKBACK,
            rounds: DEFAULT_ROUNDS,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RegionFailure {
    pub region_id: String,
    pub error: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ForecastOutcome {
    pub horizon: usize,
    pub rounds: usize,
    pub regions: Vec<String>,
    pub failures: Vec<RegionFailure>,
    pub rows: usize,
}

/// All forecast variables of one region, in output order.
fn forecast_region(
    region: &str,
    vars: &BTreeMap<VariableKind, RegionSeries>,
    doc: &ModelDocument,
    cfg: &ForecastConfig,
) -> Result<Vec<RegionSeries>> {
    let mut raw = BTreeMap::new();
    let mut start_year = None;
    for variable in FORECAST_VARIABLES {
        let series = vars
            .get(&variable)
            .ok_or_else(|| Error::data(format!("region {region} has no {variable} series")))?;
        let window = InputWindow::from_series(series, cfg.lookback)?;
        let model = doc.lstm(&lstm_entry(variable))?;
        let values = forecast_window(model, &window.values, cfg)?;
        let start = window.last_year + 1;
        if *start_year.get_or_insert(start) != start {
            return Err(Error::data(format!("region {region} series end in different years")));
        }
        raw.insert(variable, values);
    }
    let start_year = start_year.expect("at least one forecast variable");
    let k = doc
        .offsets(OFFSETS_ENTRY)?
        .get(region)
        .copied()
        .ok_or_else(|| Error::data(format!("region {region} has no temperature offsets")))?;
    let linear = doc.linear(PRECIP_DAYS_ENTRY)?;

    let tmean = raw.remove(&VariableKind::SummerTmean).expect("forecast above");
    let precip = raw.remove(&VariableKind::SummerPrecip).expect("forecast above");
    let (tmin, tmax) = derive_min_max(&tmean, k);
    let days = precip
        .iter()
        .map(|&p| predict_days(&linear, p.max(0.0)))
        .collect::<Result<Vec<_>>>()?;
    [
        (VariableKind::SummerTmean, tmean),
        (VariableKind::SummerTmin, tmin),
        (VariableKind::SummerTmax, tmax),
        (VariableKind::SummerPrecip, precip),
        (VariableKind::PrecipDays, days),
    ]
    .into_iter()
    .map(|(v, values)| RegionSeries::new(region, v, start_year, values))
    .collect()
}

pub fn cmd_forecast(cfg: &ForecastCmdConfig) -> Result<ForecastOutcome> {
    let doc = ModelDocument::load(&cfg.climate_model)?;
    let horizon = doc.lstm(&lstm_entry(VariableKind::SummerTmean))?.output_len();
    let fcfg = ForecastConfig {
        lookback: cfg.lookback,
        horizon,
        rounds: cfg.rounds,
        ..ForecastConfig::default()
    };
    fcfg.validate()?;
    for v in FORECAST_VARIABLES {
        let len = doc.lstm(&lstm_entry(v))?.output_len();
        if len != horizon {
            return Err(Error::data(format!("{v} model predicts {len} years, expected {horizon}")));
        }
    }

    let regions = by_region(ingest::parse_series(&cfg.series)?);
    let mut out = Vec::new();
    let mut ok = Vec::new();
    let mut failures = Vec::new();
    for (region, vars) in &regions {
        match forecast_region(region, vars, &doc, &fcfg) {
            Ok(series) => {
                out.extend(series);
                ok.push(region.clone());
            }
            Err(e @ (Error::Data(_) | Error::Shape(_))) => failures.push(RegionFailure {
                region_id: region.clone(),
                error: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    if ok.is_empty() {
        let detail: Vec<String> = failures.iter().map(|f| format!("{}: {}", f.region_id, f.error)).collect();
        return Err(Error::data(format!("no region could be forecast ({})", detail.join("; "))));
    }
    let mut buf = Vec::new();
    ingest::write_series(&mut buf, &out)?;
    write_file(&cfg.forecast_out, buf)?;
    Ok(ForecastOutcome {
        horizon,
        rounds: fcfg.rounds,
        regions: ok,
        failures,
        rows: out.iter().map(RegionSeries::len).sum(),
    })
}

// ---------------------------------------------------------------------------
// project

#[derive(Debug, Clone)]
pub struct ProjectConfig {
    pub forecast: PathBuf,
    pub abundance_model: PathBuf,
    pub regions: PathBuf,
    pub projections_out: PathBuf,
    pub years: Vec<i32>,
}

impl ProjectConfig {
    pub fn new(forecast: PathBuf, abundance_model: PathBuf, regions: PathBuf, projections_out: PathBuf) -> Self {
        Self {
            forecast,
            abundance_model,
            regions,
            projections_out,
            years: vec![COMPARISON_YEAR, TARGET_YEAR],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbundanceProjection {
    pub region_id: String,
    pub year: i32,
    pub log10_abundance: f64,
    pub abundance: f64,
    /// tmean, tmax, tmin, precip_days, precip_mm, elevation.
    pub features: [f64; 6],
}

impl AbundanceProjection {
    /// Log-scale predictions below zero (fewer than no larvae) are floored at
    /// zero so the count stays non-negative.
    pub fn new(region_id: &str, year: i32, features: [f64; 6], model: &AbundanceModel) -> Result<Self> {
        let log10_abundance = model.predict_log(&features)?.max(0.0);
        Ok(Self {
            region_id: region_id.to_string(),
            year,
            log10_abundance,
            abundance: model.transform.inverse(log10_abundance),
            features,
        })
    }
}

fn projection_features(
    region: &str,
    year: i32,
    vars: &BTreeMap<VariableKind, RegionSeries>,
    elevation: f64,
) -> Result<[f64; 6]> {
    let get = |v: VariableKind| -> Result<f64> {
        vars.get(&v)
            .and_then(|s| s.value_in(year))
            .ok_or_else(|| Error::data(format!("region {region} has no {v} forecast for {year}")))
    };
    Ok([
        get(VariableKind::SummerTmean)?,
        get(VariableKind::SummerTmax)?,
        get(VariableKind::SummerTmin)?,
        get(VariableKind::PrecipDays)?,
        get(VariableKind::SummerPrecip)?,
        elevation,
    ])
}

pub fn cmd_project(cfg: &ProjectConfig) -> Result<Vec<AbundanceProjection>> {
    if cfg.years.is_empty() {
        return Err(Error::config("no projection years given"));
    }
    let years: BTreeSet<i32> = cfg.years.iter().copied().collect();
    let model = AbundanceModel::from_document(&ModelDocument::load(&cfg.abundance_model)?)?;
    let elevations = ingest::parse_regions(&cfg.regions)?;
    let source = cfg.forecast.display().to_string();
    let file = fs::File::open(&cfg.forecast).map_err(|e| Error::io(&cfg.forecast, e))?;
    let regions = by_region(ingest::read_series(file, &source, true)?);
    if regions.is_empty() {
        return Err(Error::data(format!("{source} contains no forecasts")));
    }

    let mut out = Vec::new();
    for (region, vars) in &regions {
        let elevation = *elevations
            .get(region)
            .ok_or_else(|| Error::data(format!("region {region} has no elevation in {}", cfg.regions.display())))?;
        for &year in &years {
            let features = projection_features(region, year, vars, elevation)?;
            out.push(AbundanceProjection::new(region, year, features, &model)?);
        }
    }
    write_file(&cfg.projections_out, projections_csv(&out)?)?;
    Ok(out)
}

fn projections_csv(rows: &[AbundanceProjection]) -> Result<Vec<u8>> {
    csv_bytes(
        &PROJECTION_COLUMNS,
        rows.iter().map(|p| {
            let mut rec = vec![
                p.region_id.clone(),
                p.year.to_string(),
                p.log10_abundance.to_string(),
                p.abundance.to_string(),
            ];
            rec.extend(p.features.iter().map(f64::to_string));
            rec
        }),
    )
}

pub fn read_projections(path: &Path) -> Result<Vec<AbundanceProjection>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let table = ingest::Table::read(file, &path.display().to_string(), &PROJECTION_COLUMNS)?;
    table
        .rows()
        .map(|row| {
            let mut features = [0.0; 6];
            for (slot, name) in features.iter_mut().zip(&PROJECTION_COLUMNS[4..]) {
                *slot = row.finite(name)?;
            }
            Ok(AbundanceProjection {
                region_id: row.str("region_id")?.to_string(),
                year: row.parse("year")?,
                log10_abundance: row.finite("log10_abundance")?,
                abundance: row.finite("abundance")?,
                features,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// report

#[derive(Debug, Clone)]
pub struct ReportConfig {
    pub projections: PathBuf,
    pub choropleth_out: PathBuf,
    pub change_out: PathBuf,
    pub start_year: i32,
    pub end_year: i32,
    pub geometry: Option<PathBuf>,
    pub geometry_out: Option<PathBuf>,
    pub region_key: String,
}

impl ReportConfig {
    pub fn new(projections: PathBuf, choropleth_out: PathBuf, change_out: PathBuf) -> Self {
        Self {
            projections,
            choropleth_out,
            change_out,
            start_year: COMPARISON_YEAR,
            end_year: TARGET_YEAR,
            geometry: None,
            geometry_out: None,
            region_key: "region_id".into(),
        }
    }
}

pub const UNDEFINED_CHANGE: &str = "undefined change";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PercentChange {
    pub region_id: String,
    pub start_abundance: f64,
    pub end_abundance: f64,
    /// `None` when the start value is zero.
    pub percent: Option<f64>,
}

/// `100 * (end - start) / start`, undefined for a zero start.
pub fn percent_change(start: f64, end: f64) -> Option<f64> {
    (start != 0.0).then(|| 100.0 * (end - start) / start)
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportOutcome {
    pub changes: Vec<PercentChange>,
    pub undefined: Vec<String>,
    /// Regions with projections but no matching geometry feature.
    pub unmatched_regions: Vec<String>,
    /// Geometry features whose region has no projection.
    pub unmatched_features: Vec<String>,
}

pub fn cmd_report(cfg: &ReportConfig) -> Result<ReportOutcome> {
    if cfg.geometry.is_some() != cfg.geometry_out.is_some() {
        return Err(Error::config("geometry input and output must be given together"));
    }
    let rows = read_projections(&cfg.projections)?;
    let mut by_key: BTreeMap<(&str, i32), &AbundanceProjection> = BTreeMap::new();
    for p in &rows {
        if by_key.insert((p.region_id.as_str(), p.year), p).is_some() {
            return Err(Error::data(format!("duplicate projection for {} in {}", p.region_id, p.year)));
        }
    }
    let regions: BTreeSet<&str> = rows.iter().map(|p| p.region_id.as_str()).collect();
    if regions.is_empty() {
        return Err(Error::data("projections file has no rows"));
    }
    let lookup = |region: &str, year: i32| -> Result<&AbundanceProjection> {
        by_key
            .get(&(region, year))
            .copied()
            .ok_or_else(|| Error::data(format!("no projection for region {region} in {year}")))
    };

    let mut choropleth = Vec::new();
    let mut changes = Vec::new();
    for &region in &regions {
        let end = lookup(region, cfg.end_year)?;
        let start = lookup(region, cfg.start_year)?;
        choropleth.push(end);
        changes.push(PercentChange {
            region_id: region.to_string(),
            start_abundance: start.abundance,
            end_abundance: end.abundance,
            percent: percent_change(start.abundance, end.abundance),
        });
    }

    write_file(
        &cfg.choropleth_out,
        csv_bytes(
            &["region_id", "log10_abundance", "abundance"],
            choropleth
                .iter()
                .map(|p| vec![p.region_id.clone(), p.log10_abundance.to_string(), p.abundance.to_string()]),
        )?,
    )?;
    write_file(
        &cfg.change_out,
        csv_bytes(
            &["region_id", "start_year", "end_year", "start_abundance", "end_abundance", "percent_change", "status"],
            changes.iter().map(|c| {
                vec![
                    c.region_id.clone(),
                    cfg.start_year.to_string(),
                    cfg.end_year.to_string(),
                    c.start_abundance.to_string(),
                    c.end_abundance.to_string(),
                    c.percent.map_or(String::new(), |v| v.to_string()),
                    if c.percent.is_some() { "ok" } else { UNDEFINED_CHANGE }.to_string(),
                ]
            }),
        )?,
    )?;

    let mut outcome = ReportOutcome {
        undefined: changes.iter().filter(|c| c.percent.is_none()).map(|c| c.region_id.clone()).collect(),
        changes,
        unmatched_regions: Vec::new(),
        unmatched_features: Vec::new(),
    };
    if let (Some(input), Some(output)) = (&cfg.geometry, &cfg.geometry_out) {
        let text = fs::read_to_string(input).map_err(|e| Error::io(input, e))?;
        let mut geo: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
            source_name: input.display().to_string(),
            line: e.line() as u64,
            field: format!("column {}", e.column()),
            message: e.to_string(),
        })?;
        let values: BTreeMap<&str, (&AbundanceProjection, &PercentChange)> = choropleth
            .iter()
            .zip(&outcome.changes)
            .map(|(p, c)| (p.region_id.as_str(), (*p, c)))
            .collect();
        let matched = merge_geometry(&mut geo, &cfg.region_key, &values, &mut outcome.unmatched_features)
            .map_err(|m| Error::data(format!("{}: {m}", input.display())))?;
        outcome.unmatched_regions = regions.iter().filter(|r| !matched.contains(**r)).map(|r| r.to_string()).collect();
        let mut text = serde_json::to_string_pretty(&geo).expect("json value serializes");
        text.push('\n');
        write_file(output, text)?;
    }
    Ok(outcome)
}

/// Adds abundance properties to every feature whose `key` property names a
/// projected region. Geometry is left untouched.
fn merge_geometry(
    geo: &mut serde_json::Value,
    key: &str,
    values: &BTreeMap<&str, (&AbundanceProjection, &PercentChange)>,
    unmatched_features: &mut Vec<String>,
) -> std::result::Result<BTreeSet<String>, String> {
    let features = geo
        .get_mut("features")
        .and_then(|f| f.as_array_mut())
        .ok_or("not a feature collection (no `features` array)")?;
    let mut matched = BTreeSet::new();
    for (i, feature) in features.iter_mut().enumerate() {
        let props = feature
            .get_mut("properties")
            .and_then(|p| p.as_object_mut())
            .ok_or_else(|| format!("feature {i} has no properties object"))?;
        let id = match props.get(key) {
            Some(serde_json::Value::String(s)) => s.clone(),
            Some(other) => other.to_string(),
            None => return Err(format!("feature {i} has no `{key}` property")),
        };
        match values.get(id.as_str()) {
            Some((p, c)) => {
                props.insert("log10_abundance".into(), p.log10_abundance.into());
                props.insert("abundance".into(), p.abundance.into());
                props.insert("percent_change".into(), c.percent.map_or(serde_json::Value::Null, Into::into));
                matched.insert(id);
            }
            None => unmatched_features.push(id),
        }
    }
    Ok(matched)
}

#[cfg(test)]
mod tests;
