//! CSV ingestion and the data-cleaning rules: container filtering,
//! same-site/same-day merging, and nearest-station joins within a fixed radius.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::Serialize;

use crate::error::{Error, Result};

pub const EARTH_RADIUS_KM: f64 = 6371.0;
/// 30 statute miles.
pub const DEFAULT_MAX_STATION_KM: f64 = 48.28;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WaterSource {
    Still,
    Flowing,
    Container,
}

impl FromStr for WaterSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "still" => Ok(WaterSource::Still),
            "flowing" => Ok(WaterSource::Flowing),
            "container" => Ok(WaterSource::Container),
            other => Err(format!("unknown water source `{other}` (expected still, flowing or container)")),
        }
    }
}

impl fmt::Display for WaterSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WaterSource::Still => "still",
            WaterSource::Flowing => "flowing",
            WaterSource::Container => "container",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        check_lat(lat).and_then(|_| check_lon(lon)).map_err(Error::Domain)?;
        Ok(Self { lat, lon })
    }
}

fn check_lat(lat: f64) -> Result<(), String> {
    if (-90.0..=90.0).contains(&lat) {
        Ok(())
    } else {
        Err(format!("latitude {lat} outside [-90, 90]"))
    }
}

fn check_lon(lon: f64) -> Result<(), String> {
    if (-180.0..=180.0).contains(&lon) {
        Ok(())
    } else {
        Err(format!("longitude {lon} outside [-180, 180]"))
    }
}

/// Calendar month, written `YYYY-MM`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct YearMonth {
    pub year: i32,
    pub month: u32,
}

impl YearMonth {
    pub fn of(date: NaiveDate) -> Self {
        Self {
            year: date.year(),
            month: date.month(),
        }
    }
}

impl FromStr for YearMonth {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("`{s}` is not a YYYY-MM month");
        let (y, m) = s.trim().split_once('-').ok_or_else(bad)?;
        let year: i32 = y.parse().map_err(|_| bad())?;
        let month: u32 = m.parse().map_err(|_| bad())?;
        if y.len() != 4 || m.len() != 2 || !(1..=12).contains(&month) {
            return Err(bad());
        }
        Ok(Self { year, month })
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LarvaeObservation {
    pub location_id: String,
    pub position: LatLon,
    pub date: NaiveDate,
    pub water_source: WaterSource,
    pub larvae_count: u64,
}

/// Monthly averages of daily weather at one station.
#[derive(Debug, Clone, PartialEq)]
pub struct StationRecord {
    pub station_id: String,
    pub position: LatLon,
    pub month: YearMonth,
    pub tmean_c: f64,
    pub tmax_c: f64,
    pub tmin_c: f64,
    pub precip_days: f64,
    /// Average daily precipitation, mm.
    pub precip_mm: f64,
    pub elevation_m: f64,
}

pub const FEATURE_NAMES: [&str; 6] = ["tmean_c", "tmax_c", "tmin_c", "precip_days", "precip_mm", "elevation_m"];

/// One training example: the six model inputs and the larvae count.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub location_id: String,
    pub date: NaiveDate,
    pub tmean_c: f64,
    pub tmax_c: f64,
    pub tmin_c: f64,
    pub precip_days: f64,
    pub precip_mm: f64,
    pub elevation_m: f64,
    pub larvae_count: u64,
}

impl FeatureRow {
    /// Features in [`FEATURE_NAMES`] order.
    pub fn features(&self) -> [f64; 6] {
        [
            self.tmean_c,
            self.tmax_c,
            self.tmin_c,
            self.precip_days,
            self.precip_mm,
            self.elevation_m,
        ]
    }

    pub fn month(&self) -> YearMonth {
        YearMonth::of(self.date)
    }
}

fn check_temperatures(tmin: f64, tmean: f64, tmax: f64) -> Result<(), String> {
    if tmin <= tmean && tmean <= tmax {
        Ok(())
    } else {
        Err(format!("temperature ordering violated: tmin {tmin}, tmean {tmean}, tmax {tmax}"))
    }
}

fn check_precip_days(days: f64) -> Result<(), String> {
    if (0.0..=31.0).contains(&days) {
        Ok(())
    } else {
        Err(format!("precip_days {days} outside [0, 31]"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VariableKind {
    SummerTmean,
    SummerTmin,
    SummerTmax,
    SummerPrecip,
    /// Derived forecast variable; never present in historical series files.
    PrecipDays,
}

impl VariableKind {
    pub const HISTORICAL: [VariableKind; 4] = [
        VariableKind::SummerTmean,
        VariableKind::SummerTmin,
        VariableKind::SummerTmax,
        VariableKind::SummerPrecip,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VariableKind::SummerTmean => "summer_tmean",
            VariableKind::SummerTmin => "summer_tmin",
            VariableKind::SummerTmax => "summer_tmax",
            VariableKind::SummerPrecip => "summer_precip",
            VariableKind::PrecipDays => "precip_days",
        }
    }
}

impl FromStr for VariableKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "summer_tmean" => Ok(VariableKind::SummerTmean),
            "summer_tmin" => Ok(VariableKind::SummerTmin),
            "summer_tmax" => Ok(VariableKind::SummerTmax),
            "summer_precip" => Ok(VariableKind::SummerPrecip),
            "precip_days" => Ok(VariableKind::PrecipDays),
            other => Err(format!("unknown variable `{other}`")),
        }
    }
}

impl fmt::Display for VariableKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An annual series for one region and variable over consecutive years.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSeries {
    region_id: String,
    variable: VariableKind,
    start_year: i32,
    values: Vec<f64>,
}

impl RegionSeries {
    pub fn new(region_id: impl Into<String>, variable: VariableKind, start_year: i32, values: Vec<f64>) -> Result<Self> {
        let region_id = region_id.into();
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::data(format!(
                "series {region_id}/{variable} has a non-finite value in year {}",
                start_year + i as i32
            )));
        }
        Ok(Self {
            region_id,
            variable,
            start_year,
            values,
        })
    }

    pub fn region_id(&self) -> &str {
        &self.region_id
    }

    pub fn variable(&self) -> VariableKind {
        self.variable
    }

    pub fn start_year(&self) -> i32 {
        self.start_year
    }

    pub fn end_year(&self) -> i32 {
        self.start_year + self.values.len() as i32 - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn years(&self) -> impl Iterator<Item = i32> + '_ {
        (0..self.values.len() as i32).map(move |i| self.start_year + i)
    }

    pub fn value_in(&self, year: i32) -> Option<f64> {
        let idx = year.checked_sub(self.start_year)?;
        usize::try_from(idx).ok().and_then(|i| self.values.get(i).copied())
    }

    /// The last `n` values.
    pub fn tail(&self, n: usize) -> &[f64] {
        &self.values[self.values.len().saturating_sub(n)..]
    }
}

// ---------------------------------------------------------------------------
// CSV plumbing

pub const OBSERVATION_COLUMNS: [&str; 6] = [
    "location_id",
    "latitude",
    "longitude",
    "date",
    "water_source",
    "larvae_count",
];
pub const STATION_COLUMNS: [&str; 10] = [
    "station_id",
    "latitude",
    "longitude",
    "month",
    "tmean_c",
    "tmax_c",
    "tmin_c",
    "precip_days",
    "precip_mm",
    "elevation_m",
];
pub const SERIES_COLUMNS: [&str; 4] = ["region_id", "variable", "year", "value"];
pub const FEATURE_COLUMNS: [&str; 9] = [
    "location_id",
    "date",
    "tmean_c",
    "tmax_c",
    "tmin_c",
    "precip_days",
    "precip_mm",
    "elevation_m",
    "larvae_count",
];

/// Header-checked CSV table that parses fields by column name with
/// line-numbered errors.
pub(crate) struct Table {
    source: String,
    columns: HashMap<String, usize>,
    records: Vec<(u64, csv::StringRecord)>,
}

pub(crate) struct Row<'a> {
    table: &'a Table,
    line: u64,
    record: &'a csv::StringRecord,
}

impl Table {
    pub(crate) fn read<R: Read>(reader: R, source: &str, required: &[&str]) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let csv_err = |e: csv::Error| {
            let line = e.position().map_or(0, |p| p.line());
            Error::Parse {
                source_name: source.to_string(),
                line,
                field: String::new(),
                message: e.to_string(),
            }
        };
        let headers = rdr.headers().map_err(csv_err)?.clone();
        let columns: HashMap<String, usize> = headers
            .iter()
            .enumerate()
            .map(|(i, h)| (h.trim_start_matches('\u{feff}').to_string(), i))
            .collect();
        if let Some(missing) = required.iter().find(|c| !columns.contains_key(**c)) {
            return Err(Error::Parse {
                source_name: source.to_string(),
                line: 1,
                field: missing.to_string(),
                message: "missing column".into(),
            });
        }
        let mut records = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(csv_err)?;
            let line = rec.position().map_or(0, |p| p.line());
            records.push((line, rec));
        }
        Ok(Self {
            source: source.to_string(),
            columns,
            records,
        })
    }

    pub(crate) fn rows(&self) -> impl Iterator<Item = Row<'_>> {
        self.records.iter().map(move |(line, record)| Row {
            table: self,
            line: *line,
            record,
        })
    }
}

impl Row<'_> {
    pub(crate) fn error(&self, field: &str, message: impl Into<String>) -> Error {
        Error::Parse {
            source_name: self.table.source.clone(),
            line: self.line,
            field: field.to_string(),
            message: message.into(),
        }
    }

    pub(crate) fn str(&self, field: &str) -> Result<&str> {
        let idx = self.table.columns[field];
        self.record
            .get(idx)
            .ok_or_else(|| self.error(field, "missing value"))
    }

    pub(crate) fn parse<T: FromStr>(&self, field: &str) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        let raw = self.str(field)?;
        raw.parse::<T>()
            .map_err(|e| self.error(field, format!("cannot parse `{raw}`: {e}")))
    }

    pub(crate) fn finite(&self, field: &str) -> Result<f64> {
        let v: f64 = self.parse(field)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.error(field, format!("value {v} is not finite")))
        }
    }

    fn date(&self, field: &str) -> Result<NaiveDate> {
        let raw = self.str(field)?;
        NaiveDate::parse_from_str(raw, "%Y-%m-%d")
            .map_err(|e| self.error(field, format!("`{raw}` is not an ISO-8601 date: {e}")))
    }

    fn position(&self) -> Result<LatLon> {
        let lat = self.finite("latitude")?;
        check_lat(lat).map_err(|m| self.error("latitude", m))?;
        let lon = self.finite("longitude")?;
        check_lon(lon).map_err(|m| self.error("longitude", m))?;
        Ok(LatLon { lat, lon })
    }
}

pub fn read_observations<R: Read>(reader: R, source: &str) -> Result<Vec<LarvaeObservation>> {
    let table = Table::read(reader, source, &OBSERVATION_COLUMNS)?;
    table
        .rows()
        .map(|row| {
            Ok(LarvaeObservation {
                location_id: row.str("location_id")?.to_string(),
                position: row.position()?,
                date: row.date("date")?,
                water_source: row.parse("water_source")?,
                larvae_count: row.parse("larvae_count")?,
            })
        })
        .collect()
}

pub fn read_stations<R: Read>(reader: R, source: &str) -> Result<Vec<StationRecord>> {
    let table = Table::read(reader, source, &STATION_COLUMNS)?;
    table
        .rows()
        .map(|row| {
            let rec = StationRecord {
                station_id: row.str("station_id")?.to_string(),
                position: row.position()?,
                month: row.parse("month")?,
                tmean_c: row.finite("tmean_c")?,
                tmax_c: row.finite("tmax_c")?,
                tmin_c: row.finite("tmin_c")?,
                precip_days: row.finite("precip_days")?,
                precip_mm: row.finite("precip_mm")?,
                elevation_m: row.finite("elevation_m")?,
            };
            check_temperatures(rec.tmin_c, rec.tmean_c, rec.tmax_c).map_err(|m| row.error("tmean_c", m))?;
            check_precip_days(rec.precip_days).map_err(|m| row.error("precip_days", m))?;
            if rec.precip_mm < 0.0 {
                return Err(row.error("precip_mm", "negative precipitation"));
            }
            Ok(rec)
        })
        .collect()
}

/// Reads `region_id,variable,year,value` rows into one series per
/// (region, variable), ordered by region then variable. Derived variables
/// (`precip_days`) are accepted only when `allow_derived` is set.
pub fn read_series<R: Read>(reader: R, source: &str, allow_derived: bool) -> Result<Vec<RegionSeries>> {
    let table = Table::read(reader, source, &SERIES_COLUMNS)?;
    let mut grouped: BTreeMap<(String, VariableKind), Vec<(i32, f64, u64)>> = BTreeMap::new();
    for row in table.rows() {
        let region = row.str("region_id")?.to_string();
        let variable: VariableKind = row.parse("variable")?;
        if !allow_derived && !VariableKind::HISTORICAL.contains(&variable) {
            return Err(row.error("variable", format!("`{variable}` is not a historical series variable")));
        }
        let year: i32 = row.parse("year")?;
        let value = row.finite("value")?;
        grouped.entry((region, variable)).or_default().push((year, value, row.line));
    }
    grouped
        .into_iter()
        .map(|((region, variable), mut points)| {
            points.sort_by_key(|p| p.0);
            for pair in points.windows(2) {
                if pair[1].0 != pair[0].0 + 1 {
                    return Err(Error::Parse {
                        source_name: source.to_string(),
                        line: pair[1].2,
                        field: "year".into(),
                        message: format!(
                            "series {region}/{variable} is not consecutive: year {} follows {}",
                            pair[1].0, pair[0].0
                        ),
                    });
                }
            }
            let start = points[0].0;
            RegionSeries::new(region, variable, start, points.into_iter().map(|p| p.1).collect())
        })
        .collect()
}

pub fn read_features<R: Read>(reader: R, source: &str) -> Result<Vec<FeatureRow>> {
    let table = Table::read(reader, source, &FEATURE_COLUMNS)?;
    table
        .rows()
        .map(|row| {
            let rec = FeatureRow {
                location_id: row.str("location_id")?.to_string(),
                date: row.date("date")?,
                tmean_c: row.finite("tmean_c")?,
                tmax_c: row.finite("tmax_c")?,
                tmin_c: row.finite("tmin_c")?,
                precip_days: row.finite("precip_days")?,
                precip_mm: row.finite("precip_mm")?,
                elevation_m: row.finite("elevation_m")?,
                larvae_count: row.parse("larvae_count")?,
            };
            check_temperatures(rec.tmin_c, rec.tmean_c, rec.tmax_c).map_err(|m| row.error("tmean_c", m))?;
            Ok(rec)
        })
        .collect()
}

pub const REGION_COLUMNS: [&str; 2] = ["region_id", "elevation_m"];

/// Reads `region_id,elevation_m` rows; region ids must be unique.
pub fn read_regions<R: Read>(reader: R, source: &str) -> Result<BTreeMap<String, f64>> {
    let table = Table::read(reader, source, &REGION_COLUMNS)?;
    let mut out = BTreeMap::new();
    for row in table.rows() {
        let id = row.str("region_id")?.to_string();
        let elevation = row.finite("elevation_m")?;
        if out.insert(id.clone(), elevation).is_some() {
            return Err(row.error("region_id", format!("region `{id}` appears twice")));
        }
    }
    Ok(out)
}

pub fn parse_regions(path: &Path) -> Result<BTreeMap<String, f64>> {
    read_regions(open(path)?, &path.display().to_string())
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

pub fn parse_observations(path: &Path) -> Result<Vec<LarvaeObservation>> {
    read_observations(open(path)?, &path.display().to_string())
}

pub fn parse_stations(path: &Path) -> Result<Vec<StationRecord>> {
    read_stations(open(path)?, &path.display().to_string())
}

pub fn parse_series(path: &Path) -> Result<Vec<RegionSeries>> {
    read_series(open(path)?, &path.display().to_string(), false)
}

pub fn parse_features(path: &Path) -> Result<Vec<FeatureRow>> {
    read_features(open(path)?, &path.display().to_string())
}

pub fn write_features<W: Write>(writer: W, rows: &[FeatureRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let to_err = |e: csv::Error| Error::data(format!("writing features: {e}"));
    w.write_record(FEATURE_COLUMNS).map_err(to_err)?;
    for r in rows {
        w.write_record([
            r.location_id.clone(),
            r.date.format("%Y-%m-%d").to_string(),
            r.tmean_c.to_string(),
            r.tmax_c.to_string(),
            r.tmin_c.to_string(),
            r.precip_days.to_string(),
            r.precip_mm.to_string(),
            r.elevation_m.to_string(),
            r.larvae_count.to_string(),
        ])
        .map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::data(format!("writing features: {e}")))
}

/// Writes series as `region_id,variable,year,value`, one row per year.
pub fn write_series<W: Write>(writer: W, series: &[RegionSeries]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let to_err = |e: csv::Error| Error::data(format!("writing series: {e}"));
    w.write_record(SERIES_COLUMNS).map_err(to_err)?;
    for s in series {
        for (year, value) in s.years().zip(s.values()) {
            w.write_record([
                s.region_id().to_string(),
                s.variable().to_string(),
                year.to_string(),
                value.to_string(),
            ])
            .map_err(to_err)?;
        }
    }
    w.flush().map_err(|e| Error::data(format!("writing series: {e}")))
}

// ---------------------------------------------------------------------------
// Cleaning rules

/// Removes artificial-container observations, keeping the order of the rest.
/// Returns the survivors and the number removed.
pub fn filter_container_sources(obs: Vec<LarvaeObservation>) -> (Vec<LarvaeObservation>, usize) {
    let before = obs.len();
    let kept: Vec<_> = obs
        .into_iter()
        .filter(|o| o.water_source != WaterSource::Container)
        .collect();
    let removed = before - kept.len();
    (kept, removed)
}

/// Collapses observations sharing (location, date) into one whose count is
/// the group sum; the first row of each group supplies the other fields.
/// Output is sorted by location then date. Returns the merged rows and the
/// number of rows absorbed.
pub fn merge_duplicates(obs: Vec<LarvaeObservation>) -> (Vec<LarvaeObservation>, usize) {
    let before = obs.len();
    let mut groups: BTreeMap<(String, NaiveDate), LarvaeObservation> = BTreeMap::new();
    for o in obs {
        groups
            .entry((o.location_id.clone(), o.date))
            .and_modify(|g| g.larvae_count += o.larvae_count)
            .or_insert(o);
    }
    let merged: Vec<_> = groups.into_values().collect();
    let absorbed = before - merged.len();
    (merged, absorbed)
}

/// Great-circle distance on a sphere of radius 6371 km.
pub fn haversine_km(a: LatLon, b: LatLon) -> Result<f64> {
    LatLon::new(a.lat, a.lon)?;
    LatLon::new(b.lat, b.lon)?;
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let d_phi = (b.lat - a.lat).to_radians();
    let d_lambda = (b.lon - a.lon).to_radians();
    let h = (d_phi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (d_lambda / 2.0).sin().powi(2);
    Ok(2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin())
}

#[derive(Debug, Clone, PartialEq)]
pub struct JoinOutcome {
    pub rows: Vec<FeatureRow>,
    /// Location/date of every observation with no station in range.
    pub excluded: Vec<(String, NaiveDate)>,
}

/// Joins each observation to the nearest station reporting the same calendar
/// month within `max_km`. Distance ties go to the lexicographically smaller
/// station id, so the result does not depend on input order.
pub fn join_nearest_station(
    obs: &[LarvaeObservation],
    stations: &[StationRecord],
    max_km: f64,
) -> Result<JoinOutcome> {
    if !(max_km > 0.0) {
        return Err(Error::config(format!("proximity radius {max_km} km must be positive")));
    }
    let mut by_month: HashMap<YearMonth, Vec<&StationRecord>> = HashMap::new();
    for s in stations {
        by_month.entry(s.month).or_default().push(s);
    }
    let mut rows = Vec::new();
    let mut excluded = Vec::new();
    for o in obs {
        let month = YearMonth::of(o.date);
        let mut best: Option<(f64, &StationRecord)> = None;
        for &s in by_month.get(&month).map(Vec::as_slice).unwrap_or_default() {
            let d = haversine_km(o.position, s.position)?;
            if d > max_km {
                continue;
            }
            let better = match best {
                None => true,
                Some((bd, bs)) => d < bd || (d == bd && s.station_id < bs.station_id),
            };
            if better {
                best = Some((d, s));
            }
        }
        match best {
            Some((_, s)) => rows.push(FeatureRow {
                location_id: o.location_id.clone(),
                date: o.date,
                tmean_c: s.tmean_c,
                tmax_c: s.tmax_c,
                tmin_c: s.tmin_c,
                precip_days: s.precip_days,
                precip_mm: s.precip_mm,
                elevation_m: s.elevation_m,
                larvae_count: o.larvae_count,
            }),
            None => excluded.push((o.location_id.clone(), o.date)),
        }
    }
    Ok(JoinOutcome { rows, excluded })
}

/// Per-rule accounting of one cleaning run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct IngestionReport {
    pub input_rows: usize,
    pub container: usize,
    pub merged: usize,
    pub proximity: usize,
    pub retained: usize,
}

impl IngestionReport {
    /// True when every input row is either retained or attributed to one rule.
    pub fn reconciles(&self) -> bool {
        self.retained + self.container + self.merged + self.proximity == self.input_rows
    }
}

/// Container filter → duplicate merge → station join.
pub fn clean_and_join(
    obs: Vec<LarvaeObservation>,
    stations: &[StationRecord],
    max_km: f64,
) -> Result<(Vec<FeatureRow>, IngestionReport)> {
    let input_rows = obs.len();
    let (obs, container) = filter_container_sources(obs);
    let (obs, merged) = merge_duplicates(obs);
    let joined = join_nearest_station(&obs, stations, max_km)?;
    let report = IngestionReport {
        input_rows,
        container,
        merged,
        proximity: joined.excluded.len(),
        retained: joined.rows.len(),
    };
    Ok((joined.rows, report))
}

fn summer_window(year: i32) -> (NaiveDate, NaiveDate) {
    (
        NaiveDate::from_ymd_opt(year, 6, 22).expect("valid date"),
        NaiveDate::from_ymd_opt(year, 9, 22).expect("valid date"),
    )
}

/// Mean of the values dated June 22 – September 22 (inclusive) of `year`.
pub fn summer_average(values: &[(NaiveDate, f64)], year: i32) -> Result<f64> {
    let (start, end) = summer_window(year);
    let (sum, n) = values
        .iter()
        .filter(|(d, _)| (start..=end).contains(d))
        .fold((0.0, 0usize), |(s, n), (_, v)| (s + v, n + 1));
    if n == 0 {
        return Err(Error::data(format!(
            "no values between {start} and {end} for summer {year}"
        )));
    }
    Ok(sum / n as f64)
}

#[cfg(test)]
mod tests;
