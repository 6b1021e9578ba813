//! Deterministic synthetic dataset with a planted feature-to-count relationship.
//!
//! Observations sit near weather stations; their counts follow
//! `log10(count + 1) = planted_log_count(features) + N(0, 0.1)`. Regional
//! summer series follow the periodic trend curve plus noise, with minimum and
//! maximum temperatures at fixed per-region offsets from the mean.

use std::fs;
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::ingest::{OBSERVATION_COLUMNS, SERIES_COLUMNS, STATION_COLUMNS};
use crate::trend::{eval_trend, TrendParams};

pub const DEFAULT_SEED: u64 = 2021;
pub const FIRST_SERIES_YEAR: i32 = 1979;
pub const LAST_SERIES_YEAR: i32 = 2021;
pub const COUNT_NOISE_SD: f64 = 0.1;

/// Expected `log10(count + 1)` for the six features.
pub fn planted_log_count(f: &[f64; 6]) -> f64 {
    let [tmean, tmax, tmin, days, precip, elev] = *f;
    1.3 + 0.05 * (tmean - 18.0) + 0.18 * (precip - 3.0) + 0.02 * (days - 9.0) - 0.0003 * (elev - 1200.0)
        + 0.03 * (tmax - tmin - 12.0)
        + 0.02 * (tmean - 18.0) * (precip - 3.0)
}

struct Station {
    id: String,
    lat: f64,
    lon: f64,
    elevation: f64,
    base_t: f64,
    base_p: f64,
}

#[derive(Clone, Copy)]
struct Weather {
    tmean: f64,
    tmax: f64,
    tmin: f64,
    days: f64,
    precip: f64,
}

/// CSV and GeoJSON texts of the bundled dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub observations: String,
    pub stations: String,
    pub series: String,
    pub regions: String,
    pub geojson: String,
}

pub const FILE_NAMES: [&str; 5] = [
    "observations.csv",
    "stations.csv",
    "series.csv",
    "regions.csv",
    "regions.geojson",
];

impl SyntheticDataset {
    pub fn generate(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let stations = make_stations(&mut rng);
        let weather = make_weather(&mut rng, &stations);
        let (stations_csv, observations_csv) = (
            stations_csv(&stations, &weather),
            observations_csv(&mut rng, &stations, &weather),
        );
        let (series, regions, geojson) = regional(&mut rng);
        Self {
            observations: observations_csv,
            stations: stations_csv,
            series,
            regions,
            geojson,
        }
    }

    pub fn files(&self) -> [(&'static str, &str); 5] {
        [
            (FILE_NAMES[0], &self.observations),
            (FILE_NAMES[1], &self.stations),
            (FILE_NAMES[2], &self.series),
            (FILE_NAMES[3], &self.regions),
            (FILE_NAMES[4], &self.geojson),
        ]
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, text) in self.files() {
            let path = dir.join(name);
            fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

const STATION_YEARS: std::ops::RangeInclusive<i32> = 2017..=2021;

fn make_stations(rng: &mut ChaCha8Rng) -> Vec<Station> {
    let sites = [
        (31.0, -97.0, 180.0),
        (33.5, -101.5, 950.0),
        (35.2, -106.6, 1600.0),
        (39.7, -104.9, 1650.0),
        (40.8, -111.9, 1300.0),
        (38.6, -90.2, 150.0),
        (43.6, -116.2, 820.0),
        (36.2, -115.1, 640.0),
        (44.9, -93.2, 260.0),
        (35.1, -89.9, 80.0),
        (41.1, -104.8, 1850.0),
        (29.9, -95.4, 20.0),
    ];
    sites
        .iter()
        .enumerate()
        .map(|(i, &(lat, lon, elevation))| Station {
            id: format!("ST{:02}", i + 1),
            lat,
            lon,
            elevation,
            base_t: 20.0 - 0.4 * (lat - 30.0) - 0.002 * elevation + rng.gen_range(-1.0..1.0),
            base_p: rng.gen_range(1.5..4.5),
        })
        .collect()
}

fn month_key(year: i32, month: u32) -> usize {
    ((year - STATION_YEARS.start()) as usize) * 12 + month as usize - 1
}

fn make_weather(rng: &mut ChaCha8Rng, stations: &[Station]) -> Vec<Vec<Weather>> {
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    stations
        .iter()
        .map(|s| {
            let mut months = Vec::new();
            for _ in STATION_YEARS {
                for month in 1..=12u32 {
                    let season = (2.0 * std::f64::consts::PI * (month as f64 - 4.0) / 12.0).sin();
                    let tmean = s.base_t + 11.0 * season + noise.sample(rng);
                    let spread = 12.0 + 2.0 * noise.sample(rng);
                    let split = rng.gen_range(0.4..0.6);
                    let precip = (s.base_p + 0.8 * season + 0.6 * noise.sample(rng)).max(0.1);
                    let days = (2.0 + 2.4 * precip + noise.sample(rng)).clamp(0.0, 31.0);
                    months.push(Weather {
                        tmean,
                        tmax: tmean + (1.0 - split) * spread.max(2.0),
                        tmin: tmean - split * spread.max(2.0),
                        days,
                        precip,
                    });
                }
            }
            months
        })
        .collect()
}

fn round_to(v: f64, digits: i32) -> f64 {
    let scale = 10f64.powi(digits);
    (v * scale).round() / scale
}

fn rounded(w: Weather) -> Weather {
    Weather {
        tmean: round_to(w.tmean, 2),
        tmax: round_to(w.tmax, 2),
        tmin: round_to(w.tmin, 2),
        days: round_to(w.days, 1),
        precip: round_to(w.precip, 2),
    }
}

fn csv_text<I, R>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for row in rows {
        w.write_record(row).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
}

fn stations_csv(stations: &[Station], weather: &[Vec<Weather>]) -> String {
    let mut rows = Vec::new();
    for (s, months) in stations.iter().zip(weather) {
        for year in STATION_YEARS {
            for month in 1..=12u32 {
                let w = rounded(months[month_key(year, month)]);
                rows.push(vec![
                    s.id.clone(),
                    s.lat.to_string(),
                    s.lon.to_string(),
                    format!("{year:04}-{month:02}"),
                    w.tmean.to_string(),
                    w.tmax.to_string(),
                    w.tmin.to_string(),
                    w.days.to_string(),
                    w.precip.to_string(),
                    s.elevation.to_string(),
                ]);
            }
        }
    }
    csv_text(&STATION_COLUMNS, rows)
}

struct Obs {
    location: String,
    lat: f64,
    lon: f64,
    date: NaiveDate,
    source: &'static str,
    count: u64,
}

fn observations_csv(rng: &mut ChaCha8Rng, stations: &[Station], weather: &[Vec<Weather>]) -> String {
    let noise = Normal::new(0.0, COUNT_NOISE_SD).expect("valid sd");
    let years: Vec<i32> = STATION_YEARS.collect();
    let mut obs = Vec::new();
    for (si, s) in stations.iter().enumerate() {
        for loc in 0..4 {
            let location = format!("L{:02}{}", si + 1, (b'a' + loc) as char);
            let lat = round_to(s.lat + rng.gen_range(-0.2..0.2), 4);
            let lon = round_to(s.lon + rng.gen_range(-0.2..0.2), 4);
            let source = if rng.gen_bool(0.5) { "still" } else { "flowing" };
            let mut dates = Vec::new();
            while dates.len() < 5 {
                let year = *years.choose(rng).expect("years");
                let month = rng.gen_range(4..=10u32);
                let day = rng.gen_range(1..=28u32);
                let d = NaiveDate::from_ymd_opt(year, month, day).expect("valid date");
                if !dates.contains(&d) {
                    dates.push(d);
                }
            }
            for date in dates {
                let w = rounded(weather[si][month_key(date.year(), date.month())]);
                let f = [w.tmean, w.tmax, w.tmin, w.days, w.precip, s.elevation];
                let y = planted_log_count(&f) + noise.sample(rng);
                let count = (10f64.powf(y) - 1.0).round().max(0.0) as u64;
                obs.push(Obs {
                    location: location.clone(),
                    lat,
                    lon,
                    date,
                    source,
                    count,
                });
            }
        }
    }

    // Split some counts across two same-day records; merging restores them.
    let n_clean = obs.len();
    for i in (0..n_clean).step_by(19) {
        let half = obs[i].count / 2;
        let dup = Obs {
            location: obs[i].location.clone(),
            count: obs[i].count - half,
            ..obs[i]
        };
        obs[i].count = half;
        obs.push(dup);
    }

    for i in 0..12 {
        let s = &stations[i % stations.len()];
        obs.push(Obs {
            location: format!("C{:02}", i + 1),
            lat: round_to(s.lat + 0.05, 4),
            lon: round_to(s.lon - 0.05, 4),
            date: NaiveDate::from_ymd_opt(2019, 6 + (i % 3) as u32, 10 + i as u32).expect("valid date"),
            source: "container",
            count: rng.gen_range(0..500),
        });
    }

    let remote = [(47.5, -120.5), (26.0, -81.0), (48.5, -100.5), (32.0, -84.0), (45.0, -70.0), (25.5, -110.0)];
    for (i, &(lat, lon)) in remote.iter().enumerate() {
        obs.push(Obs {
            location: format!("X{:02}", i + 1),
            lat,
            lon,
            date: NaiveDate::from_ymd_opt(2020, 7, 1 + i as u32).expect("valid date"),
            source: "still",
            count: rng.gen_range(0..100),
        });
    }

    obs.shuffle(rng);
    csv_text(
        &OBSERVATION_COLUMNS,
        obs.into_iter().map(|o| {
            vec![
                o.location,
                o.lat.to_string(),
                o.lon.to_string(),
                o.date.format("%Y-%m-%d").to_string(),
                o.source.to_string(),
                o.count.to_string(),
            ]
        }),
    )
}

const REGIONS: [(&str, f64, f64, f64); 6] = [
    // id, elevation, base summer tmean, base summer precip (mm/day)
    ("R01", 1900.0, 17.5, 1.6),
    ("R02", 1350.0, 21.0, 1.2),
    ("R03", 300.0, 26.5, 3.4),
    ("R04", 180.0, 27.5, 3.9),
    ("R05", 250.0, 23.0, 3.2),
    ("R06", 700.0, 24.5, 2.1),
];

fn regional(rng: &mut ChaCha8Rng) -> (String, String, String) {
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let n_years = (LAST_SERIES_YEAR - FIRST_SERIES_YEAR + 1) as usize;
    let mut series_rows = Vec::new();
    let mut features = Vec::new();
    for (ri, &(id, _, base_t, base_p)) in REGIONS.iter().enumerate() {
        let curve = TrendParams {
            lambda: 0.03,
            phi: base_t,
            ..TrendParams::approximate(base_t)
        };
        let k_min = 6.0 + 0.5 * ri as f64;
        let k_max = 7.5 - 0.3 * ri as f64;
        let mut cols: [Vec<f64>; 4] = Default::default();
        for t in 0..n_years {
            let tmean = eval_trend(&curve, t as f64).expect("t >= 0") + 0.25 * noise.sample(rng);
            cols[0].push(tmean);
            cols[1].push(tmean - k_min + 0.3 * noise.sample(rng));
            cols[2].push(tmean + k_max + 0.3 * noise.sample(rng));
            let p = base_p + 0.008 * t as f64 + 0.3 * (0.6 * t as f64).sin() + 0.15 * noise.sample(rng);
            cols[3].push(p.max(0.05));
        }
        for (var, values) in ["summer_tmean", "summer_tmin", "summer_tmax", "summer_precip"].iter().zip(&cols) {
            for (t, v) in values.iter().enumerate() {
                series_rows.push(vec![
                    id.to_string(),
                    var.to_string(),
                    (FIRST_SERIES_YEAR + t as i32).to_string(),
                    round_to(*v, 3).to_string(),
                ]);
            }
        }
        let (x0, y0) = (-110.0 + 4.0 * (ri % 3) as f64, 36.0 + 4.0 * (ri / 3) as f64);
        features.push(serde_json::json!({
            "type": "Feature",
            "properties": { "region_id": id },
            "geometry": {
                "type": "Polygon",
                "coordinates": [[[x0, y0], [x0 + 4.0, y0], [x0 + 4.0, y0 + 4.0], [x0, y0 + 4.0], [x0, y0]]]
            }
        }));
    }
    let regions = csv_text(
        &["region_id", "elevation_m"],
        REGIONS.iter().map(|(id, elev, _, _)| vec![id.to_string(), elev.to_string()]),
    );
    let geo = serde_json::json!({ "type": "FeatureCollection", "features": features });
    let mut geojson = serde_json::to_string_pretty(&geo).expect("static json");
    geojson.push('\n');
    (csv_text(&SERIES_COLUMNS, series_rows), regions, geojson)
}

/// Twelve observations and two stations exercising every cleaning rule once:
/// two container records, one same-day duplicate and one observation with no
/// station in range, leaving eight joined rows.
pub fn prepare_fixture() -> (String, String) {
    let observations = "\
location_id,latitude,longitude,date,water_source,larvae_count
A,35.00,-100.00,2020-06-03,still,12
A,35.00,-100.00,2020-06-17,still,40
B,35.05,-100.05,2020-06-03,flowing,0
B,35.05,-100.05,2020-07-09,flowing,7
C,34.95,-99.90,2020-07-21,still,150
C,34.95,-99.90,2020-07-21,still,50
D,40.00,-105.00,2020-06-11,still,3
D,40.00,-105.00,2020-07-11,flowing,19
E,40.10,-105.10,2020-06-30,still,88
F,35.00,-100.00,2020-06-05,container,300
G,40.00,-105.00,2020-07-02,container,12
H,37.50,-102.50,2020-06-15,still,5
";
    let stations = "\
station_id,latitude,longitude,month,tmean_c,tmax_c,tmin_c,precip_days,precip_mm,elevation_m
S1,35.02,-100.02,2020-06,24.1,31.5,16.2,6,2.1,850
S1,35.02,-100.02,2020-07,26.8,34.0,19.1,5,1.7,850
S2,40.02,-105.02,2020-06,18.3,26.9,9.5,8,2.6,1640
S2,40.02,-105.02,2020-07,21.7,30.2,12.8,10,3.3,1640
";
    (observations.to_string(), stations.to_string())
}

#[cfg(test)]
mod tests;
