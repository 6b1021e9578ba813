//! Recursive block forecasting with per-round re-standardization.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::{RegionSeries, VariableKind};
use crate::lstm::{LstmModel, HORIZON, LOOKBACK};
use crate::preprocess::{guard_sigma, mean_and_std, SIGMA_FLOOR};

/// Number of rounds that carries a 2021 series past 2050 with 10-year blocks.
pub const DEFAULT_ROUNDS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ForecastConfig {
    pub lookback: usize,
    pub horizon: usize,
    pub rounds: usize,
    pub sigma_floor: f64,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        Self {
            lookback: LOOKBACK,
            horizon: HORIZON,
            rounds: DEFAULT_ROUNDS,
            sigma_floor: SIGMA_FLOOR,
        }
    }
}

impl ForecastConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lookback == 0 || self.horizon == 0 || self.rounds == 0 {
            return Err(Error::config(format!(
                "lookback, horizon and rounds must be positive (got {}, {}, {})",
                self.lookback, self.horizon, self.rounds
            )));
        }
        if self.horizon > self.lookback {
            return Err(Error::config(format!(
                "horizon {} exceeds lookback {}",
                self.horizon, self.lookback
            )));
        }
        if !(self.sigma_floor > 0.0) {
            return Err(Error::config("sigma_floor must be positive"));
        }
        Ok(())
    }

    /// Total number of forecast values per window.
    pub fn output_len(&self) -> usize {
        self.horizon * self.rounds
    }

    /// Smallest round count whose forecast reaches `target_year`.
    pub fn rounds_to_reach(last_observed: i32, target_year: i32, horizon: usize) -> Result<usize> {
        if target_year <= last_observed {
            return Err(Error::config(format!(
                "target year {target_year} is not after the last observed year {last_observed}"
            )));
        }
        if horizon == 0 {
            return Err(Error::config("horizon must be positive"));
        }
        let ahead = (target_year - last_observed) as usize;
        Ok(ahead.div_ceil(horizon))
    }
}

/// Maps a standardized window to a standardized block of predictions.
pub trait BlockPredictor {
    fn predict_block(&self, window: &[f64]) -> Result<Vec<f64>>;
}

impl BlockPredictor for LstmModel {
    fn predict_block(&self, window: &[f64]) -> Result<Vec<f64>> {
        self.predict(window)
    }
}

impl<F> BlockPredictor for F
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    fn predict_block(&self, window: &[f64]) -> Result<Vec<f64>> {
        Ok(self(window))
    }
}

/// The last `lookback` observed values of one regional series.
#[derive(Debug, Clone, PartialEq)]
pub struct InputWindow {
    pub region_id: String,
    pub variable: VariableKind,
    pub last_year: i32,
    pub values: Vec<f64>,
}

impl InputWindow {
    pub fn from_series(series: &RegionSeries, lookback: usize) -> Result<Self> {
        if series.len() < lookback {
            return Err(Error::data(format!(
                "series {}/{} has {} values; forecasting needs the last {lookback}",
                series.region_id(),
                series.variable(),
                series.len()
            )));
        }
        Ok(Self {
            region_id: series.region_id().to_string(),
            variable: series.variable(),
            last_year: series.end_year(),
            values: series.tail(lookback).to_vec(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastResult {
    pub region_id: String,
    pub variable: VariableKind,
    pub start_year: i32,
    pub values: Vec<f64>,
}

impl ForecastResult {
    pub fn years(&self) -> impl Iterator<Item = i32> + '_ {
        (0..self.values.len()).map(move |i| self.start_year + i as i32)
    }

    pub fn value_in(&self, year: i32) -> Option<f64> {
        let i = year.checked_sub(self.start_year)?;
        usize::try_from(i).ok().and_then(|i| self.values.get(i).copied())
    }
}

/// Forecasts one raw window, returning `horizon * rounds` values in raw units.
pub fn forecast_window<P: BlockPredictor + ?Sized>(f: &P, window: &[f64], cfg: &ForecastConfig) -> Result<Vec<f64>> {
    forecast_window_traced(f, window, cfg, |_| {})
}

/// Like [`forecast_window`], reporting the raw rolled window after every round.
pub fn forecast_window_traced<P, T>(f: &P, window: &[f64], cfg: &ForecastConfig, mut trace: T) -> Result<Vec<f64>>
where
    P: BlockPredictor + ?Sized,
    T: FnMut(&[f64]),
{
    cfg.validate()?;
    let (l, p) = (cfg.lookback, cfg.horizon);
    if window.len() != l {
        return Err(Error::shape(format!("input window has {} values, expected {l}", window.len())));
    }

    let (mut mu, sigma) = mean_and_std(window);
    let mut sigma = guard_sigma(sigma, cfg.sigma_floor);
    let mut x: Vec<f64> = window.iter().map(|v| (v - mu) / sigma).collect();
    let mut out = Vec::with_capacity(cfg.output_len());

    for _ in 0..cfg.rounds {
        let mut y = f.predict_block(&x)?;
        if y.len() != p {
            return Err(Error::shape(format!("predictor returned {} values, expected {p}", y.len())));
        }
        for v in y.iter_mut() {
            *v = *v * sigma + mu;
        }
        for v in x.iter_mut() {
            *v = *v * sigma + mu;
        }
        out.extend_from_slice(&y);

        let mut rolled = Vec::with_capacity(l);
        rolled.extend_from_slice(&x[p..]);
        rolled.extend_from_slice(&y);
        trace(&rolled);

        let (m, s) = mean_and_std(&rolled);
        mu = m;
        sigma = guard_sigma(s, cfg.sigma_floor);
        x = rolled.iter().map(|v| (v - mu) / sigma).collect();
    }
    Ok(out)
}

/// Forecasts every window independently; results keep input order.
pub fn forecast<P: BlockPredictor + ?Sized>(
    f: &P,
    windows: &[InputWindow],
    cfg: &ForecastConfig,
) -> Result<Vec<ForecastResult>> {
    windows
        .iter()
        .map(|w| {
            let values = forecast_window(f, &w.values, cfg).map_err(|e| match e {
                Error::Shape(msg) => Error::Shape(format!("{}/{}: {msg}", w.region_id, w.variable)),
                other => other,
            })?;
            Ok(ForecastResult {
                region_id: w.region_id.clone(),
                variable: w.variable,
                start_year: w.last_year + 1,
                values,
            })
        })
        .collect()
}
