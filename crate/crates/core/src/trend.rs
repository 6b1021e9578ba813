//! Auxiliary closed-form models: the damped periodic trend curve, the
//! mean-to-extreme temperature offsets and the days-of-precipitation line.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{nelder_mead, NelderMeadConfig};

/// Parameters of `T(t) = λt − e^{−αt}·sin(θt)·γ·t^β + φ`, with `t` in years
/// since the first year of the series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendParams {
    pub lambda: f64,
    pub alpha: f64,
    pub theta: f64,
    pub gamma: f64,
    pub beta: f64,
    pub phi: f64,
}

impl TrendParams {
    /// Typical values for summer temperature and precipitation series.
    /// `alpha` is negative, so the oscillation envelope grows with time.
    pub fn approximate(phi: f64) -> Self {
        Self {
            lambda: 0.01,
            alpha: -0.01,
            theta: 0.6,
            gamma: 0.5,
            beta: 0.03,
            phi,
        }
    }

    fn to_vec(self) -> [f64; 6] {
        [self.lambda, self.alpha, self.theta, self.gamma, self.beta, self.phi]
    }

    fn from_slice(p: &[f64]) -> Self {
        Self {
            lambda: p[0],
            alpha: p[1],
            theta: p[2],
            gamma: p[3],
            beta: p[4],
            phi: p[5],
        }
    }
}

fn trend_at(p: &TrendParams, t: f64) -> f64 {
    if t == 0.0 {
        // sin(0) annihilates the oscillation whatever t^β is.
        return p.phi;
    }
    p.lambda * t - (-p.alpha * t).exp() * (p.theta * t).sin() * p.gamma * t.powf(p.beta) + p.phi
}

pub fn eval_trend(params: &TrendParams, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::domain(format!("trend time {t} must be non-negative")));
    }
    Ok(trend_at(params, t))
}

/// Least-squares trend fit by Nelder–Mead from [`TrendParams::approximate`]
/// with `φ` starting at the first value. Returns the parameters and SSE.
pub fn fit_trend(values: &[f64]) -> Result<(TrendParams, f64)> {
    if values.len() < 6 {
        return Err(Error::data(format!(
            "trend fit needs at least 6 values, got {}",
            values.len()
        )));
    }
    let sse = |p: &[f64]| {
        let params = TrendParams::from_slice(p);
        values
            .iter()
            .enumerate()
            .map(|(i, v)| (trend_at(&params, i as f64) - v).powi(2))
            .sum::<f64>()
    };
    let start = TrendParams::approximate(values[0]).to_vec();
    let min = nelder_mead(sse, &start, &NelderMeadConfig::default());
    Ok((TrendParams::from_slice(&min.point), min.value))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extreme {
    Min,
    Max,
}

/// Constant offsets from the mean temperature to the minimum and maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffsetK {
    pub k_min: f64,
    pub k_max: f64,
}

impl OffsetK {
    pub fn new(k_min: f64, k_max: f64) -> Result<Self> {
        for (name, k) in [("k_min", k_min), ("k_max", k_max)] {
            if !(k.is_finite() && k >= 0.0) {
                return Err(Error::data(format!("{name} = {k} must be finite and non-negative")));
            }
        }
        Ok(Self { k_min, k_max })
    }

    pub fn fit(mean: &[f64], min: &[f64], max: &[f64]) -> Result<Self> {
        Self::new(estimate_k(mean, min, Extreme::Min)?, estimate_k(mean, max, Extreme::Max)?)
    }
}

/// The offset minimizing the mean absolute error of `mean ∓ k` against the
/// extreme series: the median of the per-year gaps (midpoint of the two
/// central gaps for even counts).
pub fn estimate_k(mean: &[f64], extreme: &[f64], kind: Extreme) -> Result<f64> {
    if mean.is_empty() || mean.len() != extreme.len() {
        return Err(Error::data(format!(
            "offset estimation needs equal nonempty series, got {} and {}",
            mean.len(),
            extreme.len()
        )));
    }
    let mut gaps: Vec<f64> = mean
        .iter()
        .zip(extreme)
        .map(|(m, e)| match kind {
            Extreme::Min => m - e,
            Extreme::Max => e - m,
        })
        .collect();
    if gaps.iter().any(|g| !g.is_finite()) {
        return Err(Error::data("non-finite temperature in offset estimation"));
    }
    gaps.sort_by(f64::total_cmp);
    let n = gaps.len();
    Ok(if n % 2 == 1 {
        gaps[n / 2]
    } else {
        0.5 * (gaps[n / 2 - 1] + gaps[n / 2])
    })
}

/// Mean absolute error of `mean ∓ k` against `extreme`.
pub fn offset_mae(mean: &[f64], extreme: &[f64], kind: Extreme, k: f64) -> f64 {
    let sum: f64 = mean
        .iter()
        .zip(extreme)
        .map(|(m, e)| {
            let pred = match kind {
                Extreme::Min => m - k,
                Extreme::Max => m + k,
            };
            (pred - e).abs()
        })
        .sum();
    sum / mean.len() as f64
}

/// Element-wise `mean - k_min` and `mean + k_max`.
pub fn derive_min_max(mean: &[f64], k: OffsetK) -> (Vec<f64>, Vec<f64>) {
    (
        mean.iter().map(|m| m - k.k_min).collect(),
        mean.iter().map(|m| m + k.k_max).collect(),
    )
}

pub const MAX_PRECIP_DAYS: f64 = 31.0;

/// Days of precipitation as a line in precipitation amount.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    /// Days per mm.
    pub slope: f64,
    pub intercept: f64,
}

/// Ordinary least squares of `y` on `x`.
pub fn fit_linear(x: &[f64], y: &[f64]) -> Result<LinearModel> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::data(format!(
            "linear fit needs equal lengths >= 2, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    if sxx == 0.0 {
        return Err(Error::Degenerate("linear fit on a constant predictor".into()));
    }
    let slope = sxy / sxx;
    Ok(LinearModel {
        slope,
        intercept: my - slope * mx,
    })
}

impl LinearModel {
    pub fn predict(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

/// Predicted days of precipitation, clamped to `[0, 31]`.
pub fn predict_days(model: &LinearModel, amount_mm: f64) -> Result<f64> {
    if !(amount_mm >= 0.0) {
        return Err(Error::domain(format!("precipitation amount {amount_mm} is negative")));
    }
    Ok(model.predict(amount_mm).clamp(0.0, MAX_PRECIP_DAYS))
}
