//! Independent reference implementations used as test oracles, plus helpers
//! for running the pipeline on the bundled dataset.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use larvae::forecast::DEFAULT_ROUNDS;
use larvae::ingest::{self, RegionSeries};
use larvae::pipeline::{
    self, AbundanceReport, ForecastCmdConfig, ForecastOutcome, PrepareConfig, ProjectConfig, ReportConfig,
    TrainAbundanceConfig, TrainClimateConfig,
};
use larvae::Parameters;
use rand::Rng;

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/synthetic")
}

/// Straight transcription of the recursive forecasting loop. Shares no code
/// with the library: its own mean, spread and rolling logic.
pub fn reference_forecast(f: &dyn Fn(&[f64]) -> Vec<f64>, window: &[f64], l: usize, p: usize, t: usize) -> Vec<f64> {
    fn stats(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let mut total = 0.0;
        for x in v {
            total += x;
        }
        let mu = total / n;
        let mut ss = 0.0;
        for x in v {
            ss += (x - mu) * (x - mu);
        }
        let sigma = (ss / n).sqrt();
        (mu, if sigma < 1e-9 { 1.0 } else { sigma })
    }
    assert_eq!(window.len(), l);
    let mut out = Vec::new();
    let (mut mu, mut sigma) = stats(window);
    let mut x: Vec<f64> = Vec::new();
    for v in window {
        x.push((v - mu) / sigma);
    }
    for _round in 0..t {
        let y_std = f(&x);
        let mut y = Vec::new();
        for v in &y_std {
            y.push(v * sigma + mu);
        }
        let mut x_raw = Vec::new();
        for v in &x {
            x_raw.push(v * sigma + mu);
        }
        for v in &y {
            out.push(*v);
        }
        let mut next = Vec::new();
        for v in &x_raw[p..] {
            next.push(*v);
        }
        for v in &y {
            next.push(*v);
        }
        (mu, sigma) = stats(&next);
        x = Vec::new();
        for v in &next {
            x.push((v - mu) / sigma);
        }
    }
    out
}

/// A random affine map from a length-`l` window to `p` outputs.
pub fn random_linear_mock<R: Rng>(rng: &mut R, l: usize, p: usize) -> impl Fn(&[f64]) -> Vec<f64> {
    let w: Vec<Vec<f64>> = (0..p).map(|_| (0..l).map(|_| rng.gen_range(-0.6..0.6)).collect()).collect();
    let b: Vec<f64> = (0..p).map(|_| rng.gen_range(-0.5..0.5)).collect();
    move |x: &[f64]| {
        w.iter()
            .zip(&b)
            .map(|(row, bias)| row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + bias)
            .collect()
    }
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, eps: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * eps {
        return left + right + delta / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1) + simpson(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1)
}

/// Adaptive Simpson quadrature to absolute tolerance `eps`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, eps: f64) -> f64 {
    let (fa, fb) = (f(a), f(b));
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(f, a, b, fa, fm, fb, whole, eps, 50)
}

/// Two-tailed Student t p-value by integrating the density. Substituting
/// `t = sqrt(nu) tan(theta)` turns the density into `cos(theta)^(nu - 1)` on
/// a finite interval. The tolerance is scaled to the tail mass so that tiny
/// p-values keep their relative accuracy.
pub fn t_two_tailed_quadrature(t: f64, nu: f64, rel_tol: f64) -> f64 {
    let density = move |theta: f64| theta.cos().max(0.0).powf(nu - 1.0);
    let half_pi = std::f64::consts::FRAC_PI_2;
    let lower = (t.abs() / nu.sqrt()).atan();
    let total = adaptive_simpson(&density, 0.0, half_pi, rel_tol);
    let rough = adaptive_simpson(&density, lower, half_pi, 1e-300_f64.max(rel_tol * total));
    let tail = adaptive_simpson(&density, lower, half_pi, (rough * rel_tol).max(1e-320));
    tail / total
}

/// Central finite differences of `loss` with respect to every parameter.
pub fn numeric_gradient<M: Parameters + Clone>(model: &M, loss: impl Fn(&M) -> f64, h: f64) -> Vec<f64> {
    (0..model.param_count())
        .map(|i| {
            let mut plus = model.clone();
            *plus.param_mut(i).unwrap() += h;
            let mut minus = model.clone();
            *minus.param_mut(i).unwrap() -= h;
            (loss(&plus) - loss(&minus)) / (2.0 * h)
        })
        .collect()
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Smallest mean absolute offset error over a uniform grid of `k`.
pub fn grid_min_mae(gaps: &[f64], lo: f64, hi: f64, step: f64) -> f64 {
    let mut best = f64::INFINITY;
    let steps = ((hi - lo) / step).ceil() as usize;
    for i in 0..=steps {
        let k = (lo + i as f64 * step).min(hi);
        let mae = gaps.iter().map(|g| (g - k).abs()).sum::<f64>() / gaps.len() as f64;
        best = best.min(mae);
    }
    best
}

pub struct PipelineRun {
    pub dir: PathBuf,
    pub abundance: AbundanceReport,
    pub forecast: ForecastOutcome,
}

pub const OUTPUT_FILES: [&str; 11] = [
    "features.csv",
    "ingest.json",
    "abundance.json",
    "abundance_report.json",
    "predictions.csv",
    "climate.json",
    "forecast.csv",
    "projections.csv",
    "choropleth.csv",
    "percent_change.csv",
    "regions_projected.geojson",
];

/// Every command in order on the files in `data`, writing into `out`.
pub fn run_pipeline(data: &Path, out: &Path, seed: u64) -> larvae::Result<PipelineRun> {
    let o = |name: &str| out.join(name);
    let d = |name: &str| data.join(name);
    pipeline::cmd_prepare(&PrepareConfig {
        report_out: Some(o("ingest.json")),
        ..PrepareConfig::new(d("observations.csv"), d("stations.csv"), o("features.csv"))
    })?;
    let abundance = pipeline::cmd_train_abundance(&TrainAbundanceConfig {
        report_out: Some(o("abundance_report.json")),
        predictions_out: Some(o("predictions.csv")),
        ..TrainAbundanceConfig::new(o("features.csv"), o("abundance.json"), seed)
    })?;
    pipeline::cmd_train_climate(&TrainClimateConfig::new(
        d("series.csv"),
        o("features.csv"),
        o("climate.json"),
        seed,
    ))?;
    let forecast = pipeline::cmd_forecast(&ForecastCmdConfig {
        rounds: DEFAULT_ROUNDS,
        ..ForecastCmdConfig::new(d("series.csv"), o("climate.json"), o("forecast.csv"))
    })?;
    pipeline::cmd_project(&ProjectConfig::new(
        o("forecast.csv"),
        o("abundance.json"),
        d("regions.csv"),
        o("projections.csv"),
    ))?;
    pipeline::cmd_report(&ReportConfig {
        geometry: Some(d("regions.geojson")),
        geometry_out: Some(o("regions_projected.geojson")),
        ..ReportConfig::new(o("projections.csv"), o("choropleth.csv"), o("percent_change.csv"))
    })?;
    Ok(PipelineRun {
        dir: out.to_path_buf(),
        abundance,
        forecast,
    })
}

/// The forecast CSV of a pipeline run, derived variables included.
pub fn read_forecast(dir: &Path) -> larvae::Result<Vec<RegionSeries>> {
    let path = dir.join("forecast.csv");
    let bytes = fs::read(&path).expect("forecast.csv is readable");
    ingest::read_series(bytes.as_slice(), &path.display().to_string(), true)
}

/// Output files of `a` that differ in bytes from those of `b`.
pub fn differing_outputs(a: &Path, b: &Path) -> Vec<&'static str> {
    OUTPUT_FILES
        .iter()
        .copied()
        .filter(|name| fs::read(a.join(name)).ok() != fs::read(b.join(name)).ok())
        .collect()
}
