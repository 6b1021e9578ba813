//! Log-count transform and z-score scalers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Standard deviations below this are treated as zero spread and replaced by 1.
pub const SIGMA_FLOOR: f64 = 1e-9;

/// Arithmetic mean and population standard deviation.
pub fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Replaces a degenerate spread by 1 so standardization becomes a pure shift.
pub fn guard_sigma(std: f64, floor: f64) -> f64 {
    if std < floor {
        1.0
    } else {
        std
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StandardScaler {
    pub mean: f64,
    pub std: f64,
}

impl StandardScaler {
    pub const IDENTITY: StandardScaler = StandardScaler { mean: 0.0, std: 1.0 };

    pub fn fit(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::data("cannot fit a scaler to an empty sequence"));
        }
        let (mean, std) = mean_and_std(values);
        Ok(Self {
            mean,
            std: guard_sigma(std, SIGMA_FLOOR),
        })
    }

    pub fn apply(&self, v: f64) -> f64 {
        (v - self.mean) / self.std
    }

    pub fn invert(&self, v: f64) -> f64 {
        v * self.std + self.mean
    }

    pub fn apply_all(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|&v| self.apply(v)).collect()
    }

    pub fn invert_all(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|&v| self.invert(v)).collect()
    }
}

pub fn fit_scaler(values: &[f64]) -> Result<StandardScaler> {
    StandardScaler::fit(values)
}

pub fn apply_scaler(scaler: &StandardScaler, values: &[f64]) -> Vec<f64> {
    scaler.apply_all(values)
}

pub fn invert_scaler(scaler: &StandardScaler, values: &[f64]) -> Vec<f64> {
    scaler.invert_all(values)
}

/// One scaler per feature column, remembering how many rows it was fitted on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScalers {
    pub scalers: Vec<StandardScaler>,
    pub fit_rows: usize,
}

impl FeatureScalers {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let width = rows
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::data("cannot fit feature scalers to zero rows"))?;
        if let Some(i) = rows.iter().position(|r| r.len() != width) {
            return Err(Error::shape(format!(
                "row {i} has {} features, expected {width}",
                rows[i].len()
            )));
        }
        let scalers = (0..width)
            .map(|col| {
                let column: Vec<f64> = rows.iter().map(|r| r[col]).collect();
                StandardScaler::fit(&column)
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            scalers,
            fit_rows: rows.len(),
        })
    }

    pub fn transform(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.scalers.len() {
            return Err(Error::shape(format!(
                "row has {} features, scalers expect {}",
                row.len(),
                self.scalers.len()
            )));
        }
        Ok(row.iter().zip(&self.scalers).map(|(&v, s)| s.apply(v)).collect())
    }
}

/// `log10(count + offset)` and its inverse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogCountTransform {
    pub offset: f64,
}

impl Default for LogCountTransform {
    fn default() -> Self {
        Self { offset: 1.0 }
    }
}

impl LogCountTransform {
    pub fn forward(&self, count: f64) -> Result<f64> {
        if !(count >= 0.0) {
            return Err(Error::domain(format!("count {count} is negative")));
        }
        Ok((count + self.offset).log10())
    }

    pub fn inverse(&self, log_value: f64) -> f64 {
        10f64.powf(log_value) - self.offset
    }
}

pub fn log_transform(count: f64) -> Result<f64> {
    LogCountTransform::default().forward(count)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn log_transform_examples() {
        assert_eq!(log_transform(0.0).unwrap(), 0.0);
        assert_eq!(log_transform(99.0).unwrap(), 2.0);
        assert!(matches!(log_transform(-1.0), Err(Error::Domain(_))));
        let t = LogCountTransform::default();
        for x in [0.0, 1.0, 10.0, 1234.0] {
            let back = t.inverse(t.forward(x).unwrap());
            assert!((back - x).abs() <= 1e-12 * x.max(1.0), "{x} -> {back}");
        }
    }

    #[test]
    fn scaler_examples() {
        let s = fit_scaler(&[2.0, 4.0]).unwrap();
        assert_eq!((s.mean, s.std), (3.0, 1.0));
        assert_eq!(s.apply_all(&[2.0, 4.0]), vec![-1.0, 1.0]);

        let s = fit_scaler(&[7.0, 7.0, 7.0]).unwrap();
        assert_eq!(s.std, 1.0);
        assert_eq!(s.apply_all(&[7.0, 7.0, 7.0]), vec![0.0, 0.0, 0.0]);

        assert!(matches!(fit_scaler(&[]), Err(Error::Data(_))));
    }

    #[test]
    fn identity_scaler() {
        let v = [1.5, -3.0, 1e6];
        assert_eq!(apply_scaler(&StandardScaler::IDENTITY, &v), v.to_vec());
        assert_eq!(invert_scaler(&StandardScaler::IDENTITY, &v), v.to_vec());
    }

    #[test]
    fn invert_of_apply_is_exact_for_simple_values() {
        let s = fit_scaler(&[5.0, 10.0]).unwrap();
        assert_eq!(s.invert_all(&s.apply_all(&[5.0, 10.0])), vec![5.0, 10.0]);
    }

    #[test]
    fn feature_scalers_are_per_column() {
        let rows = vec![vec![1.0, 10.0], vec![3.0, 30.0]];
        let fs = FeatureScalers::fit(&rows).unwrap();
        assert_eq!(fs.fit_rows, 2);
        assert_eq!(fs.transform(&[3.0, 10.0]).unwrap(), vec![1.0, -1.0]);
        assert!(fs.transform(&[1.0]).is_err());
        assert!(FeatureScalers::fit(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    proptest! {
        #[test]
        fn standardized_moments(values in proptest::collection::vec(-1e3f64..1e3, 2..60)) {
            prop_assume!(mean_and_std(&values).1 > 1e-6);
            let s = fit_scaler(&values).unwrap();
            let z = s.apply_all(&values);
            let (m, sd) = mean_and_std(&z);
            prop_assert!(m.abs() < 1e-10);
            prop_assert!((sd - 1.0).abs() < 1e-10);
        }

        #[test]
        fn scaler_round_trip(values in proptest::collection::vec(-1e4f64..1e4, 1..50)) {
            let s = fit_scaler(&values).unwrap();
            let back = s.invert_all(&s.apply_all(&values));
            for (a, b) in values.iter().zip(&back) {
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }

        #[test]
        fn transforms_are_monotone(a in 0f64..1e6, b in 0f64..1e6) {
            prop_assume!(a < b);
            let t = LogCountTransform::default();
            prop_assert!(t.forward(a).unwrap() < t.forward(b).unwrap());
            let s = StandardScaler { mean: 3.0, std: 2.5 };
            prop_assert!(s.apply(a) < s.apply(b));
        }
    }
}
