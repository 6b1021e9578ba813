//! Pearson correlation, its significance under Student's t, and residual
//! sign accounting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tail {
    /// Upper tail: evidence for a positive correlation.
    One,
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub r: f64,
    pub n: usize,
    pub t_stat: f64,
    pub p_value: f64,
    pub tail: Tail,
}

impl CorrelationReport {
    pub fn compute(x: &[f64], y: &[f64], tail: Tail) -> Result<Self> {
        let r = pearson_r(x, y)?;
        let n = x.len();
        Ok(Self {
            r,
            n,
            t_stat: t_statistic(r, n),
            p_value: correlation_p_value(r, n, tail)?,
            tail,
        })
    }
}

/// Counts and extremes of `truth - prediction`. Positive residuals are
/// underestimates, negative residuals overestimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualSummary {
    pub n_positive: usize,
    pub n_negative: usize,
    pub n_zero: usize,
    /// Largest positive residual, 0 when there is none.
    pub max_positive: f64,
    /// Most negative residual, 0 when there is none.
    pub max_negative: f64,
}

pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::shape(format!("pearson_r: lengths {} and {}", x.len(), y.len())));
    }
    if x.len() < 3 {
        return Err(Error::domain(format!("pearson_r needs at least 3 pairs, got {}", x.len())));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("correlation with a constant sequence".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// `r·sqrt((n-2)/(1-r²))`; infinite for |r| = 1.
pub fn t_statistic(r: f64, n: usize) -> f64 {
    if r.abs() >= 1.0 {
        return f64::INFINITY.copysign(r);
    }
    r * ((n as f64 - 2.0) / (1.0 - r * r)).sqrt()
}

/// p-value of a sample correlation `r` over `n` pairs, from Student's t with
/// `n - 2` degrees of freedom.
pub fn correlation_p_value(r: f64, n: usize, tail: Tail) -> Result<f64> {
    if n < 3 {
        return Err(Error::domain(format!("p-value needs n >= 3, got {n}")));
    }
    if !(-1.0..=1.0).contains(&r) {
        return Err(Error::domain(format!("correlation {r} outside [-1, 1]")));
    }
    if r.abs() == 1.0 {
        return Ok(0.0);
    }
    let t = t_statistic(r, n);
    let two_tailed = student_t_two_tailed(t, (n - 2) as f64);
    Ok(match tail {
        Tail::Two => two_tailed,
        Tail::One if r > 0.0 => 0.5 * two_tailed,
        Tail::One => 1.0 - 0.5 * two_tailed,
    })
}

/// `P(|T| >= |t|)` for Student's t with `dof` degrees of freedom.
pub fn student_t_two_tailed(t: f64, dof: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    inc_beta(dof / (dof + t * t), dof / 2.0, 0.5)
}

pub fn residual_summary(pred: &[f64], truth: &[f64]) -> Result<ResidualSummary> {
    if pred.len() != truth.len() {
        return Err(Error::shape(format!(
            "residual_summary: {} predictions vs {} labels",
            pred.len(),
            truth.len()
        )));
    }
    let mut s = ResidualSummary {
        n_positive: 0,
        n_negative: 0,
        n_zero: 0,
        max_positive: 0.0,
        max_negative: 0.0,
    };
    for (p, t) in pred.iter().zip(truth) {
        let res = t - p;
        if res > 0.0 {
            s.n_positive += 1;
            s.max_positive = s.max_positive.max(res);
        } else if res < 0.0 {
            s.n_negative += 1;
            s.max_negative = s.max_negative.min(res);
        } else {
            s.n_zero += 1;
        }
    }
    Ok(s)
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function (Lanczos approximation, x > 0).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

const CF_TOLERANCE: f64 = 1e-12;
const CF_MAX_ITER: usize = 500;

/// Regularized incomplete beta `I_x(a, b)` via its continued fraction
/// (modified Lentz), using the symmetry `I_x(a,b) = 1 - I_{1-x}(b,a)` where
/// the direct expansion converges slowly.
pub fn inc_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_cf(x, a, b) / a
    } else {
        1.0 - ln_front.exp() * beta_cf(1.0 - x, b, a) / b
    }
}

fn beta_cf(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let guard = |v: f64| if v.abs() < TINY { TINY } else { v };
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 / guard(1.0 - qab * x / qap);
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 / guard(1.0 + aa * d);
        c = guard(1.0 + aa / c);
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 / guard(1.0 + aa * d);
        c = guard(1.0 + aa / c);
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_TOLERANCE {
            break;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn pearson_examples() {
        assert!((pearson_r(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson_r(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
        // dx = [-1.5, -0.5, 0.5, 1.5], dy = [-0.5, -1.5, 1.5, 0.5]: sxy = 3, sxx = syy = 5.
        assert!((pearson_r(&[1.0, 2.0, 3.0, 4.0], &[2.0, 1.0, 4.0, 3.0]).unwrap() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn pearson_errors() {
        assert!(matches!(pearson_r(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(Error::Degenerate(_))));
        assert!(matches!(pearson_r(&[1.0, 2.0], &[1.0, 2.0, 3.0]), Err(Error::Shape(_))));
        assert!(pearson_r(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn p_value_basics() {
        assert_eq!(correlation_p_value(0.0, 10, Tail::One).unwrap(), 0.5);
        assert_eq!(correlation_p_value(0.0, 10, Tail::Two).unwrap(), 1.0);
        assert_eq!(correlation_p_value(1.0, 10, Tail::One).unwrap(), 0.0);
        assert_eq!(correlation_p_value(-1.0, 10, Tail::Two).unwrap(), 0.0);
        assert!(matches!(correlation_p_value(0.5, 2, Tail::One), Err(Error::Domain(_))));
    }

    #[test]
    fn validation_split_significance() {
        // Reference value from scipy.stats.t.sf(3.22038674267284, 33).
        let p = correlation_p_value(0.489, 35, Tail::One).unwrap();
        assert!((p - 1.436_994_920_072_145e-3).abs() < 1e-12, "{p}");
        assert!((p - 1.44e-3).abs() / 1.44e-3 < 0.05);
    }

    #[test]
    fn training_split_significance() {
        let p = correlation_p_value(0.888, 131, Tail::One).unwrap();
        assert!((p.log10() + 44.9).abs() < 1.0, "{p}");
        assert!((p / 1.180_774_119_559_472e-45 - 1.0).abs() < 1e-8, "{p}");
    }

    #[test]
    fn ln_gamma_known_values() {
        assert!(ln_gamma(1.0).abs() < 1e-14);
        assert!(ln_gamma(2.0).abs() < 1e-14);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
        assert!((ln_gamma(10.0) - 362_880f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn inc_beta_closed_forms() {
        // I_x(1, 1) = x; I_x(a, 1) = x^a.
        for x in [0.1, 0.5, 0.93] {
            assert!((inc_beta(x, 1.0, 1.0) - x).abs() < 1e-14);
            assert!((inc_beta(x, 3.0, 1.0) - x.powi(3)).abs() < 1e-14);
        }
        assert_eq!(inc_beta(0.0, 2.0, 3.0), 0.0);
        assert_eq!(inc_beta(1.0, 2.0, 3.0), 1.0);
    }

    #[test]
    fn residual_examples() {
        let s = residual_summary(&[1.0, 5.0], &[3.0, 2.0]).unwrap();
        assert_eq!((s.n_positive, s.n_negative, s.n_zero), (1, 1, 0));
        let s = residual_summary(&[4.0, 2.0], &[4.0, 2.0]).unwrap();
        assert_eq!(s.n_zero, 2);
        let s = residual_summary(&[0.0, 0.0, 0.0], &[1.0, 2.0, -1.0]).unwrap();
        assert_eq!((s.n_positive, s.n_negative), (2, 1));
        assert_eq!(s.max_positive, 2.0);
        assert_eq!(s.max_negative, -1.0);
        assert!(matches!(residual_summary(&[1.0], &[]), Err(Error::Shape(_))));
    }

    #[test]
    fn report_carries_consistent_t() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let y = [1.3, 1.9, 3.4, 3.8, 5.5, 5.9];
        let rep = CorrelationReport::compute(&x, &y, Tail::One).unwrap();
        let expected = rep.r * ((rep.n as f64 - 2.0) / (1.0 - rep.r * rep.r)).sqrt();
        assert!((rep.t_stat - expected).abs() < 1e-12);
        assert_eq!(rep.n, 6);
    }

    proptest! {
        #[test]
        fn pearson_affine_invariance(
            x in proptest::collection::vec(-100f64..100.0, 3..40),
            noise in proptest::collection::vec(-10f64..10.0, 40),
            a in 0.1f64..10.0, b in -50f64..50.0,
        ) {
            let y: Vec<f64> = x.iter().zip(&noise).map(|(v, e)| 0.5 * v + e).collect();
            let r = match pearson_r(&x, &y) { Ok(r) => r, Err(_) => return Ok(()) };
            let xs: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            prop_assert!((pearson_r(&xs, &y).unwrap() - r).abs() < 1e-10);
        }

        #[test]
        fn two_tailed_is_twice_one_tailed(r in 0.001f64..0.999, n in 3usize..500) {
            let one = correlation_p_value(r, n, Tail::One).unwrap();
            let two = correlation_p_value(r, n, Tail::Two).unwrap();
            prop_assert!((two - 2.0 * one).abs() < 1e-12);
        }

        #[test]
        fn p_value_monotone(r in 0.01f64..0.95, dr in 0.001f64..0.04, n in 5usize..300) {
            let p = correlation_p_value(r, n, Tail::One).unwrap();
            prop_assert!(correlation_p_value(r + dr, n, Tail::One).unwrap() <= p);
            prop_assert!(correlation_p_value(r, n + 1, Tail::One).unwrap() <= p);
        }
    }
}
