//! Sample summaries, Welch's two-sample t-test, and the Student-t CDF behind
//! its p-values.
//!
//! The CDF goes through the regularized incomplete beta function,
//!
//! ```text
//! P(T <= t) = 1 - I_x(df/2, 1/2) / 2,   x = df / (df + t^2),   t >= 0
//! ```
//!
//! with `I_x` from the Lentz continued fraction and `ln B` from Stirling's
//! series (shifted up by recurrence for small arguments).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SIGNIFICANCE: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 when n = 1.
    pub sd: f64,
    pub n: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub t_statistic: f64,
    pub degrees_of_freedom: f64,
    pub p_value: f64,
    pub significant_at_05: bool,
}

pub fn mean_std(sample: &[f64]) -> Result<SampleSummary> {
    if sample.is_empty() {
        return Err(Error::EmptyVector);
    }
    if sample.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let n = sample.len();
    let mean = sample.iter().sum::<f64>() / n as f64;
    let sd = if n == 1 {
        0.0
    } else {
        let ss: f64 = sample.iter().map(|x| (x - mean) * (x - mean)).sum();
        (ss / (n - 1) as f64).sqrt()
    };
    Ok(SampleSummary { mean, sd, n })
}

/// `ln Gamma(x) - (x - 1/2) ln x + x - ln(2 pi) / 2` for `x >= 10`.
fn stirling_delta(x: f64) -> f64 {
    let r = 1.0 / x;
    let r2 = r * r;
    r * (1.0 / 12.0
        - r2 * (1.0 / 360.0
            - r2 * (1.0 / 1260.0
                - r2 * (1.0 / 1680.0
                    - r2 * (1.0 / 1188.0 - r2 * (691.0 / 360360.0 - r2 / 156.0))))))
}

const STIRLING_MIN: f64 = 10.0;

fn ln_gamma(x: f64) -> f64 {
    let mut x = x;
    let mut shift = 0.0;
    while x < STIRLING_MIN {
        shift += x.ln();
        x += 1.0;
    }
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + stirling_delta(x) - shift
}

/// `ln Gamma(a) - ln Gamma(a + b)` for `a >= 10`, without the cancellation of
/// subtracting two huge log-gammas.
fn ln_gamma_ratio(a: f64, b: f64) -> f64 {
    -b * a.ln() - (a + b - 0.5) * (b / a).ln_1p() + b + stirling_delta(a) - stirling_delta(a + b)
}

fn ln_beta(a: f64, b: f64) -> f64 {
    let (small, big) = if a < b { (a, b) } else { (b, a) };
    if big >= STIRLING_MIN {
        ln_gamma(small) + ln_gamma_ratio(big, small)
    } else {
        ln_gamma(small) + ln_gamma(big) - ln_gamma(small + big)
    }
}

/// Continued fraction for `I_x(a, b)`, modified Lentz.
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..100_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`. Takes `x` and `y = 1 - x`
/// separately so callers can supply whichever is known to full precision.
fn inc_beta(a: f64, b: f64, x: f64, y: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if y <= 0.0 {
        return 1.0;
    }
    let ln_x = if x > 0.5 { (-y).ln_1p() } else { x.ln() };
    let ln_y = if y > 0.5 { (-x).ln_1p() } else { y.ln() };
    if x < (a + 1.0) / (a + b + 2.0) {
        let front = (a * ln_x + b * ln_y - ln_beta(a, b)).exp();
        front * beta_cf(a, b, x) / a
    } else {
        let front = (b * ln_y + a * ln_x - ln_beta(b, a)).exp();
        1.0 - front * beta_cf(b, a, y) / b
    }
}

pub fn student_t_cdf(t: f64, df: f64) -> Result<f64> {
    if df.is_nan() || df <= 0.0 {
        return Err(Error::Domain(format!(
            "degrees of freedom must be > 0, got {df}"
        )));
    }
    if t.is_nan() {
        return Err(Error::NonFiniteInput);
    }
    if t == 0.0 {
        return Ok(0.5);
    }
    if t.is_infinite() {
        return Ok(if t > 0.0 { 1.0 } else { 0.0 });
    }
    let t2 = t * t;
    // x = df / (df + t^2), y = t^2 / (df + t^2), each formed without 1 - x
    let (x, y) = if t2 < df {
        let r = t2 / df;
        (1.0 / (1.0 + r), r / (1.0 + r))
    } else {
        let r = df / t2;
        (r / (1.0 + r), 1.0 / (1.0 + r))
    };
    let tail = 0.5 * inc_beta(df / 2.0, 0.5, x, y);
    Ok(if t > 0.0 { 1.0 - tail } else { tail })
}

fn welch_from_moments(
    (mean_a, var_a, n_a): (f64, f64, usize),
    (mean_b, var_b, n_b): (f64, f64, usize),
) -> Result<TestResult> {
    if n_a < 2 || n_b < 2 {
        return Err(Error::TooFewObservations);
    }
    let (sa, sb) = (var_a / n_a as f64, var_b / n_b as f64);
    let se2 = sa + sb;
    if se2 == 0.0 {
        if mean_a != mean_b {
            return Err(Error::DegenerateVariance);
        }
        // no spread and no difference: report the pooled df
        return Ok(TestResult {
            t_statistic: 0.0,
            degrees_of_freedom: (n_a + n_b - 2) as f64,
            p_value: 1.0,
            significant_at_05: false,
        });
    }
    let t = (mean_a - mean_b) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (n_a - 1) as f64 + sb * sb / (n_b - 1) as f64);
    let p = (2.0 * student_t_cdf(-t.abs(), df)?).clamp(0.0, 1.0);
    Ok(TestResult {
        t_statistic: t,
        degrees_of_freedom: df,
        p_value: p,
        significant_at_05: p < SIGNIFICANCE,
    })
}

/// Two-tailed Welch test of `mean(a) = mean(b)`.
pub fn welch_t(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::TooFewObservations);
    }
    let (sa, sb) = (mean_std(a)?, mean_std(b)?);
    t_from_summary(&sa, &sb)
}

/// Welch test from reported means, standard deviations and sizes.
pub fn t_from_summary(a: &SampleSummary, b: &SampleSummary) -> Result<TestResult> {
    for s in [a, b] {
        if !s.mean.is_finite() || !s.sd.is_finite() || s.sd < 0.0 {
            return Err(Error::Domain(format!("invalid summary {s:?}")));
        }
    }
    welch_from_moments((a.mean, a.sd * a.sd, a.n), (b.mean, b.sd * b.sd, b.n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn mean_std_examples() {
        let s = mean_std(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]).unwrap();
        assert_eq!(s.mean, 5.0);
        assert!(close(s.sd, (32.0f64 / 7.0).sqrt(), 1e-15));
        assert!(close(s.sd, 2.1380899, 1e-7));
        assert_eq!(mean_std(&[3.5; 6]).unwrap().sd, 0.0);
        assert_eq!(
            mean_std(&[-2.0]).unwrap(),
            SampleSummary {
                mean: -2.0,
                sd: 0.0,
                n: 1
            }
        );
        assert!(mean_std(&[]).is_err());
    }

    #[test]
    fn ln_gamma_known_values() {
        assert!(close(ln_gamma(1.0), 0.0, 1e-14));
        assert!(close(
            ln_gamma(0.5),
            std::f64::consts::PI.sqrt().ln(),
            1e-14
        ));
        assert!(close(ln_gamma(10.0), 362880f64.ln(), 1e-13));
        assert!(close(ln_gamma(30.0), 71.25703896716801, 1e-12));
        assert!(close(ln_beta(0.5, 0.5), std::f64::consts::PI.ln(), 1e-14));
        // ln B(20, 0.5) both ways
        let direct = ln_gamma(20.0) + ln_gamma(0.5) - ln_gamma(20.5);
        assert!(close(ln_beta(20.0, 0.5), direct, 1e-12));
    }

    #[test]
    fn cdf_examples() {
        for df in [0.5, 1.0, 8.0, 1e6] {
            assert_eq!(student_t_cdf(0.0, df).unwrap(), 0.5);
        }
        assert!(close(student_t_cdf(1.0, 1.0).unwrap(), 0.75, 1e-14));
        // 30-digit quadrature of the density: 0.826703246456332876...
        assert!(close(
            student_t_cdf(1.0, 8.0).unwrap(),
            0.826703246456333,
            1e-13
        ));
        assert!(close(student_t_cdf(1.96, 1e6).unwrap(), 0.9750021, 1e-4));
        assert!(student_t_cdf(1.0, 0.0).is_err());
        assert!(student_t_cdf(1.0, -3.0).is_err());
        assert!(student_t_cdf(f64::NAN, 3.0).is_err());
    }

    #[test]
    fn cauchy_closed_form() {
        for i in -60..=60 {
            let t = i as f64 / 10.0;
            let exact = 0.5 + t.atan() / std::f64::consts::PI;
            assert!(close(student_t_cdf(t, 1.0).unwrap(), exact, 1e-12), "t={t}");
        }
    }

    #[test]
    fn welch_examples() {
        let r = welch_t(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert!(close(r.t_statistic, -1.0, 1e-15));
        assert!(close(r.degrees_of_freedom, 8.0, 1e-12));
        assert!(close(r.p_value, 0.3465935, 1e-6));
        assert!(!r.significant_at_05);

        let same = welch_t(&[0.3, 0.5, 0.9], &[0.3, 0.5, 0.9]).unwrap();
        assert_eq!((same.t_statistic, same.p_value), (0.0, 1.0));

        let err = welch_t(&[1.0], &[1.0, 2.0]).unwrap_err();
        assert_eq!(err.to_string(), "need at least 2 observations");
        assert_eq!(
            welch_t(&[1.0, 1.0], &[2.0, 2.0]).unwrap_err().to_string(),
            "degenerate variance"
        );
        let flat = welch_t(&[1.0, 1.0], &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!((flat.t_statistic, flat.p_value), (0.0, 1.0));
    }

    #[test]
    fn summary_examples() {
        let a = SampleSummary {
            mean: 0.87,
            sd: 0.03,
            n: 5,
        };
        let b = SampleSummary {
            mean: 0.82,
            sd: 0.05,
            n: 5,
        };
        let r = t_from_summary(&a, &b).unwrap();
        assert!(close(r.t_statistic, 1.9174125, 1e-7));
        assert!(close(r.degrees_of_freedom, 4.624e-7 / 7.06e-8, 1e-9));
        assert!(r.p_value > 0.0 && r.p_value < 1.0);
        assert_eq!(r.significant_at_05, r.p_value < 0.05);
        let same = t_from_summary(&a, &a).unwrap();
        assert_eq!((same.t_statistic, same.p_value), (0.0, 1.0));
        let flat = SampleSummary {
            mean: 1.0,
            sd: 0.0,
            n: 3,
        };
        assert_eq!(t_from_summary(&flat, &flat).unwrap().p_value, 1.0);
        assert!(t_from_summary(&SampleSummary { n: 1, ..a }, &b).is_err());
    }

    proptest! {
        #[test]
        fn cdf_symmetry(t in -50.0f64..50.0, df in 0.1f64..1e4) {
            let s = student_t_cdf(t, df).unwrap() + student_t_cdf(-t, df).unwrap();
            prop_assert!((s - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn cdf_monotone(t in -20.0f64..20.0, dt in 1e-3f64..5.0, df in 0.5f64..200.0) {
            prop_assert!(student_t_cdf(t, df).unwrap() <= student_t_cdf(t + dt, df).unwrap());
        }

        #[test]
        fn welch_antisymmetric_and_scale_free(
            a in prop::collection::vec(-10.0f64..10.0, 2..9),
            b in prop::collection::vec(-10.0f64..10.0, 2..9),
            k in 0.01f64..100.0,
        ) {
            let ab = welch_t(&a, &b).unwrap();
            let ba = welch_t(&b, &a).unwrap();
            prop_assert_eq!(ab.t_statistic, -ba.t_statistic);
            prop_assert_eq!(ab.p_value, ba.p_value);
            prop_assert!((0.0..=1.0).contains(&ab.p_value));
            let sa: Vec<f64> = a.iter().map(|x| x * k).collect();
            let sb: Vec<f64> = b.iter().map(|x| x * k).collect();
            let s = welch_t(&sa, &sb).unwrap();
            prop_assert!((s.t_statistic - ab.t_statistic).abs() <= 1e-12 * ab.t_statistic.abs().max(1.0));
            prop_assert!((s.degrees_of_freedom - ab.degrees_of_freedom).abs() <= 1e-12 * ab.degrees_of_freedom);
            prop_assert!((s.p_value - ab.p_value).abs() <= 1e-12);
        }
    }
}
