// SPDX-License-Identifier: Apache-2.0

//! Pooled-variance two-sample t-test.
//!
//! The Student-t tail probability goes through the regularized incomplete
//! beta function, evaluated with a modified Lentz continued fraction.

use crate::error::{CmorError, Result};

#[allow(clippy::excessive_precision)]
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 500;
    const EPS: f64 = 1e-16;
    const TINY: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
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

/// Regularized incomplete beta `I_x(a, b)` for `a, b > 0`, `0 <= x <= 1`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    assert!(a > 0.0 && b > 0.0, "shape parameters must be positive");
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    // The fraction converges quickly only on this side of the mean.
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

/// Two-tailed probability `P(|T| >= |t|)` for Student's t with `df` degrees.
pub fn student_t_two_tailed(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    regularized_incomplete_beta(0.5 * df, 0.5, x).clamp(0.0, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleSummary {
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for a single value.
    pub std_dev: f64,
}

impl SampleSummary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let count = values.len();
        let mean = values.iter().sum::<f64>() / count as f64;
        let var = if count > 1 {
            sum_sq_dev(values, mean) / (count - 1) as f64
        } else {
            0.0
        };
        Some(SampleSummary {
            count,
            mean,
            std_dev: var.sqrt(),
        })
    }
}

fn sum_sq_dev(values: &[f64], mean: f64) -> f64 {
    values.iter().map(|v| (v - mean) * (v - mean)).sum()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
}

impl TTest {
    pub fn significant(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// Significance level for distinguishing two programmed levels.
pub const LEVEL_ALPHA: f64 = 1e-3;

/// Equal-variance two-sample t-test, `df = n_a + n_b - 2`.
///
/// Two samples with zero pooled variance give `t = 0, p = 1` when their means
/// agree and `t = ±inf, p = 0` otherwise.
pub fn pooled_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.is_empty() || b.is_empty() || a.len() + b.len() < 3 {
        return Err(CmorError::InsufficientData(format!(
            "t-test needs two non-empty samples with at least 3 values total, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mean_a = a.iter().sum::<f64>() / na;
    let mean_b = b.iter().sum::<f64>() / nb;
    let df = na + nb - 2.0;
    let pooled = (sum_sq_dev(a, mean_a) + sum_sq_dev(b, mean_b)) / df;
    let diff = mean_a - mean_b;
    let se = (pooled * (1.0 / na + 1.0 / nb)).sqrt();
    let t = if se == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        }
    } else {
        diff / se
    };
    Ok(TTest {
        t,
        df,
        p_value: student_t_two_tailed(t, df),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ln_gamma_known_values() {
        assert_relative_eq!(ln_gamma(1.0), 0.0, epsilon = 1e-13);
        assert_relative_eq!(ln_gamma(5.0), 24f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(
            ln_gamma(0.5),
            std::f64::consts::PI.sqrt().ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn incomplete_beta_closed_forms() {
        // I_x(1, 1) = x, I_x(a, 1) = x^a
        for &x in &[0.1, 0.37, 0.5, 0.93] {
            assert_relative_eq!(regularized_incomplete_beta(1.0, 1.0, x), x, epsilon = 1e-13);
            assert_relative_eq!(
                regularized_incomplete_beta(3.0, 1.0, x),
                x.powi(3),
                epsilon = 1e-13
            );
        }
        assert_eq!(regularized_incomplete_beta(2.0, 3.0, 0.0), 0.0);
        assert_eq!(regularized_incomplete_beta(2.0, 3.0, 1.0), 1.0);
    }

    #[test]
    fn reference_samples() {
        // scipy.stats.ttest_ind / mpmath betainc: t = -1, p = 0.34659350708733413
        let r = pooled_t_test(&[1., 2., 3., 4., 5.], &[2., 3., 4., 5., 6.]).unwrap();
        assert_relative_eq!(r.t, -1.0, epsilon = 1e-12);
        assert_eq!(r.df, 8.0);
        assert_relative_eq!(r.p_value, 0.346_593_507_087_334_1, max_relative = 1e-9);
    }

    #[test]
    fn unequal_sizes() {
        // scipy: t = -3.4371956672018924, p = 0.00886034820316981
        let r = pooled_t_test(&[1.1, 2.3, 0.7, 4.2], &[3.3, 5.1, 4.4, 6.0, 7.2, 5.5]).unwrap();
        assert_relative_eq!(r.t, -3.437_195_667_201_892_4, max_relative = 1e-10);
        assert_relative_eq!(r.p_value, 0.008_860_348_203_169_81, max_relative = 1e-8);
        // scipy: t = -11.618950038622252, p = 8.290963420194256e-05
        let r = pooled_t_test(&[10., 11., 12.], &[20., 21., 22., 23.]).unwrap();
        assert_relative_eq!(r.p_value, 8.290_963_420_194_256e-5, max_relative = 1e-8);
    }

    #[test]
    fn identical_samples() {
        let r = pooled_t_test(&[3.0; 6], &[3.0; 4]).unwrap();
        assert_eq!(r.t, 0.0);
        assert_eq!(r.p_value, 1.0);
        let r = pooled_t_test(&[3.0; 6], &[4.0; 4]).unwrap();
        assert_eq!(r.p_value, 0.0);
    }

    #[test]
    fn empty_sample_rejected() {
        assert!(matches!(
            pooled_t_test(&[], &[1.0, 2.0]),
            Err(CmorError::InsufficientData(_))
        ));
    }

    #[test]
    fn matches_statrs_cdf() {
        use statrs::distribution::{ContinuousCDF, StudentsT};
        for &df in &[1.0, 3.0, 8.0, 30.0, 126.0] {
            let dist = StudentsT::new(0.0, 1.0, df).unwrap();
            for &t in &[0.1, 0.5, 1.0, 2.5, 4.0, 7.0] {
                let expected = 2.0 * (1.0 - dist.cdf(t));
                let got = student_t_two_tailed(t, df);
                assert_relative_eq!(got, expected, max_relative = 1e-6, epsilon = 1e-12);
            }
        }
    }
}
