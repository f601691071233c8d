//! Summary statistics and significance testing for run-level samples.
//!
//! Experiments produce a handful of per-run metric values (one per seed), so
//! everything here is small-sample machinery: sample standard deviation with
//! the n-1 correction, 95% confidence intervals from Student's t, and Welch's
//! unequal-variance two-sample t-test. The t distribution itself is evaluated
//! through the regularized incomplete beta function with Newton refinement for
//! the quantile, which keeps the crate free of a runtime statistics dependency
//! and lets the test suite compare against an independent implementation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    /// Summaries need at least two samples for a sample standard deviation.
    #[error("need at least {needed} samples for {what}, got {got}")]
    InsufficientSamples {
        what: &'static str,
        needed: usize,
        got: usize,
    },
    /// Probability or degrees-of-freedom argument outside the defined domain.
    #[error("{arg} = {value} is outside the domain of {func}")]
    Domain {
        func: &'static str,
        arg: &'static str,
        value: f64,
    },
}

/// Location/spread summary of one metric across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStatistics {
    /// Which metric the samples came from; free-form, set by the caller.
    pub metric_id: String,
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n-1 denominator).
    pub sample_std: f64,
    /// Half-width of the two-sided 95% confidence interval for the mean.
    pub ci95_half_width: f64,
}

/// Outcome of Welch's two-sample t-test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t_statistic: f64,
    /// Welch–Satterthwaite effective degrees of freedom.
    pub degrees_of_freedom: f64,
    /// Two-sided p-value.
    pub p_value: f64,
    /// True when `p_value < 0.05`.
    pub significant: bool,
    /// Set when both sample variances are zero and the p-value is assigned by
    /// convention (equal means -> 1, differing means -> 0) rather than computed.
    pub degenerate: bool,
}

/// Mean, sample standard deviation, and 95% CI half-width of `samples`.
///
/// The caller labels the result afterwards via [`SummaryStatistics::metric_id`]
/// (see [`named_summary`] for a one-step variant).
pub fn summarize(samples: &[f64]) -> Result<SummaryStatistics, StatsError> {
    if samples.len() < 2 {
        return Err(StatsError::InsufficientSamples {
            what: "a summary",
            needed: 2,
            got: samples.len(),
        });
    }
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let ss: f64 = samples.iter().map(|x| (x - mean) * (x - mean)).sum();
    let sample_std = (ss / (n - 1) as f64).sqrt();
    let t = t_quantile(0.975, (n - 1) as f64)?;
    Ok(SummaryStatistics {
        metric_id: String::new(),
        n,
        mean,
        sample_std,
        ci95_half_width: t * sample_std / (n as f64).sqrt(),
    })
}

/// [`summarize`] with the metric label filled in.
pub fn named_summary(metric_id: &str, samples: &[f64]) -> Result<SummaryStatistics, StatsError> {
    let mut s = summarize(samples)?;
    s.metric_id = metric_id.to_string();
    Ok(s)
}

/// Welch's unequal-variance t-test, two-sided.
///
/// Chosen over the pooled-variance test because run variances differ across
/// architectures by orders of magnitude; the report records this choice in its
/// metadata. When both variances are zero the p-value follows the documented
/// convention and the result is flagged `degenerate`.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TTestResult, StatsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::InsufficientSamples {
            what: "Welch's t-test",
            needed: 2,
            got: a.len().min(b.len()),
        });
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mean_a = a.iter().sum::<f64>() / na;
    let mean_b = b.iter().sum::<f64>() / nb;
    let var_a = a.iter().map(|x| (x - mean_a) * (x - mean_a)).sum::<f64>() / (na - 1.0);
    let var_b = b.iter().map(|x| (x - mean_b) * (x - mean_b)).sum::<f64>() / (nb - 1.0);

    if var_a == 0.0 && var_b == 0.0 {
        let equal = mean_a == mean_b;
        return Ok(TTestResult {
            t_statistic: if equal { 0.0 } else { f64::INFINITY * (mean_a - mean_b).signum() },
            degrees_of_freedom: na + nb - 2.0,
            p_value: if equal { 1.0 } else { 0.0 },
            significant: !equal,
            degenerate: true,
        });
    }

    let se2 = var_a / na + var_b / nb;
    let t = (mean_a - mean_b) / se2.sqrt();
    // Welch–Satterthwaite: df = (va/na + vb/nb)^2 / ((va/na)^2/(na-1) + (vb/nb)^2/(nb-1))
    let df = se2 * se2
        / ((var_a / na) * (var_a / na) / (na - 1.0) + (var_b / nb) * (var_b / nb) / (nb - 1.0));
    let p = 2.0 * t_cdf(-t.abs(), df)?;
    Ok(TTestResult {
        t_statistic: t,
        degrees_of_freedom: df,
        p_value: p,
        significant: p < 0.05,
        degenerate: false,
    })
}

/// CDF of Student's t distribution with `df` degrees of freedom.
pub fn t_cdf(x: f64, df: f64) -> Result<f64, StatsError> {
    if !(df > 0.0) || !df.is_finite() {
        return Err(StatsError::Domain { func: "t_cdf", arg: "df", value: df });
    }
    if x.is_nan() {
        return Err(StatsError::Domain { func: "t_cdf", arg: "x", value: x });
    }
    if x == 0.0 {
        return Ok(0.5);
    }
    // P(T <= -|x|) = I_{df/(df+x^2)}(df/2, 1/2) / 2, then reflect for x > 0.
    let tail = 0.5 * inc_beta(df / (df + x * x), df / 2.0, 0.5);
    Ok(if x < 0.0 { tail } else { 1.0 - tail })
}

/// Quantile (inverse CDF) of Student's t distribution.
///
/// Inverts the incomplete-beta form of the CDF, then polishes the root with a
/// few Newton steps on `t_cdf` itself so that `t_cdf(t_quantile(p, df), df)`
/// agrees with `p` to about 1e-12.
pub fn t_quantile(p: f64, df: f64) -> Result<f64, StatsError> {
    if !(df > 0.0) || !df.is_finite() {
        return Err(StatsError::Domain { func: "t_quantile", arg: "df", value: df });
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(StatsError::Domain { func: "t_quantile", arg: "p", value: p });
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    let tail = 2.0 * p.min(1.0 - p);
    let y = inv_inc_beta(tail, df / 2.0, 0.5);
    let mut t = (df * (1.0 - y) / y).sqrt();
    if p < 0.5 {
        t = -t;
    }
    // Newton refinement in t-space; the pdf is well behaved everywhere.
    for _ in 0..8 {
        let err = t_cdf(t, df)? - p;
        if err == 0.0 {
            break;
        }
        let step = err / t_pdf(t, df);
        let next = t - step;
        if !next.is_finite() || (next - t).abs() <= 1e-14 * t.abs().max(1.0) {
            t = next.is_finite().then_some(next).unwrap_or(t);
            break;
        }
        t = next;
    }
    Ok(t)
}

fn t_pdf(x: f64, df: f64) -> f64 {
    let ln = ln_gamma((df + 1.0) / 2.0)
        - ln_gamma(df / 2.0)
        - 0.5 * (df * std::f64::consts::PI).ln()
        - (df + 1.0) / 2.0 * (x * x / df).ln_1p();
    ln.exp()
}

/// Natural log of the gamma function (Lanczos approximation, g = 7, n = 9).
fn ln_gamma(x: f64) -> f64 {
    // Standard Lanczos coefficients; accurate to ~1e-15 over the real axis.
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection formula.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized incomplete beta function I_x(a, b).
fn inc_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = a * x.ln() + b * (1.0 - x).ln() - ln_beta(a, b);
    // The continued fraction converges fastest for x below the mean a/(a+b);
    // use the symmetry I_x(a,b) = 1 - I_{1-x}(b,a) on the other side.
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_cont_frac(x, a, b) / a
    } else {
        1.0 - (b * (1.0 - x).ln() + a * x.ln() - ln_beta(a, b)).exp() * beta_cont_frac(1.0 - x, b, a) / b
    }
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Continued fraction for the incomplete beta (modified Lentz's method).
fn beta_cont_frac(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
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
    for m in 1..300 {
        let m = m as f64;
        let m2 = 2.0 * m;
        // Even step.
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
        // Odd step.
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

/// Inverse of `inc_beta` in x for fixed (a, b): bisection with Newton steps.
fn inv_inc_beta(p: f64, a: f64, b: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut x = 0.5;
    for _ in 0..200 {
        let f = inc_beta(x, a, b) - p;
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        // Newton step using the beta density, falling back on bisection
        // whenever it would leave the bracket.
        let ln_pdf = (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - ln_beta(a, b);
        let next = x - f / ln_pdf.exp();
        x = if next.is_finite() && next > lo && next < hi {
            next
        } else {
            0.5 * (lo + hi)
        };
        if (hi - lo) < 1e-16 * x.max(1e-300) {
            break;
        }
    }
    x
}
