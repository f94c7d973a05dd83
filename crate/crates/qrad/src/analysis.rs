//! Ordinary least squares on log-log axes with slope significance
//! testing, plus the mean/standard-error summary used by the estimator.
//!
//! The t-test p-value goes through a self-contained regularized
//! incomplete beta (Lentz continued fraction), so no statistics crate is
//! pulled in: for a t statistic with `df` degrees of freedom the
//! two-sided p-value against a zero slope is `I_x(df/2, 1/2)` at
//! `x = df / (df + t^2)`.

use serde::Serialize;

use crate::error::{Error, Result};

/// OLS fit summary. `p_value` is two-sided against a zero slope, from the
/// t-distribution with `n_points - 2` degrees of freedom.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RegressionResult {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub t_statistic: f64,
    pub p_value: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

/// Plain OLS of `ys` on `xs`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<RegressionResult> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            got: ys.len(),
            context: "regression inputs",
        });
    }
    let n = xs.len();
    if n < 3 {
        return Err(Error::InsufficientData { needed: 3, got: n });
    }
    let nf = n as f64;
    let mean_x = xs.iter().sum::<f64>() / nf;
    let mean_y = ys.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let dx = x - mean_x;
        let dy = y - mean_y;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::InvalidArgument(
            "regression x values must not all coincide".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    // Residual sum of squares via the analysis-of-variance identity,
    // clamped against rounding.
    let ss_res = (syy - slope * sxy).max(0.0);
    let df = (n - 2) as f64;
    let slope_stderr = (ss_res / df / sxx).sqrt();
    let (t_statistic, p_value) = if slope_stderr == 0.0 {
        if slope == 0.0 {
            (0.0, 1.0)
        } else {
            (f64::INFINITY * slope.signum(), 0.0)
        }
    } else {
        let t = slope / slope_stderr;
        (t, student_t_two_sided_p(t, df))
    };
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok(RegressionResult {
        slope,
        intercept,
        slope_stderr,
        t_statistic,
        p_value,
        r_squared,
        n_points: n,
    })
}

/// OLS on `(ln x, ln y)`. Natural logarithms throughout.
pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> Result<RegressionResult> {
    for &v in xs.iter().chain(ys) {
        if !(v > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "log-log fit needs strictly positive values, got {v}"
            )));
        }
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly)
}

/// Mean and standard error (sample standard deviation over sqrt n).
pub fn summarize(values: &[f64]) -> Result<(f64, f64)> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0);
    Ok((mean, var.sqrt() / nf.sqrt()))
}

/// Two-sided p-value of a t statistic against zero, `df` degrees of
/// freedom: `I_x(df/2, 1/2)` with `x = df / (df + t^2)`.
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    regularized_incomplete_beta(df / (df + t * t), df / 2.0, 0.5)
}

/// ln Gamma(z) for z > 0, Lanczos approximation.
pub fn ln_gamma(z: f64) -> f64 {
    assert!(z > 0.0, "ln_gamma domain is z > 0, got {z}");
    const C: [f64; 6] = [
        76.18009172947146,
        -86.50532032941677,
        24.01409824083091,
        -1.231739572450155,
        0.1208650973866179e-2,
        -0.5395239384953e-5,
    ];
    let mut sum = 1.000000000190015;
    for (i, c) in C.iter().enumerate() {
        sum += c / (z + i as f64 + 1.0);
    }
    let tmp = z + 5.5;
    (z + 0.5) * tmp.ln() - tmp + (2.5066282746310005 * sum / z).ln()
}

/// Regularized incomplete beta I_x(a, b), modified Lentz continued
/// fraction, relative tolerance 1e-14.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    assert!((0.0..=1.0).contains(&x), "I_x needs x in [0, 1], got {x}");
    assert!(a > 0.0 && b > 0.0, "I_x needs a, b > 0, got a={a}, b={b}");
    if x == 0.0 {
        return 0.0;
    }
    if x == 1.0 {
        return 1.0;
    }
    // The continued fraction converges fastest for x < (a+1)/(a+b+2);
    // use the reflection I_x(a,b) = 1 - I_{1-x}(b,a) otherwise.
    if x > (a + 1.0) / (a + b + 2.0) {
        return 1.0 - regularized_incomplete_beta(1.0 - x, b, a);
    }
    let ln_front = a * x.ln() + b * (1.0 - x).ln() - ln_gamma(a) - ln_gamma(b) + ln_gamma(a + b);
    let front = ln_front.exp();

    const EPS: f64 = 1e-14;
    const TINY: f64 = 1e-30;
    const MAX_ITER: usize = 500;

    let mut c = 1.0;
    let mut d = {
        let d0 = 1.0 - (a + b) * x / (a + 1.0);
        1.0 / if d0.abs() < TINY { TINY } else { d0 }
    };
    let mut h = d;
    for m in 1..=MAX_ITER {
        let mf = m as f64;
        // even step
        let num = mf * (b - mf) * x / ((a + 2.0 * mf - 1.0) * (a + 2.0 * mf));
        d = 1.0 + num * d;
        if d.abs() < TINY {
            d = TINY;
        }
        d = 1.0 / d;
        c = 1.0 + num / c;
        if c.abs() < TINY {
            c = TINY;
        }
        h *= d * c;
        // odd step
        let num = -(a + mf) * (a + b + mf) * x / ((a + 2.0 * mf) * (a + 2.0 * mf + 1.0));
        d = 1.0 + num * d;
        if d.abs() < TINY {
            d = TINY;
        }
        d = 1.0 / d;
        c = 1.0 + num / c;
        if c.abs() < TINY {
            c = TINY;
        }
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    (front * h / a).clamp(0.0, 1.0)
}
