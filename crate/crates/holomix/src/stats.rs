//! Small statistics helpers: ordinary least squares in log-log coordinates
//! for scaling-exponent fits, and running mean / standard error estimates.

use crate::error::{Error, Result};

/// Result of a straight-line fit `y = slope * x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Least squares line through `(x, y)` points; the confidence band on the
/// slope is `+-2 sigma`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<Fit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::FitFailure(format!(
            "need at least two points, got {}",
            xs.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::FitFailure("degenerate abscissa".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let dof = (xs.len() as f64 - 2.0).max(1.0);
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - (slope * x + intercept);
            r * r
        })
        .sum();
    let slope_stderr = (ss_res / dof / sxx).sqrt();
    Ok(Fit {
        slope,
        intercept,
        slope_stderr,
        ci_low: slope - 2.0 * slope_stderr,
        ci_high: slope + 2.0 * slope_stderr,
    })
}

/// Fit `log y = slope * log x + c`; every point must be strictly positive.
pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> Result<Fit> {
    let mut lx = Vec::with_capacity(xs.len());
    let mut ly = Vec::with_capacity(ys.len());
    for (&x, &y) in xs.iter().zip(ys) {
        if x <= 0.0 || y <= 0.0 || !x.is_finite() || !y.is_finite() {
            return Err(Error::FitFailure(format!(
                "log-log fit needs positive finite data, got ({x}, {y})"
            )));
        }
        lx.push(x.ln());
        ly.push(y.ln());
    }
    linear_fit(&lx, &ly)
}

/// Sample mean and standard error of the mean.
pub fn mean_stderr(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

/// Mean and standard error for complex samples, component-wise.
pub fn mean_stderr_complex(samples: &[num_complex::Complex64]) -> (num_complex::Complex64, f64) {
    let n = samples.len();
    if n == 0 {
        return (num_complex::Complex64::default(), 0.0);
    }
    let mean = samples.iter().sum::<num_complex::Complex64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = samples
        .iter()
        .map(|s| (s - mean).norm_sqr())
        .sum::<f64>()
        / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}
