//! Least-squares exponent fits and upper envelopes.

use crate::csv::{fmt_f64, Table};
use crate::{Error, Result};

/// A fitted line with residual diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination, clamped to `[0, 1]`.
    pub r2: f64,
    /// Abscissa window (in the original, unlogged units).
    pub window: (f64, f64),
    pub samples: usize,
}

/// Ordinary least squares `y = slope x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<FitResult> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InsufficientCoverage(format!("{} points for a line fit", x.len())));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientCoverage("abscissae are all equal".into()));
    }
    let constant = y.iter().all(|v| *v == y[0]);
    let (slope, intercept) = if constant { (0.0, y[0]) } else { (sxy / sxx, my - sxy / sxx * mx) };
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - slope * a - intercept).powi(2))
        .sum();
    let r2 = if constant || syy == 0.0 { 1.0 } else { (1.0 - sse / syy).clamp(0.0, 1.0) };
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    Ok(FitResult {
        slope,
        intercept,
        r2,
        window: (lo, hi),
        samples: x.len(),
    })
}

/// Fit `log y = slope log x + c` on points with `lo <= x <= hi` and `y > 0`.
pub fn loglog_fit(x: &[f64], y: &[f64], lo: f64, hi: f64) -> Result<FitResult> {
    let (lx, ly): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a >= lo * (1.0 - 1e-12) && **a <= hi * (1.0 + 1e-12) && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .unzip();
    let mut fit = linear_fit(&lx, &ly)?;
    fit.window = (fit.window.0.exp(), fit.window.1.exp());
    Ok(fit)
}

/// Running maximum in input order.
pub fn cumulative_max(values: &[f64]) -> Vec<f64> {
    let mut m = f64::NEG_INFINITY;
    values
        .iter()
        .map(|&v| {
            m = m.max(v);
            m
        })
        .collect()
}

/// Sort `(x, y)` by `x` and replace `y` by its running maximum.
pub fn upper_envelope(x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    (xs, cumulative_max(&ys))
}

/// Log-log slope of the upper envelope over the top `decades` of `x`.
///
/// The envelope at `x` is the largest value sampled at any abscissa `<= x`,
/// so a sup-type bound shows up as a flat envelope.
pub fn envelope_slope(x: &[f64], y: &[f64], decades: f64) -> Result<FitResult> {
    let (xs, env) = upper_envelope(x, y);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    loglog_fit(&xs, &env, hi / 10f64.powf(decades), hi)
}

/// Number of decades spanned by positive abscissae.
pub fn decades(x: &[f64]) -> f64 {
    let (lo, hi) = x
        .iter()
        .filter(|v| **v > 0.0)
        .fold((f64::INFINITY, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
    if lo.is_finite() && hi > 0.0 {
        (hi / lo).log10()
    } else {
        0.0
    }
}

pub fn require_decades(x: &[f64], needed: f64, what: &str) -> Result<()> {
    let d = decades(x);
    if d + 1e-9 < needed {
        Err(Error::InsufficientCoverage(format!(
            "{what} spans {d:.2} decades, need at least {needed}"
        )))
    } else {
        Ok(())
    }
}

pub const FIT_HEADER: [&str; 6] = ["direction", "slope", "intercept", "r2", "window_lo", "window_hi"];

/// FitResults as CSV rows labeled by direction.
pub fn fits_table<'a>(fits: impl IntoIterator<Item = (&'a str, &'a FitResult)>) -> Table {
    let mut t = Table::new(FIT_HEADER);
    for (dir, f) in fits {
        t.push(vec![
            dir.to_string(),
            fmt_f64(f.slope),
            fmt_f64(f.intercept),
            fmt_f64(f.r2),
            fmt_f64(f.window.0),
            fmt_f64(f.window.1),
        ]);
    }
    t
}
