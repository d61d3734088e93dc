//! Loss-distribution statistics, quantiles, regressions and the Welch test.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskSummary {
    /// Expected loss: the sample mean.
    pub el: f64,
    /// 95% value at risk.
    pub var95: f64,
    /// 95% expected shortfall.
    pub es95: f64,
}

fn sorted(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidParameter("samples contain NaN".into()));
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// EL, VaR and ES of a loss sample.
///
/// VaR is the order statistic at rank `ceil(0.95 N)` (1-based, no
/// interpolation); ES is the mean of the worst `ceil(0.05 N)` samples.
pub fn risk_measures(samples: &[f64]) -> Result<RiskSummary> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter(
            "risk measures need at least one sample".into(),
        ));
    }
    let v = sorted(samples)?;
    let n = v.len();
    let rank = ((0.95 * n as f64).ceil() as usize).clamp(1, n);
    let tail = ((0.05 * n as f64).ceil() as usize).clamp(1, n);
    let es95 = v[n - tail..].iter().sum::<f64>() / tail as f64;
    Ok(RiskSummary {
        el: v.iter().sum::<f64>() / n as f64,
        var95: v[rank - 1],
        es95,
    })
}

/// Linearly interpolated quantile of sorted data (position `p (N - 1)`).
pub fn quantile_sorted(v: &[f64], p: f64) -> f64 {
    debug_assert!(!v.is_empty());
    let pos = p.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

pub fn quantile(samples: &[f64], p: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter("quantile of an empty sample".into()));
    }
    Ok(quantile_sorted(&sorted(samples)?, p))
}

/// Box-plot statistics with 1.5 IQR whiskers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    /// Most extreme samples within 1.5 IQR of the box.
    pub lower_whisker: f64,
    pub upper_whisker: f64,
    pub outliers: usize,
}

impl BoxStats {
    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

pub fn box_stats(samples: &[f64]) -> Result<BoxStats> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter("box stats of an empty sample".into()));
    }
    let v = sorted(samples)?;
    let q1 = quantile_sorted(&v, 0.25);
    let q3 = quantile_sorted(&v, 0.75);
    let lo_fence = q1 - 1.5 * (q3 - q1);
    let hi_fence = q3 + 1.5 * (q3 - q1);
    let inside = || v.iter().copied().filter(|&x| x >= lo_fence && x <= hi_fence);
    Ok(BoxStats {
        n: v.len(),
        min: v[0],
        q1,
        median: quantile_sorted(&v, 0.5),
        q3,
        max: v[v.len() - 1],
        lower_whisker: inside().next().unwrap_or(q1),
        upper_whisker: inside().last().unwrap_or(q3),
        outliers: v.iter().filter(|&&x| x < lo_fence || x > hi_fence).count(),
    })
}

/// Empirical survival function `P(X >= x)` at each distinct sample value,
/// in increasing order of `x`.
pub fn ccdf(samples: &[f64]) -> Result<Vec<(f64, f64)>> {
    let v = sorted(samples)?;
    let n = v.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &x) in v.iter().enumerate() {
        if out.last().map_or(true, |&(prev, _)| prev != x) {
            out.push((x, (v.len() - i) as f64 / n));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Fit done on `(ln x, ln y)`; the slope is then an exponent.
    pub log_log: bool,
    pub slope_se: f64,
    pub n: usize,
}

/// Ordinary least squares with intercept.
pub fn ols_fit(x: &[f64], y: &[f64], log_log: bool) -> Result<FitResult> {
    if x.len() != y.len() {
        return Err(Error::InvalidParameter(format!(
            "x has {} samples, y has {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(Error::InvalidParameter("ols needs at least 3 points".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("ols data must be finite".into()));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = if log_log {
        if x.iter().chain(y).any(|&v| v <= 0.0) {
            return Err(Error::InvalidParameter(
                "log-log fit needs strictly positive data".into(),
            ));
        }
        (x.iter().map(|v| v.ln()).collect(), y.iter().map(|v| v.ln()).collect())
    } else {
        (x.to_vec(), y.to_vec())
    };
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Degenerate("x has zero variance".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(&y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let r_squared = if syy > 0.0 {
        (1.0 - sse / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(FitResult {
        slope,
        intercept,
        r_squared,
        log_log,
        slope_se: (sse / (n - 2.0) / sxx).sqrt(),
        n: x.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchTest {
    pub t: f64,
    pub df: f64,
    /// Two-sided.
    pub p_value: f64,
}

fn mean_var(a: &[f64]) -> (f64, f64) {
    let n = a.len() as f64;
    let m = a.iter().sum::<f64>() / n;
    (m, a.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0))
}

/// Two-sample t test with unequal variances.
pub fn welch_test(a: &[f64], b: &[f64]) -> Result<WelchTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidParameter(
            "welch test needs at least 2 samples per group".into(),
        ));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    if !(va > 0.0 && vb > 0.0) {
        return Err(Error::Degenerate("welch test needs nonzero variances".into()));
    }
    let (sa, sb) = (va / a.len() as f64, vb / b.len() as f64);
    let t = (ma - mb) / (sa + sb).sqrt();
    let df = (sa + sb).powi(2)
        / (sa * sa / (a.len() as f64 - 1.0) + sb * sb / (b.len() as f64 - 1.0));
    // P(|T| > t) = I_{df / (df + t^2)}(df / 2, 1 / 2)
    let p_value = beta_reg(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0);
    Ok(WelchTest { t, df, p_value })
}
