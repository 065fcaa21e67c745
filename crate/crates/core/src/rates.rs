//! Log-log least-squares rate fitting and convergence reports.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    /// Fitted exponent `p` in `err ≈ C h^p`.
    pub slope: f64,
    /// Root-mean-square residual of the fit in log space.
    pub residual: f64,
}

/// Least-squares slope of `log(err)` against `log(h)`.
///
/// Needs at least three strictly decreasing positive mesh sizes and positive errors.
pub fn fit_rate(hs: &[f64], errs: &[f64]) -> Result<RateFit> {
    if hs.len() != errs.len() {
        return Err(Error::LengthMismatch {
            expected: hs.len(),
            got: errs.len(),
        });
    }
    if hs.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "rate fit needs at least 3 levels, got {}",
            hs.len()
        )));
    }
    if hs.windows(2).any(|w| !(w[1] < w[0])) || hs.iter().any(|&h| !(h > 0.0)) {
        return Err(Error::InvalidArgument(
            "mesh sizes must be positive and strictly decreasing".into(),
        ));
    }
    if let Some(e) = errs.iter().find(|&&e| !(e > 0.0) || !e.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "errors must be positive and finite for a log fit, got {e}"
        )));
    }
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    Ok(RateFit {
        slope,
        residual: (ss / n).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Degenerate,
    InsufficientLevels,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Degenerate => "degenerate",
            Status::InsufficientLevels => "insufficient-levels",
        })
    }
}

/// Errors at one mesh level.
#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    pub cells: usize,
    pub h: f64,
    pub errors: Vec<f64>,
}

/// One named error series checked against an expected minimum order.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesCheck {
    pub name: String,
    pub fit: Option<RateFit>,
    pub threshold: f64,
    pub status: Status,
}

/// Per-level errors for several quantities with fitted slopes.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub names: Vec<String>,
    pub levels: Vec<Level>,
    pub checks: Vec<SeriesCheck>,
}

/// Errors at or below this level count as exact (no slope is fitted).
pub const DEGENERATE_ERROR: f64 = 1e-11;

impl ConvergenceReport {
    /// Builds the report; `thresholds[k]` is the minimum acceptable slope of series `k`.
    pub fn new(names: &[&str], levels: Vec<Level>, thresholds: &[f64]) -> Self {
        let checks = names
            .iter()
            .enumerate()
            .map(|(k, name)| {
                let hs: Vec<f64> = levels.iter().map(|l| l.h).collect();
                let es: Vec<f64> = levels.iter().map(|l| l.errors[k]).collect();
                let threshold = thresholds[k];
                let (fit, status) = if es.iter().all(|&e| e <= DEGENERATE_ERROR) {
                    (None, Status::Degenerate)
                } else if levels.len() < 3 {
                    (None, Status::InsufficientLevels)
                } else {
                    match fit_rate(&hs, &es) {
                        Ok(f) if f.slope >= threshold => (Some(f), Status::Pass),
                        Ok(f) => (Some(f), Status::Fail),
                        Err(_) => (None, Status::Fail),
                    }
                };
                SeriesCheck {
                    name: name.to_string(),
                    fit,
                    threshold,
                    status,
                }
            })
            .collect();
        Self {
            names: names.iter().map(|s| s.to_string()).collect(),
            levels,
            checks,
        }
    }

    /// Overall status: fail dominates, then insufficient levels, then degenerate.
    pub fn status(&self) -> Status {
        let st: Vec<Status> = self.checks.iter().map(|c| c.status).collect();
        if st.contains(&Status::Fail) {
            Status::Fail
        } else if st.contains(&Status::InsufficientLevels) {
            Status::InsufficientLevels
        } else if st.iter().all(|s| *s == Status::Degenerate) {
            Status::Degenerate
        } else {
            Status::Pass
        }
    }
}
