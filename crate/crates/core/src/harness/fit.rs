//! Least-squares fits of `error ≈ C exp(-b x)`.

use serde::{Deserialize, Serialize};

use super::ConvergenceTable;
use crate::error::{Error, Result};

/// Abscissa of the fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMode {
    /// `x = p`.
    P,
    /// `x = N^{1/4}`.
    Dofs,
}

impl std::str::FromStr for FitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "p" => Ok(FitMode::P),
            "dofs" | "n" => Ok(FitMode::Dofs),
            _ => Err(Error::Input(format!("unknown fit mode '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub c: f64,
    /// Positive for decaying errors.
    pub b: f64,
    pub r2: f64,
}

/// Fits `ln y = ln C - b x`. Needs at least three points and positive `y`.
/// A constant series has `R² = 1`.
pub fn fit_exponential(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::Fit(format!("need at least 3 points, got {}", points.len())));
    }
    if let Some(&(x, y)) = points.iter().find(|&&(_, y)| !(y > 0.0 && y.is_finite())) {
        return Err(Error::Fit(format!("non-positive error {y} at x = {x}")));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (dx, dy) = (x - mx, y.ln() - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::Fit("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let ss_res = (syy - slope * sxy).max(0.0);
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(RateFit { c: (my - slope * mx).exp(), b: -slope, r2 })
}

/// Fit over the rows with `p ≥ 2`.
pub fn fit_table(table: &ConvergenceTable, mode: FitMode) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = table
        .rows
        .iter()
        .filter(|r| r.p >= 2)
        .map(|r| {
            let x = match mode {
                FitMode::P => r.p as f64,
                FitMode::Dofs => (r.n as f64).powf(0.25),
            };
            (x, r.error)
        })
        .collect();
    fit_exponential(&pts)
}
