//! Unweighted least-squares lines, mostly on log-log data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
}

pub fn line_fit(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch { expected: xs.len(), actual: ys.len() });
    }
    if xs.len() < 3 {
        return Err(Error::DegenerateFit(format!("{} points, need at least 3", xs.len())));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::DegenerateFit("non-finite sample".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("abscissae coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    Ok(LineFit { slope, intercept, residual: (ss / n).sqrt() })
}

/// Fit of `log y` against `log x`; all samples must be positive.
pub fn log_log_fit(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.iter().chain(ys).any(|&v| v <= 0.0) {
        return Err(Error::DegenerateFit("log-log fit needs positive samples".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    line_fit(&lx, &ly)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_power_law() {
        let xs = [0.25, 0.5, 1.0, 2.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-7.0 / 3.0)).collect();
        let f = log_log_fit(&xs, &ys).unwrap();
        assert!((f.slope + 7.0 / 3.0).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!(f.residual < 1e-12);
    }

    #[test]
    fn too_few_points_is_degenerate() {
        assert!(matches!(line_fit(&[1.0, 2.0], &[1.0, 2.0]), Err(Error::DegenerateFit(_))));
        assert!(log_log_fit(&[1.0, 2.0, 3.0], &[1.0, 0.0, 1.0]).is_err());
    }
}
