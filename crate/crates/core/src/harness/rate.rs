//! Log-log least-squares rate fit with a jackknife confidence band.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Two-sided confidence level of the jackknife band.
pub const BAND_LEVEL: f64 = 0.95;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Jackknife standard error of the slope.
    pub slope_se: f64,
    pub slope_band: (f64, f64),
    pub intercept_se: f64,
    pub intercept_band: (f64, f64),
    pub points: usize,
}

fn ols(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Fits `log value = intercept + slope·log n`.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::invalid(format!("rate fit needs at least 3 points, got {}", points.len())));
    }
    if let Some((n, v)) = points.iter().find(|(n, v)| !(n.is_finite() && *n > 0.0 && v.is_finite() && *v > 0.0)) {
        return Err(Error::invalid(format!("rate fit needs positive finite points, got ({n}, {v})")));
    }
    let x: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    if x.iter().all(|v| *v == x[0]) {
        return Err(Error::invalid("rate fit needs at least two distinct abscissae"));
    }
    let (slope, intercept) = ols(&x, &y);
    let m = x.len();
    let mut loo = Vec::with_capacity(m);
    for skip in 0..m {
        let xs: Vec<f64> = x.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, v)| *v).collect();
        let ys: Vec<f64> = y.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, v)| *v).collect();
        loo.push(ols(&xs, &ys));
    }
    let jack = |f: &dyn Fn(&(f64, f64)) -> f64| {
        let vals: Vec<f64> = loo.iter().map(f).collect();
        let mean = vals.iter().sum::<f64>() / m as f64;
        ((m as f64 - 1.0) / m as f64 * vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>()).sqrt()
    };
    let slope_se = jack(&|p| p.0);
    let intercept_se = jack(&|p| p.1);
    let t = StudentsT::new(0.0, 1.0, (m - 1) as f64)
        .map_err(|e| Error::invalid(e.to_string()))?
        .inverse_cdf(0.5 + BAND_LEVEL / 2.0);
    Ok(RateFit {
        slope,
        intercept,
        slope_se,
        slope_band: (slope - t * slope_se, slope + t * slope_se),
        intercept_se,
        intercept_band: (intercept - t * intercept_se, intercept + t * intercept_se),
        points: m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng;
    use rand_distr::{Distribution, StandardNormal};

    const NS: [f64; 5] = [256.0, 512.0, 1024.0, 2048.0, 4096.0];

    #[test]
    fn exact_inverse_law() {
        let f = fit_rate(&NS.map(|n| (n, 3.0 / n))).unwrap();
        assert!((f.slope + 1.0).abs() < 1e-12);
        assert!((f.intercept - 3.0_f64.ln()).abs() < 1e-10);
        assert!(f.slope_se < 1e-12);
    }

    #[test]
    fn constant_values_give_zero_slope() {
        let f = fit_rate(&NS.map(|n| (n, 0.2))).unwrap();
        assert!(f.slope.abs() < 1e-12);
    }

    #[test]
    fn noisy_inverse_law_stays_in_the_acceptance_window() {
        let mut r = rng(99);
        let hits = (0..1000)
            .filter(|_| {
                let pts: Vec<(f64, f64)> = NS
                    .iter()
                    .map(|&n| (n, (1.0 + 0.1 * Distribution::<f64>::sample(&StandardNormal, &mut r)) / n))
                    .collect();
                let s = fit_rate(&pts).unwrap().slope;
                (-1.2..=-0.8).contains(&s)
            })
            .count();
        assert!(hits >= 950, "{hits}");
    }

    #[test]
    fn band_covers_the_slope() {
        let pts: Vec<(f64, f64)> = NS.iter().zip([1.1, 0.9, 1.05, 0.97, 1.02]).map(|(&n, m)| (n, m / n)).collect();
        let f = fit_rate(&pts).unwrap();
        assert!(f.slope_band.0 < f.slope && f.slope < f.slope_band.1);
        assert!(f.slope_band.0 < -1.0 && -1.0 < f.slope_band.1);
    }

    #[test]
    fn bad_inputs_are_errors() {
        assert!(fit_rate(&[(1.0, 1.0), (2.0, 0.5)]).is_err());
        assert!(fit_rate(&[(1.0, 1.0), (2.0, 0.0), (4.0, 1.0)]).is_err());
        assert!(fit_rate(&[(2.0, 1.0), (2.0, 0.5), (2.0, 1.0)]).is_err());
    }
}
