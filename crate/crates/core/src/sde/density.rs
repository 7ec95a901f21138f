use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spde::field::{DensityField, Grid};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityMethod {
    Histogram,
    /// Gaussian kernel; `None` selects Silverman's rule.
    Kde {
        bandwidth: Option<f64>,
    },
}

#[derive(Clone, Debug)]
pub struct EmpiricalDensity {
    pub field: DensityField,
    /// Points outside the box; dropped, never clamped.
    pub outside: usize,
    pub total: usize,
    pub bandwidth: Option<f64>,
}

/// `0.9·min(sd, IQR/1.34)·n^{-1/5}` for one coordinate.
pub fn silverman_bandwidth(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (s.len() - 1) as f64;
        let i = pos.floor() as usize;
        let f = pos - i as f64;
        if i + 1 < s.len() {
            s[i] * (1.0 - f) + s[i + 1] * f
        } else {
            s[i]
        }
    };
    let iqr = q(0.75) - q(0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * n.powf(-0.2)
}

/// Density of a point cloud (`points.len() = n·d`) on `grid`.
///
/// The histogram puts `1/(n h^d)` per point into its cell. The KDE puts each
/// in-box point's Gaussian mass into cells as exact cell averages (truncated at
/// 8 bandwidths) and rescales so the total mass is `inside/total`.
pub fn empirical_density(points: &[f64], d: usize, grid: &Grid, method: DensityMethod) -> Result<EmpiricalDensity> {
    if d != grid.dim || d == 0 || !points.len().is_multiple_of(d) {
        return Err(Error::GridMismatch(format!("{d}-D points on a {}-D grid", grid.dim)));
    }
    let total = points.len() / d;
    if total == 0 {
        return Err(Error::invalid("empirical density of an empty point set"));
    }
    let inside: Vec<&[f64]> = points.chunks(d).filter(|p| p.iter().all(|x| grid.locate(*x).is_some())).collect();
    let outside = total - inside.len();
    let n = grid.cells;
    let mut values = vec![0.0; grid.len()];
    let mut used = None;
    match method {
        DensityMethod::Histogram => {
            let w = 1.0 / (total as f64 * grid.cell_volume());
            for p in &inside {
                let mut flat = 0;
                for x in p.iter() {
                    flat = flat * n + grid.locate(*x).unwrap();
                }
                values[flat] += w;
            }
        }
        DensityMethod::Kde { bandwidth } => {
            let bw = match bandwidth {
                Some(b) if b > 0.0 && b.is_finite() => b,
                Some(b) => return Err(Error::invalid(format!("bandwidth must be positive, got {b}"))),
                None => {
                    let per_axis: Vec<f64> = (0..d)
                        .map(|a| silverman_bandwidth(&points.chunks(d).map(|p| p[a]).collect::<Vec<_>>()))
                        .collect();
                    per_axis.iter().sum::<f64>() / d as f64
                }
            };
            if !(bw > 0.0) {
                return Err(Error::invalid("degenerate point cloud: zero bandwidth"));
            }
            used = Some(bw);
            let h = grid.h();
            let reach = (8.0 * bw / h).ceil() as i64 + 1;
            let cdf = |z: f64| 0.5 * libm::erfc(-z / (bw * std::f64::consts::SQRT_2));
            let mut w1 = Vec::new();
            let mut w2 = Vec::new();
            let axis_weights = |x: f64, out: &mut Vec<(usize, f64)>| {
                out.clear();
                let c = grid.locate(x).unwrap() as i64;
                let lo = (c - reach).max(0) as usize;
                let hi = (c + reach).min(n as i64 - 1) as usize;
                let mut prev = cdf(grid.face(lo) - x);
                for i in lo..=hi {
                    let next = cdf(grid.face(i + 1) - x);
                    out.push((i, next - prev));
                    prev = next;
                }
            };
            for p in &inside {
                axis_weights(p[0], &mut w1);
                if d == 1 {
                    for &(i, m) in &w1 {
                        values[i] += m;
                    }
                } else {
                    axis_weights(p[1], &mut w2);
                    for &(i, mi) in &w1 {
                        for &(j, mj) in &w2 {
                            values[i * n + j] += mi * mj;
                        }
                    }
                }
            }
            let sum: f64 = values.iter().sum();
            if sum > 0.0 {
                let scale = inside.len() as f64 / (total as f64 * sum * grid.cell_volume());
                values.iter_mut().for_each(|v| *v *= scale);
            }
        }
    }
    Ok(EmpiricalDensity { field: DensityField::from_raw(grid.clone(), values), outside, total, bandwidth: used })
}
