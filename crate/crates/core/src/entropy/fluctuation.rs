//! Monte Carlo estimate of the interaction fluctuation
//! `(N/δ)·E|N⁻¹Σⱼ k(x₁ − xⱼ) − (k*ρ)(x₁)|²` from a particle cloud.

use crate::error::{Error, Result};
use crate::model::kernel::KernelSpec;
use crate::sde::particles::interaction_drift;
use crate::spde::conv::{interpolate_centers, Convolver, Targets};
use crate::spde::field::DensityField;

/// Number of batches for the batch-means standard error.
pub const FLUCTUATION_BATCHES: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FluctuationEstimate {
    /// `(N/δ)·mean_sq`, the per-time integrand of the fluctuation term.
    pub value: f64,
    /// Batch-means standard error of `value`.
    pub stderr: f64,
    /// Particle average of `|N⁻¹Σⱼ k(xᵢ − xⱼ) − (k*ρ)(xᵢ)|²`.
    pub mean_sq: f64,
    pub particles: usize,
}

/// `positions` holds `N` points of `R^d` row-major, in the coordinates of
/// `rho`. `(k*ρ)` is evaluated at the grid centres and interpolated linearly.
pub fn fluctuation_term(
    positions: &[f64],
    d: usize,
    k: &KernelSpec,
    rho: &DensityField,
    delta: f64,
) -> Result<FluctuationEstimate> {
    if d == 0 || !positions.len().is_multiple_of(d) || positions.len() / d < 2 {
        return Err(Error::invalid("fluctuation needs at least two particles"));
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::invalid(format!("ellipticity constant must be positive, got {delta}")));
    }
    if k.dim() != d {
        return Err(Error::invalid(format!("kernel is {}-D, particles are {d}-D", k.dim())));
    }
    let n = positions.len() / d;
    if k.is_zero() {
        return Ok(FluctuationEstimate { value: 0.0, stderr: 0.0, mean_sq: 0.0, particles: n });
    }
    if d != 1 || rho.grid().dim != 1 {
        return Err(Error::OutOfScope("fluctuation against a grid density is implemented for d = 1".into()));
    }
    let grid = rho.grid();
    let field = Convolver::new(k, grid, Targets::Centers)?.convolve(rho.values());
    let mut drift = vec![0.0; n];
    interaction_drift(k, positions, 1, &mut drift);
    let sq: Vec<f64> = positions
        .iter()
        .zip(&drift)
        .map(|(&x, &b)| {
            let dev = -b - interpolate_centers(grid, &field, x);
            dev * dev
        })
        .collect();
    let scale = n as f64 / delta;
    let mean_sq = sq.iter().sum::<f64>() / n as f64;
    let batches = FLUCTUATION_BATCHES.min(n);
    let means: Vec<f64> = (0..batches)
        .map(|b| {
            let (lo, hi) = (b * n / batches, (b + 1) * n / batches);
            sq[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect();
    let mbar = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - mbar).powi(2)).sum::<f64>() / (batches - 1) as f64;
    Ok(FluctuationEstimate {
        value: scale * mean_sq,
        stderr: scale * (var / batches as f64).sqrt(),
        mean_sq,
        particles: n,
    })
}
