//! The centred interaction `ψ(z, y) = (k(z − y) − (k*ρ)(z)) / (16e‖k‖_∞)`
//! integrates to zero against `ρ` in `y` for every `z`.

use std::f64::consts::E;

use crate::error::{Error, Result};
use crate::model::kernel::KernelSpec;
use crate::spde::field::DensityField;

/// Largest allowed `|mass − 1|` of the reference density.
pub const UNIT_MASS_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CancellationReport {
    /// `max_z |∫ψ(z, y) ρ(y) dy|` over the probes.
    pub max_integral: f64,
    /// `max |ψ(z, y)|` over probes `z` and grid centres `y`.
    pub psi_sup: f64,
    /// `1/(2e)`.
    pub psi_cap: f64,
    /// Discrete mass of `ρ` before normalisation.
    pub mass: f64,
}

impl CancellationReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.max_integral <= tol && self.psi_sup <= self.psi_cap + 1e-12
    }
}

/// Quadrature at the grid centres of the normalised `ρ`.
pub fn cancellation_check(k: &KernelSpec, rho: &DensityField, probes: &[Vec<f64>]) -> Result<CancellationReport> {
    if k.is_zero() {
        return Err(Error::invalid("ψ is undefined for the zero kernel"));
    }
    let grid = rho.grid();
    let d = k.dim();
    if grid.dim != d || probes.iter().any(|z| z.len() != d) {
        return Err(Error::invalid(format!("kernel is {d}-D, density grid is {}-D", grid.dim)));
    }
    let mass = rho.mass();
    if (mass - 1.0).abs() > UNIT_MASS_TOL {
        return Err(Error::invalid(format!("reference density has mass {mass}, expected 1")));
    }
    let vol = grid.cell_volume();
    let weights: Vec<f64> = rho.values().iter().map(|v| v * vol / mass).collect();
    let points: Vec<Vec<f64>> = (0..grid.len()).map(|c| grid.point(c)).collect();
    let scale = 1.0 / (16.0 * E * k.sup_norm());
    let mut max_integral = 0.0_f64;
    let mut psi_sup = 0.0_f64;
    let mut kz = vec![vec![0.0; d]; points.len()];
    let mut diff = vec![0.0; d];
    for z in probes {
        for (p, out) in points.iter().zip(kz.iter_mut()) {
            diff.iter_mut().zip(z.iter().zip(p)).for_each(|(o, (a, b))| *o = a - b);
            k.eval_into(&diff, out);
        }
        let mut conv = vec![0.0; d];
        for (kv, w) in kz.iter().zip(&weights) {
            conv.iter_mut().zip(kv).for_each(|(c, v)| *c += v * w);
        }
        let mut integral = vec![0.0; d];
        for (kv, w) in kz.iter().zip(&weights) {
            let mut norm2 = 0.0;
            for a in 0..d {
                let psi = (kv[a] - conv[a]) * scale;
                integral[a] += psi * w;
                norm2 += psi * psi;
            }
            psi_sup = psi_sup.max(norm2.sqrt());
        }
        max_integral = max_integral.max(integral.iter().map(|v| v * v).sum::<f64>().sqrt());
    }
    Ok(CancellationReport { max_integral, psi_sup, psi_cap: 1.0 / (2.0 * E), mass })
}
