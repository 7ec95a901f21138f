//! Right-hand side of the two-particle entropy inequality on grid densities,
//! and the resulting a-priori entropy bound.

use std::f64::consts::E;

use crate::error::{Error, Result};
use crate::model::kernel::KernelSpec;
use crate::spde::conv::{Convolver, Targets};
use crate::spde::field::DensityField;

/// Cells where either density is at or below this value are excluded from
/// log-gradients.
pub const LOG_GRADIENT_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DissipationReport {
    /// `(δ/4) Σᵢ ∫ρ² |∂ᵢ log(ρ²/ρ⊗ρ)|²`.
    pub fisher_term: f64,
    /// `(1/δ) Σᵢ ∫ρ² |½Σⱼ k(xᵢ − xⱼ) − (k*ρ)(xᵢ)|²`.
    pub fluctuation_term: f64,
    /// Standard error of `fluctuation_term` (zero for grid quadrature).
    pub fluctuation_stderr: f64,
}

/// Both terms for a two-particle density `rho2` against `rho ⊗ rho`, N = 2,
/// d = 1. Log-gradients are centred differences over cells whose three-point
/// stencil lies above [`LOG_GRADIENT_FLOOR`].
pub fn dissipation_report(
    rho2: &DensityField,
    rho: &DensityField,
    k: &KernelSpec,
    delta: f64,
) -> Result<DissipationReport> {
    let g2 = rho2.grid();
    let g = rho.grid();
    if g2.dim != 2 || g.dim != 1 || g2.cells != g.cells || g2.lo != g.lo || g2.hi != g.hi {
        return Err(Error::GridMismatch("dissipation needs a 2-D field on the square of the 1-D grid".into()));
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::invalid(format!("ellipticity constant must be positive, got {delta}")));
    }
    let n = g.cells;
    let h = g.h();
    let f = rho2.values();
    let r = rho.values();
    let log_ratio = |i: usize, j: usize| -> Option<f64> {
        let (a, b) = (f[i * n + j], r[i] * r[j]);
        (f[i * n + j] > LOG_GRADIENT_FLOOR && r[i] > LOG_GRADIENT_FLOOR && r[j] > LOG_GRADIENT_FLOOR)
            .then(|| (a / b).ln())
    };
    let mut fisher = 0.0;
    for i in 1..n - 1 {
        for j in 1..n - 1 {
            let Some(_) = log_ratio(i, j) else { continue };
            let mut grad_sq = 0.0;
            if let (Some(p), Some(m)) = (log_ratio(i + 1, j), log_ratio(i - 1, j)) {
                grad_sq += ((p - m) / (2.0 * h)).powi(2);
            }
            if let (Some(p), Some(m)) = (log_ratio(i, j + 1), log_ratio(i, j - 1)) {
                grad_sq += ((p - m) / (2.0 * h)).powi(2);
            }
            fisher += f[i * n + j] * grad_sq;
        }
    }
    fisher *= 0.25 * delta * h * h;

    let mut fluct = 0.0;
    if !k.is_zero() {
        let conv = Convolver::new(k, g, Targets::Centers)?.convolve(r);
        let k0 = k.eval1(0.0);
        let mut table = vec![0.0; 2 * n - 1];
        for (d, t) in table.iter_mut().enumerate() {
            *t = k.eval1((d as f64 - (n as f64 - 1.0)) * h);
        }
        for i in 0..n {
            for j in 0..n {
                let w = f[i * n + j];
                if w == 0.0 {
                    continue;
                }
                let dev1 = 0.5 * (k0 + table[i + n - 1 - j]) - conv[i];
                let dev2 = 0.5 * (k0 + table[j + n - 1 - i]) - conv[j];
                fluct += w * (dev1 * dev1 + dev2 * dev2);
            }
        }
        fluct *= h * h / delta;
    }
    Ok(DissipationReport { fisher_term: fisher, fluctuation_term: fluct, fluctuation_stderr: 0.0 })
}

/// Gronwall rate of the a-priori entropy bound: `16e‖k‖_∞/δ`.
pub fn entropy_gronwall_rate(k_sup: f64, delta: f64) -> f64 {
    16.0 * E * k_sup / delta
}

/// `16e‖k‖_∞ T² e^{CT}/δ` with `C` from [`entropy_gronwall_rate`].
pub fn liouville_entropy_bound(k_sup: f64, delta: f64, horizon: f64) -> f64 {
    let c = entropy_gronwall_rate(k_sup, delta);
    16.0 * E * k_sup * horizon * horizon * (c * horizon).exp() / delta
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init::InitialDensity;
    use crate::spde::field::Grid;
    use crate::spde::tensor::tensorize;

    #[test]
    fn product_density_has_no_fisher_information() {
        let g = Grid::line(-6.0, 6.0, 96).unwrap();
        let rho = InitialDensity::gaussian(1, 0.0, 1.0).unwrap().discretize(&g).unwrap();
        let r = dissipation_report(&tensorize(&rho, 2).unwrap(), &rho, &KernelSpec::zero(1), 1.0).unwrap();
        assert!(r.fisher_term.abs() < 1e-20);
        assert_eq!(r.fluctuation_term, 0.0);
    }

    #[test]
    fn correlated_gaussian_fisher_matches_closed_form() {
        // ρ² bivariate normal, unit variances, correlation c; ρ standard normal.
        // ∂₁ log(ρ²/ρ⊗ρ) = (c x₂ − c² x₁)/(1 − c²), so Σᵢ E|∂ᵢ|² = 2c²/(1 − c²).
        let c: f64 = 0.5;
        let det = 1.0 - c * c;
        let n = 400;
        let g2 = Grid::new(2, -8.0, 8.0, n).unwrap();
        let f2 = DensityField::from_fn(g2, |x| {
            (-0.5 * (x[0] * x[0] - 2.0 * c * x[0] * x[1] + x[1] * x[1]) / det).exp()
                / (2.0 * std::f64::consts::PI * det.sqrt())
        })
        .unwrap();
        let rho = DensityField::from_fn(Grid::line(-8.0, 8.0, n).unwrap(), |x| {
            (-0.5 * x[0] * x[0]).exp() / (2.0 * std::f64::consts::PI).sqrt()
        })
        .unwrap();
        let r = dissipation_report(&f2, &rho, &KernelSpec::zero(1), 2.0).unwrap();
        let exact = 0.25 * 2.0 * 2.0 * c * c / det;
        assert!((r.fisher_term - exact).abs() < 1e-3 * exact, "{} vs {exact}", r.fisher_term);
    }

    #[test]
    fn fluctuation_of_a_product_matches_direct_sum() {
        let g = Grid::line(-5.0, 5.0, 40).unwrap();
        let rho = InitialDensity::gaussian(1, 0.0, 1.0).unwrap().discretize(&g).unwrap();
        let k = KernelSpec::odd_bump(0.5, 1.0).unwrap();
        let r = dissipation_report(&tensorize(&rho, 2).unwrap(), &rho, &k, 1.0).unwrap();
        let h = g.h();
        let kr = |x: f64| (0..40).map(|j| k.eval1(x - g.center(j)) * rho.at(j) * h).sum::<f64>();
        let mut direct = 0.0;
        for i in 0..40 {
            for j in 0..40 {
                let (x1, x2) = (g.center(i), g.center(j));
                let w = rho.at(i) * rho.at(j) * h * h;
                direct += w * ((0.5 * k.eval1(x1 - x2) - kr(x1)).powi(2) + (0.5 * k.eval1(x2 - x1) - kr(x2)).powi(2));
            }
        }
        assert!((r.fluctuation_term - direct).abs() < 1e-13);
        assert!(r.fluctuation_term > 0.0);
    }

    #[test]
    fn bound_uses_the_gronwall_rate() {
        let b = liouville_entropy_bound(0.25, 1.0, 0.5);
        let c = 16.0 * E * 0.25;
        assert!((b - c * 0.25 * (c * 0.5).exp()).abs() < 1e-9 * b);
    }
}
