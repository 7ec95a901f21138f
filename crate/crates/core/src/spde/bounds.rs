//! A-priori caps on the L² norm and the second moment.

use serde::Serialize;

use crate::spde::linear::Diagnostics;

/// `exp((2‖k‖²_∞ + C)T)^{1/2}·‖ρ₀‖_{L²}` with `C = d²L²/(2δ)`, where `L`
/// bounds the first derivatives of `σσᵀ + ννᵀ` (zero for constant coefficients).
pub fn l2_cap(kernel_sup: f64, d: usize, delta: f64, coeff_lip: f64, horizon: f64, rho0_l2: f64) -> f64 {
    let c = (d * d) as f64 * coeff_lip * coeff_lip / (2.0 * delta);
    ((2.0 * kernel_sup * kernel_sup + c) * horizon).exp().sqrt() * rho0_l2
}

/// Pathwise second-moment cap
/// `(√m₂(0) + ‖k‖_∞T + √(tr σσᵀ·T) + sup_t |S_t|)²`, where `S` is the
/// common-noise displacement; each term bounds one part of the particle
/// increment in conditional L².
pub fn moment_cap(m2_0: f64, kernel_sup: f64, horizon: f64, sigma_trace_sup: f64, common_sup: f64) -> f64 {
    (m2_0.sqrt() + kernel_sup * horizon + (sigma_trace_sup * horizon).sqrt() + common_sup).powi(2)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Caps {
    pub l2_cap: f64,
    pub moment_cap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub quantity: &'static str,
    pub step: usize,
    pub t: f64,
    pub value: f64,
    pub cap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundsReport {
    pub sup_l2: f64,
    pub sup_m2: f64,
    pub caps: Caps,
    pub first_violation: Option<Violation>,
}

impl BoundsReport {
    pub fn passed(&self) -> bool {
        self.first_violation.is_none()
    }
}

pub fn diagnostics_check(diag: &Diagnostics, caps: Caps) -> BoundsReport {
    let mut first = None;
    for j in 0..diag.t.len() {
        let v = if diag.l2[j] > caps.l2_cap {
            Some(("l2", diag.l2[j], caps.l2_cap))
        } else if diag.m2[j] > caps.moment_cap {
            Some(("second_moment", diag.m2[j], caps.moment_cap))
        } else {
            None
        };
        if let Some((quantity, value, cap)) = v {
            first = Some(Violation { quantity, step: j, t: diag.t[j], value, cap });
            break;
        }
    }
    BoundsReport {
        sup_l2: diag.l2.iter().fold(0.0, |a, b| a.max(*b)),
        sup_m2: diag.m2.iter().fold(0.0, |a, b| a.max(*b)),
        caps,
        first_violation: first,
    }
}

/// Whether the L² trajectory never increases by more than `tol`.
pub fn l2_nonincreasing(diag: &Diagnostics, tol: f64) -> bool {
    diag.l2.windows(2).all(|w| w[1] <= w[0] + tol)
}
