//! Two-particle entropy study: the Liouville density against the tensor
//! square of the limit solution on the same common path.

use serde::{Deserialize, Serialize};

use crate::entropy::{
    ckp_check, dissipation_report, entropy_gronwall_rate, liouville_entropy_bound, relative_entropy,
    subadditivity_check, DEFAULT_SYMMETRY_TOL,
};
use crate::error::{Error, Result};
use crate::harness::config::StudyConfig;
use crate::model::builtin_library;
use crate::model::MatrixField;
use crate::sde::bundle::CommonPath;
use crate::seed::{stream_seed, Stream};
use crate::spde::field::Grid;
use crate::spde::liouville::{solve_liouville_2_with, LiouvilleOptions};
use crate::spde::picard::{default_tolerance, picard_solve};
use crate::spde::tensor::tensorize;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiouvilleRow {
    pub step: usize,
    pub t: f64,
    /// `H(ρ²_t | ρ_t ⊗ ρ_t)`.
    pub entropy: f64,
    pub ckp_margin: f64,
    /// `½H(ρ²|ρ⊗ρ) − H(ρ²'s marginal | ρ)`.
    pub subadditivity_margin: f64,
    pub fisher: f64,
    pub fluctuation: f64,
    /// `H(t) − H(0) + ∫₀ᵗ fisher − ∫₀ᵗ fluctuation` (trapezoid over the reported steps).
    pub residual: f64,
    /// `|mass(ρ²_t) − mass(ρ²_0)|`.
    pub mass_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiouvilleSeries {
    pub rows: Vec<LiouvilleRow>,
    pub sup_entropy: f64,
    /// `16e‖k‖_∞T²e^{CT}/δ`.
    pub bound: f64,
    pub gronwall_rate: f64,
    pub fingerprint: String,
    pub seed: u64,
}

impl LiouvilleSeries {
    pub fn worst_ckp_margin(&self) -> f64 {
        self.rows.iter().map(|r| r.ckp_margin).fold(f64::INFINITY, f64::min)
    }

    pub fn worst_subadditivity_margin(&self) -> f64 {
        self.rows.iter().map(|r| r.subadditivity_margin).fold(f64::INFINITY, f64::min)
    }

    pub fn max_residual(&self) -> f64 {
        self.rows.iter().map(|r| r.residual).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Runs both solvers on the common path `liouville.path` of the master seed.
pub fn liouville_study(cfg: &StudyConfig) -> Result<LiouvilleSeries> {
    cfg.check()?;
    let lib = builtin_library();
    let kernel = lib.kernel(&cfg.model.kernel)?;
    let mut coeffs = lib.coefficients(&cfg.model.sigma, &cfg.model.nu)?;
    if cfg.mode.nu_zero {
        let (d, mc) = (coeffs.dims.d, coeffs.dims.m_common);
        coeffs = coeffs.with_nu(MatrixField::Constant(nalgebra::DMatrix::zeros(d, mc)))?;
    }
    let initial = lib.initial(&cfg.model.initial)?;
    if coeffs.dims.d != 1 || initial.dim() != 1 {
        return Err(Error::OutOfScope("the two-particle study runs in d = 1".into()));
    }
    let time = cfg.resolve_time()?;
    let l = cfg.liouville;
    let grid = Grid::line(l.lo, l.hi, l.cells)?;
    let rho0 = initial.discretize(&grid)?;
    let seed = stream_seed(cfg.study.master_seed, Stream::Common, l.path);
    let w = CommonPath::generate(time, coeffs.dims.m_common, seed)?;
    let tol = cfg.picard.tol.unwrap_or_else(|| default_tolerance(&rho0));
    let rho = picard_solve(&kernel, &coeffs, &rho0, &w, time, tol, cfg.picard.max_iter)?;
    let opts = LiouvilleOptions { record_stride: l.record_stride, ..Default::default() };
    let two = solve_liouville_2_with(&kernel, &coeffs, &tensorize(&rho0, 2)?, &w, time, opts)?;
    let delta = coeffs.delta;
    let mass0 = rho0.mass().powi(2);
    let mut rows: Vec<LiouvilleRow> = Vec::with_capacity(two.recorded_steps().len());
    let (mut int_fisher, mut int_fluct) = (0.0, 0.0);
    for (&j, f2) in two.recorded_steps().iter().zip(two.fields()) {
        if (two.shift(j) - rho.shift(j)).abs() > 1e-12 {
            return Err(Error::GridMismatch(format!("frame shifts differ at step {j}")));
        }
        let g = rho.frame(j);
        let g2 = tensorize(g, 2)?;
        let h = relative_entropy(f2, &g2)?;
        let ckp = ckp_check(f2, &g2)?;
        let sub = subadditivity_check(f2, g, DEFAULT_SYMMETRY_TOL)?;
        let diss = dissipation_report(f2, g, &kernel, delta)?;
        if let Some(prev) = rows.last() {
            let dt = time.t(j) - prev.t;
            int_fisher += 0.5 * dt * (prev.fisher + diss.fisher_term);
            int_fluct += 0.5 * dt * (prev.fluctuation + diss.fluctuation_term);
        }
        let h0 = rows.first().map_or(h.value, |r| r.entropy);
        rows.push(LiouvilleRow {
            step: j,
            t: time.t(j),
            entropy: h.value,
            ckp_margin: ckp.margin,
            subadditivity_margin: sub.margin,
            fisher: diss.fisher_term,
            fluctuation: diss.fluctuation_term,
            residual: h.value - h0 + int_fisher - int_fluct,
            mass_error: (f2.mass() - mass0).abs(),
        });
    }
    let sup_entropy = rows.iter().map(|r| r.entropy).fold(0.0, f64::max);
    let k_sup = kernel.sup_norm();
    Ok(LiouvilleSeries {
        rows,
        sup_entropy,
        bound: liouville_entropy_bound(k_sup, delta, time.horizon()),
        gronwall_rate: entropy_gronwall_rate(k_sup, delta),
        fingerprint: w.fingerprint().to_string(),
        seed,
    })
}
