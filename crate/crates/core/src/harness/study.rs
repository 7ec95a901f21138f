//! Rate studies: for each particle count `N` and common-noise replicate,
//! compare the particle cloud with the limit solution on the same path.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entropy::{ckp_check, fluctuation_term, l1_distance, relative_entropy};
use crate::error::{Error, Result};
use crate::harness::config::{Model, StudyConfig};
use crate::harness::rate::{fit_rate, RateFit};
use crate::sde::bundle::make_bundle;
use crate::sde::density::empirical_density;
use crate::sde::particles::simulate_particles;
use crate::seed::{derive, stream_seed, Stream};
use crate::spde::picard::{default_tolerance, picard_solve};

/// Largest fraction of failed rows for a valid study.
pub const MAX_FAILED_FRACTION: f64 = 0.2;

pub const SUP_CAVEAT: &str = "sup over time is taken over the configured checkpoints only; \
the gap to the supremum over [0, T] is not quantified";

/// Seed of replicate `rep` at particle count `n`: master → study → N → replicate.
pub fn replicate_seed(master: u64, n: usize, rep: usize) -> u64 {
    derive(stream_seed(master, Stream::Study, n as u64), rep as u64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    Failed,
}

/// One `(N, replicate)` result. Timing lives outside the row so that rows are
/// reproducible byte for byte.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub n: usize,
    pub rep: usize,
    pub seed: u64,
    pub fingerprint: String,
    pub config_hash: String,
    /// `max_j ‖ρ̂^N_{t_j} − ρ_{t_j}‖²_{L¹}` over the checkpoints.
    pub sup_l1_sq: Option<f64>,
    /// Time at which the maximum is attained.
    pub sup_time: Option<f64>,
    /// `‖ρ̂^N_T − ρ_T‖_{L¹}`.
    pub final_l1: Option<f64>,
    /// Largest fraction of particles outside the grid box at a checkpoint.
    pub outside_fraction: Option<f64>,
    /// `H(ρ̂^N_T | ρ_T)` for the density estimate.
    pub entropy_t: Option<f64>,
    pub ckp_margin_t: Option<f64>,
    /// `(N/δ)·mean_i |N⁻¹Σⱼk(xᵢ−xⱼ) − (k*ρ_T)(xᵢ)|²` at `T`.
    pub fluctuation_t: Option<f64>,
    pub fluctuation_se: Option<f64>,
    pub picard_iterations: Option<usize>,
    pub status: RowStatus,
    pub error: String,
}

#[derive(Clone, Copy, Debug, Default)]
struct Measured {
    sup_l1_sq: f64,
    sup_time: f64,
    final_l1: f64,
    outside: f64,
    entropy_t: Option<f64>,
    ckp_margin_t: Option<f64>,
    fluctuation: Option<(f64, f64)>,
    iterations: usize,
}

/// Runs the full pipeline for one `(N, replicate)`; stage errors are recorded
/// in the row. Returns the row and its wall time in milliseconds.
pub fn run_replicate(cfg: &StudyConfig, model: &Model, n: usize, rep: usize) -> (Row, f64) {
    let start = Instant::now();
    let seed = replicate_seed(cfg.study.master_seed, n, rep);
    let mut row = Row {
        n,
        rep,
        seed,
        fingerprint: String::new(),
        config_hash: cfg.hash(),
        sup_l1_sq: None,
        sup_time: None,
        final_l1: None,
        outside_fraction: None,
        entropy_t: None,
        ckp_margin_t: None,
        fluctuation_t: None,
        fluctuation_se: None,
        picard_iterations: None,
        status: RowStatus::Failed,
        error: String::new(),
    };
    match pipeline(cfg, model, n, seed, &mut row.fingerprint) {
        Ok(m) => {
            row.sup_l1_sq = Some(m.sup_l1_sq);
            row.sup_time = Some(m.sup_time);
            row.final_l1 = Some(m.final_l1);
            row.outside_fraction = Some(m.outside);
            row.entropy_t = m.entropy_t;
            row.ckp_margin_t = m.ckp_margin_t;
            row.fluctuation_t = m.fluctuation.map(|f| f.0);
            row.fluctuation_se = m.fluctuation.map(|f| f.1);
            row.picard_iterations = Some(m.iterations);
            row.status = RowStatus::Ok;
        }
        Err(e) => row.error = e.to_string(),
    }
    (row, start.elapsed().as_secs_f64() * 1e3)
}

fn pipeline(cfg: &StudyConfig, model: &Model, n: usize, seed: u64, fingerprint: &mut String) -> Result<Measured> {
    let time = model.time;
    let dims = model.coeffs.dims;
    let bundle = make_bundle(time, n, (dims.m, dims.m_common), seed)?;
    *fingerprint = bundle.common.fingerprint().to_string();
    let tol = cfg.picard.tol.unwrap_or_else(|| default_tolerance(&model.rho0));
    let rho = picard_solve(&model.kernel, &model.coeffs, &model.rho0, &bundle.common, time, tol, cfg.picard.max_iter)?;
    if rho.fingerprint() != bundle.common.fingerprint() {
        return Err(Error::FingerprintMismatch {
            solution: rho.fingerprint().to_string(),
            bundle: bundle.common.fingerprint().to_string(),
        });
    }
    let traj = simulate_particles(&model.kernel, &model.coeffs, &model.initial, &bundle, time)?;
    let method = cfg.density.method();
    let mut m = Measured { iterations: rho.increments.len(), ..Default::default() };
    let checkpoints = time.checkpoints(cfg.study.checkpoints);
    let last = *checkpoints.last().expect("at least two checkpoints");
    for &j in &checkpoints {
        let pts = rho.to_frame(j, traj.at(j));
        let emp = empirical_density(&pts, 1, &model.grid, method)?;
        let outside = emp.outside as f64 / emp.total as f64;
        let l1 = l1_distance(&emp.field, rho.frame(j))? + outside;
        m.outside = m.outside.max(outside);
        if l1 * l1 > m.sup_l1_sq || j == 0 {
            m.sup_l1_sq = l1 * l1;
            m.sup_time = time.t(j);
        }
        if j == last {
            m.final_l1 = l1;
            if cfg.study.diagnostics {
                let h = relative_entropy(&emp.field, rho.frame(j))?;
                m.entropy_t = h.is_finite().then_some(h.value);
                m.ckp_margin_t = Some(ckp_check(&emp.field, rho.frame(j))?.margin).filter(|v| v.is_finite());
                let f = fluctuation_term(&pts, 1, &model.kernel, rho.frame(j), model.coeffs.delta)?;
                m.fluctuation = Some((f.value, f.stderr));
            }
        }
    }
    Ok(m)
}

/// Per-`N` aggregate over successful rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NSummary {
    pub n: usize,
    pub mean_sup_l1_sq: f64,
    pub stderr: f64,
    pub ok: usize,
    pub failed: usize,
    pub mean_fluctuation: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config_hash: String,
    pub per_n: Vec<NSummary>,
    pub fit: Option<RateFit>,
    pub fit_error: Option<String>,
    pub failed_rows: usize,
    pub total_rows: usize,
    pub valid: bool,
    pub caveat: String,
}

#[derive(Clone, Debug)]
pub struct StudyResult {
    pub rows: Vec<Row>,
    /// Wall time per row in milliseconds, aligned with `rows`.
    pub row_ms: Vec<f64>,
    pub summary: Summary,
}

/// Mean and standard error; the sum runs over sorted values so the result
/// does not depend on replicate order.
fn mean_stderr(values: &mut [f64]) -> (f64, f64) {
    values.sort_by(f64::total_cmp);
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

/// Aggregates rows into per-`N` means and the rate fit.
pub fn summarize(config_hash: &str, particles: &[usize], rows: &[Row]) -> Summary {
    let per_n: Vec<NSummary> = particles
        .iter()
        .map(|&n| {
            let mut vals: Vec<f64> = rows.iter().filter(|r| r.n == n).filter_map(|r| r.sup_l1_sq).collect();
            let failed = rows.iter().filter(|r| r.n == n && r.status == RowStatus::Failed).count();
            let (mean, stderr) = if vals.is_empty() { (f64::NAN, f64::NAN) } else { mean_stderr(&mut vals) };
            let mut fl: Vec<f64> = rows.iter().filter(|r| r.n == n).filter_map(|r| r.fluctuation_t).collect();
            let mean_fluctuation = (!fl.is_empty()).then(|| mean_stderr(&mut fl).0);
            NSummary { n, mean_sup_l1_sq: mean, stderr, ok: vals.len(), failed, mean_fluctuation }
        })
        .collect();
    let failed_rows = rows.iter().filter(|r| r.status == RowStatus::Failed).count();
    let points: Vec<(f64, f64)> = per_n.iter().filter(|s| s.ok > 0).map(|s| (s.n as f64, s.mean_sup_l1_sq)).collect();
    let (fit, fit_error) = match fit_rate(&points) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let valid = (failed_rows as f64) <= MAX_FAILED_FRACTION * rows.len() as f64 && fit.is_some();
    Summary {
        config_hash: config_hash.to_string(),
        per_n,
        fit,
        fit_error,
        failed_rows,
        total_rows: rows.len(),
        valid,
        caveat: SUP_CAVEAT.to_string(),
    }
}

/// Runs every `(N, replicate)` row in parallel and aggregates.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyResult> {
    cfg.check()?;
    let model = cfg.resolve()?;
    let tasks: Vec<(usize, usize)> =
        cfg.study.particles.iter().flat_map(|&n| (0..cfg.study.replicates).map(move |r| (n, r))).collect();
    let out: Vec<(Row, f64)> = tasks.par_iter().map(|&(n, r)| run_replicate(cfg, &model, n, r)).collect();
    let (rows, row_ms): (Vec<Row>, Vec<f64>) = out.into_iter().unzip();
    let summary = summarize(&cfg.hash(), &cfg.study.particles, &rows);
    Ok(StudyResult { rows, row_ms, summary })
}
