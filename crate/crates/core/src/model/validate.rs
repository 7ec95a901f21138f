use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::coeffs::{CoefficientSet, MatrixField};
use crate::model::init::InitialDensity;
use crate::spde::field::Grid;

/// Probe points, probe times and the central-difference step.
#[derive(Clone, Debug)]
pub struct ProbePlan {
    pub points: Vec<Vec<f64>>,
    pub times: Vec<f64>,
    pub h_fd: f64,
}

impl ProbePlan {
    /// Half lattice, half uniform-random points in `[-radius, radius]^d`,
    /// probed at `t ∈ {0, T/2, T}`, with `h_fd = 1e-4 · length_scale`.
    pub fn standard(dim: usize, radius: f64, count: usize, horizon: f64, length_scale: f64, seed: u64) -> Self {
        let mut points = Vec::with_capacity(count);
        let lattice = count / 2;
        match dim {
            1 => {
                for i in 0..lattice {
                    let u = if lattice > 1 { i as f64 / (lattice - 1) as f64 } else { 0.5 };
                    points.push(vec![-radius + 2.0 * radius * u]);
                }
            }
            _ => {
                let side = (lattice as f64).powf(1.0 / dim as f64).floor().max(1.0) as usize;
                let mut idx = vec![0usize; dim];
                for _ in 0..side.pow(dim as u32) {
                    points.push(
                        idx.iter()
                            .map(
                                |&i| if side > 1 { -radius + 2.0 * radius * i as f64 / (side - 1) as f64 } else { 0.0 },
                            )
                            .collect(),
                    );
                    for k in idx.iter_mut() {
                        *k += 1;
                        if *k < side {
                            break;
                        }
                        *k = 0;
                    }
                }
            }
        }
        let mut rng = crate::seed::rng(seed);
        while points.len() < count {
            points.push((0..dim).map(|_| rng.random_range(-radius..radius)).collect());
        }
        Self { points, times: vec![0.0, 0.5 * horizon, horizon], h_fd: 1e-4 * length_scale }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub worst: f64,
    pub worst_t: Option<f64>,
    pub worst_z: Option<Vec<f64>>,
}

/// Outcome of [`validate`]: the five structural coefficient checks followed
/// by the initial-density checks.
#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub tolerance: f64,
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub const STRUCTURAL_CHECKS: [&str; 5] =
    ["sigma_c1_bound", "nu_c1_bound", "nu_divergence_free", "diffusion_cancellation", "ellipticity"];
pub const INITIAL_CHECKS: [&str; 2] = ["initial_mass", "initial_second_moment"];

struct Worst {
    value: f64,
    t: Option<f64>,
    z: Option<Vec<f64>>,
}

impl Worst {
    fn new() -> Self {
        Self { value: 0.0, t: None, z: None }
    }
    fn update(&mut self, v: f64, t: f64, z: &[f64]) {
        if self.t.is_none() || v > self.value {
            self.value = v;
            self.t = Some(t);
            self.z = Some(z.to_vec());
        }
    }
    fn finish(self, name: &'static str, tol: f64) -> CheckResult {
        CheckResult { name, passed: self.value <= tol, worst: self.value, worst_t: self.t, worst_z: self.z }
    }
}

fn eval_checked(field: &MatrixField, what: &str, t: f64, z: &[f64]) -> Result<DMatrix<f64>> {
    let m = field.eval(t, z);
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteCoefficient { what: what.into(), t, z: z.to_vec() });
    }
    Ok(m)
}

/// Central-difference partial derivative of `f` along axis `beta`.
fn partial<F: Fn(&[f64]) -> Result<DMatrix<f64>>>(f: &F, z: &[f64], beta: usize, h: f64) -> Result<DMatrix<f64>> {
    let mut zp = z.to_vec();
    let mut zm = z.to_vec();
    zp[beta] += h;
    zm[beta] -= h;
    Ok((f(&zp)? - f(&zm)?) / (2.0 * h))
}

/// Probes the structural conditions on (σ, ν) and the moment conditions on
/// ρ₀. A check passes iff its worst violation is at most `tol`.
pub fn validate(
    coeffs: &CoefficientSet,
    rho0: &InitialDensity,
    probes: &ProbePlan,
    tol: f64,
) -> Result<ValidationReport> {
    if probes.points.is_empty() || probes.times.is_empty() {
        return Err(Error::invalid("probe plan is empty"));
    }
    if !(probes.h_fd > 0.0) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let d = coeffs.dims.d;
    if probes.points.iter().any(|p| p.len() != d) {
        return Err(Error::invalid(format!("probe points must be {d}-dimensional")));
    }
    let h = probes.h_fd;
    let c1 = coeffs.c1_bound;
    let mut sigma_c1 = Worst::new();
    let mut nu_c1 = Worst::new();
    let mut div = Worst::new();
    let mut cancel = Worst::new();
    let mut ellip = Worst::new();

    for &t in &probes.times {
        let sig = |z: &[f64]| eval_checked(&coeffs.sigma, "sigma", t, z);
        let nu = |z: &[f64]| eval_checked(&coeffs.nu, "nu", t, z);
        let sig_gram = |z: &[f64]| sig(z).map(|m| &m * m.transpose());
        let nu_gram = |z: &[f64]| nu(z).map(|m| &m * m.transpose());
        for z in &probes.points {
            let s = sig(z)?;
            let n = nu(z)?;
            let mut s_excess = s.iter().map(|v| v.abs() - c1).fold(0.0, f64::max);
            let mut n_excess = n.iter().map(|v| v.abs() - c1).fold(0.0, f64::max);
            let mut divergence = vec![0.0; coeffs.dims.m_common];
            let mut cancel_s = vec![0.0; d];
            let mut cancel_n = vec![0.0; d];
            for beta in 0..d {
                let ds = partial(&sig, z, beta, h)?;
                let dn = partial(&nu, z, beta, h)?;
                s_excess = ds.iter().map(|v| v.abs() - c1).fold(s_excess, f64::max);
                n_excess = dn.iter().map(|v| v.abs() - c1).fold(n_excess, f64::max);
                for (l, dv) in divergence.iter_mut().enumerate() {
                    *dv += dn[(beta, l)];
                }
                let dsg = partial(&sig_gram, z, beta, h)?;
                let dng = partial(&nu_gram, z, beta, h)?;
                for alpha in 0..d {
                    cancel_s[alpha] += dsg[(alpha, beta)];
                    cancel_n[alpha] += dng[(alpha, beta)];
                }
            }
            sigma_c1.update(s_excess, t, z);
            nu_c1.update(n_excess, t, z);
            div.update(divergence.iter().map(|v| v.abs()).fold(0.0, f64::max), t, z);
            let c = cancel_s.iter().chain(&cancel_n).map(|v| v.abs()).fold(0.0, f64::max);
            cancel.update(c, t, z);
            let gram = &s * s.transpose();
            let lmin = if d == 1 { gram[(0, 0)] } else { gram.symmetric_eigenvalues().min() };
            ellip.update((coeffs.delta - lmin).max(0.0), t, z);
        }
    }

    let mut checks = vec![
        sigma_c1.finish(STRUCTURAL_CHECKS[0], tol),
        nu_c1.finish(STRUCTURAL_CHECKS[1], tol),
        div.finish(STRUCTURAL_CHECKS[2], tol),
        cancel.finish(STRUCTURAL_CHECKS[3], tol),
        ellip.finish(STRUCTURAL_CHECKS[4], tol),
    ];

    // initial density: quadrature on a box wide enough for its second moment
    let (mass, m2) = match rho0 {
        InitialDensity::Tabulated(f) => (f.mass(), f.second_moment()),
        _ => {
            let half = 12.0 * rho0.second_moment().sqrt() + 1.0;
            let cells = if rho0.dim() == 1 { 8192 } else { 512 };
            let grid = Grid::new(rho0.dim(), -half, half, cells)?;
            let f = rho0.discretize(&grid)?;
            let hh = grid.h();
            // cell-average midpoint rule overstates the moment by d·h²/12
            (f.mass(), f.second_moment() - rho0.dim() as f64 * hh * hh / 12.0)
        }
    };
    let mass_violation = if mass.is_finite() { (mass - 1.0).abs() } else { f64::INFINITY };
    let m2_violation = if m2.is_finite() && rho0.second_moment().is_finite() {
        (m2 - rho0.second_moment()).abs() / rho0.second_moment().max(1.0)
    } else {
        f64::INFINITY
    };
    for (name, v) in INITIAL_CHECKS.iter().zip([mass_violation, m2_violation]) {
        checks.push(CheckResult { name, passed: v <= tol, worst: v, worst_t: None, worst_z: None });
    }
    Ok(ValidationReport { tolerance: tol, checks })
}
