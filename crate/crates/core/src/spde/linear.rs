//! Pathwise solver for the linear conditional Fokker–Planck equation in d = 1.
//!
//! Constant common-noise coefficients are handled in the frame moving with
//! the common noise: the stored field is `ρ_t(ξ + S_t)` with
//! `S_t = Σ_l ν_l W^l_t`, which turns the stochastic transport and its Itô
//! correction into an exact relabelling. Norms, mass and the convolution
//! `k * ρ` are translation invariant, so they are computed on the frame field
//! directly. Lab-frame fields are produced on demand by
//! [`SpdeSolution::lab`].
//!
//! Each step applies upwind advection with the drift velocity, then (for
//! non-constant ν only) explicit upwind stochastic transport, then backward
//! Euler diffusion with zero-flux walls.

use std::io::Write;

use crate::error::{Error, Result};
use crate::model::coeffs::CoefficientSet;
use crate::sde::bundle::CommonPath;
use crate::sde::time::TimeGrid;
use crate::spde::conv::Convolver;
use crate::spde::field::{DensityField, Grid};

/// State handed to a [`Drift`] when it computes the velocity for one step.
pub struct FrameView<'a> {
    pub grid: &'a Grid,
    pub step: usize,
    pub t: f64,
    /// `S_{t_j}`; lab coordinate of a frame point is `ξ + shift`.
    pub shift: f64,
    /// Frame field at `t_j`.
    pub current: &'a [f64],
}

/// Velocity field of the linear equation, sampled at the `cells + 1` faces.
pub trait Drift: Sync {
    /// Upper bound of |velocity| over the run; checked against the CFL limit up front.
    fn bound(&self) -> f64;
    fn velocity(&self, view: &FrameView<'_>, out: &mut [f64]) -> Result<()>;
}

pub struct NoDrift;

impl Drift for NoDrift {
    fn bound(&self) -> f64 {
        0.0
    }
    fn velocity(&self, _: &FrameView<'_>, out: &mut [f64]) -> Result<()> {
        out.iter_mut().for_each(|v| *v = 0.0);
        Ok(())
    }
}

/// Face velocities given explicitly per step (frame coordinates).
pub struct TabulatedDrift {
    pub faces: Vec<Vec<f64>>,
}

impl Drift for TabulatedDrift {
    fn bound(&self) -> f64 {
        self.faces.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
    fn velocity(&self, view: &FrameView<'_>, out: &mut [f64]) -> Result<()> {
        let row = self
            .faces
            .get(view.step)
            .ok_or_else(|| Error::invalid(format!("no tabulated drift for step {}", view.step)))?;
        if row.len() != out.len() {
            return Err(Error::GridMismatch(format!("{} face velocities for {} faces", row.len(), out.len())));
        }
        out.copy_from_slice(row);
        Ok(())
    }
}

/// Velocity `−(k * ρ̄_{t_j})` for a given density path `ρ̄` on the same frame.
pub struct FrozenConvolution<'a> {
    pub conv: &'a Convolver,
    pub path: &'a [DensityField],
    pub kernel_sup: f64,
}

impl Drift for FrozenConvolution<'_> {
    fn bound(&self) -> f64 {
        let mass = self.path.iter().fold(0.0_f64, |m, f| m.max(f.mass()));
        self.kernel_sup * mass
    }
    fn velocity(&self, view: &FrameView<'_>, out: &mut [f64]) -> Result<()> {
        let f = self.path.get(view.step).ok_or_else(|| Error::invalid("density path shorter than the time grid"))?;
        self.conv.apply(f.values(), out);
        out.iter_mut().for_each(|v| *v = -*v);
        Ok(())
    }
}

/// Velocity `−(k * ρ_{t_j})` from the solution itself (explicit nonlinear scheme).
pub struct SelfConsistent<'a> {
    pub conv: &'a Convolver,
    pub kernel_sup: f64,
    pub mass: f64,
}

impl Drift for SelfConsistent<'_> {
    fn bound(&self) -> f64 {
        self.kernel_sup * self.mass
    }
    fn velocity(&self, view: &FrameView<'_>, out: &mut [f64]) -> Result<()> {
        self.conv.apply(view.current, out);
        out.iter_mut().for_each(|v| *v = -*v);
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SolverOptions {
    /// Largest admissible `|v|·dt/h`.
    pub cfl_limit: f64,
    /// Cells below `−negative_tol` abort the run.
    pub negative_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { cfl_limit: 0.5, negative_tol: 1e-12 }
    }
}

/// Per-step diagnostics; index `j` refers to `t_j`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Diagnostics {
    pub t: Vec<f64>,
    pub mass: Vec<f64>,
    pub l2: Vec<f64>,
    /// Lab-frame second moment `∫ |x|² ρ_t(x) dx`.
    pub m2: Vec<f64>,
    pub min: Vec<f64>,
    /// Cumulative mass the zero-flux walls held back (what an open box would have lost).
    pub boundary_flux: Vec<f64>,
    /// Largest number of stochastic-transport sub-steps used in a single step.
    pub max_substeps: usize,
}

impl Diagnostics {
    pub(crate) fn push(&mut self, t: f64, field: &DensityField, shift: f64, flux: f64) {
        self.t.push(t);
        self.mass.push(field.mass());
        self.l2.push(field.l2_norm());
        self.m2.push(field.second_moment_shifted(shift));
        self.min.push(field.min());
        self.boundary_flux.push(flux);
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,mass,l2,m2,min")?;
        for j in 0..self.t.len() {
            writeln!(w, "{},{},{},{},{}", self.t[j], self.mass[j], self.l2[j], self.m2[j], self.min[j])?;
        }
        Ok(())
    }

    /// Largest `|mass_j − mass_0|` minus the recorded boundary flux up to `j`; ≤ 0 means fully accounted.
    pub fn unaccounted_mass_drift(&self) -> f64 {
        let m0 = self.mass.first().copied().unwrap_or(0.0);
        self.mass.iter().zip(&self.boundary_flux).fold(f64::NEG_INFINITY, |a, (m, f)| a.max((m - m0).abs() - f))
    }
}

/// Solution of the 1-D equation along one common-noise path.
#[derive(Clone, Debug)]
pub struct SpdeSolution {
    pub(crate) time: TimeGrid,
    pub(crate) grid: Grid,
    pub(crate) frames: Vec<DensityField>,
    pub(crate) shifts: Vec<f64>,
    pub(crate) fingerprint: String,
    pub diagnostics: Diagnostics,
    /// `sup_t ‖ρⁿ_t − ρⁿ⁻¹_t‖_{L²}` per Picard iteration; empty for a single linear solve.
    pub increments: Vec<f64>,
}

impl SpdeSolution {
    pub fn time(&self) -> TimeGrid {
        self.time
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Field at `t_j` in the moving frame, `ξ ↦ ρ_{t_j}(ξ + shift(j))`.
    pub fn frame(&self, j: usize) -> &DensityField {
        &self.frames[j]
    }

    pub fn frames(&self) -> &[DensityField] {
        &self.frames
    }

    pub fn shift(&self, j: usize) -> f64 {
        self.shifts[j]
    }

    pub fn shifts(&self) -> &[f64] {
        &self.shifts
    }

    /// Whether the frame ever moves (constant, nonzero ν).
    pub fn is_moving_frame(&self) -> bool {
        self.shifts.iter().any(|s| *s != 0.0)
    }

    /// `ρ_{t_j}` on the fixed grid, with the mass pushed outside the box.
    pub fn lab(&self, j: usize) -> (DensityField, f64) {
        self.frames[j].translated(self.shifts[j])
    }

    /// Fingerprint of the common path the solution was computed on.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    /// Lab positions expressed in frame coordinates at `t_j`.
    pub fn to_frame(&self, j: usize, lab_positions: &[f64]) -> Vec<f64> {
        let s = self.shifts[j];
        lab_positions.iter().map(|x| x - s).collect()
    }
}

/// Accumulated frame shifts `S_j = Σ_l ν_l W^l_{t_j}` for constant ν, or zeros.
pub(crate) fn frame_shifts(coeffs: &CoefficientSet, w: &CommonPath) -> Vec<f64> {
    let steps = w.grid().steps();
    match coeffs.nu.as_constant() {
        Some(nu) => (0..=steps)
            .map(|j| {
                let wj = w.at(j);
                (0..nu.ncols()).map(|l| nu[(0, l)] * wj[l]).sum()
            })
            .collect(),
        None => vec![0.0; steps + 1],
    }
}

pub(crate) fn check_inputs(coeffs: &CoefficientSet, rho0: &DensityField, w: &CommonPath, time: TimeGrid) -> Result<()> {
    if coeffs.dims.d != 1 || rho0.grid().dim != 1 {
        return Err(Error::OutOfScope("the Fokker–Planck solver is implemented for d = 1".into()));
    }
    if w.grid() != time {
        return Err(Error::invalid("common path and solver use different time grids"));
    }
    if w.dim() != coeffs.dims.m_common {
        return Err(Error::invalid(format!(
            "common path has dimension {}, ν has {} columns",
            w.dim(),
            coeffs.dims.m_common
        )));
    }
    Ok(())
}

/// Upwind finite-volume update with zero-flux walls; returns the density (per unit
/// length) the walls held back.
pub(crate) fn upwind(rho: &mut [f64], vel: &[f64], c: f64, tmp: &mut Vec<f64>) -> f64 {
    let n = rho.len();
    tmp.clear();
    tmp.extend_from_slice(rho);
    for i in 0..n {
        let right = if i + 1 < n { vel[i + 1] } else { 0.0 };
        let left = if i > 0 { vel[i] } else { 0.0 };
        let out = c * (right.max(0.0) + (-left).max(0.0));
        let mut inflow = 0.0;
        if i > 0 {
            inflow += c * left.max(0.0) * tmp[i - 1];
        }
        if i + 1 < n {
            inflow += c * (-right).max(0.0) * tmp[i + 1];
        }
        rho[i] = tmp[i] * (1.0 - out) + inflow;
    }
    c * ((-vel[0]).max(0.0) * tmp[0] + vel[n].max(0.0) * tmp[n - 1])
}

/// Backward Euler for `∂_t ρ = ½ ∂²(a ρ)` with zero-flux walls; `lambda = dt/(2h²)`.
///
/// The matrix has unit column sums and is an M-matrix, so mass and
/// positivity are preserved.
pub(crate) fn implicit_diffusion(rho: &mut [f64], a: &[f64], lambda: f64, cp: &mut Vec<f64>) {
    let n = rho.len();
    cp.clear();
    cp.resize(n, 0.0);
    let diag = |i: usize| {
        let nb = if i == 0 || i == n - 1 { 1.0 } else { 2.0 };
        1.0 + lambda * a[i] * nb
    };
    // Thomas algorithm; lower(i) = upper(i-1)-style entries are −λ a_{i∓1}.
    let mut denom = diag(0);
    cp[0] = -lambda * a[1] / denom;
    rho[0] /= denom;
    for i in 1..n {
        let lower = -lambda * a[i - 1];
        denom = diag(i) - lower * cp[i - 1];
        if i + 1 < n {
            cp[i] = -lambda * a[i + 1] / denom;
        }
        rho[i] = (rho[i] - lower * rho[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        rho[i] -= cp[i] * rho[i + 1];
    }
}

/// Solves the linear equation with the given drift along the common path `w`.
pub fn solve_linear_fpk(
    drift: &dyn Drift,
    coeffs: &CoefficientSet,
    rho0: &DensityField,
    w: &CommonPath,
    time: TimeGrid,
) -> Result<SpdeSolution> {
    solve_linear_fpk_with(drift, coeffs, rho0, w, time, SolverOptions::default())
}

pub fn solve_linear_fpk_with(
    drift: &dyn Drift,
    coeffs: &CoefficientSet,
    rho0: &DensityField,
    w: &CommonPath,
    time: TimeGrid,
    opts: SolverOptions,
) -> Result<SpdeSolution> {
    check_inputs(coeffs, rho0, w, time)?;
    let grid = rho0.grid().clone();
    let (n, h, dt) = (grid.cells, grid.h(), time.dt());
    let courant = drift.bound() * dt / h;
    if !(courant <= opts.cfl_limit) {
        return Err(Error::Stability { step: 0, courant, limit: opts.cfl_limit });
    }
    let shifts = frame_shifts(coeffs, w);
    let nu_const = coeffs.nu.as_constant().is_some();
    let centers = grid.centers();
    let diffusivity = |t: f64, s: f64, out: &mut Vec<f64>| {
        out.clear();
        for &xi in &centers {
            let x = xi + s;
            let mut a = coeffs.sigma_sq_1d(t, x);
            if !nu_const {
                a += coeffs.nu.gram(t, &[x])[(0, 0)];
            }
            out.push(a);
        }
    };
    let constant_a = coeffs.sigma_is_constant() && nu_const;
    let mut a = Vec::with_capacity(n);
    diffusivity(0.0, 0.0, &mut a);

    let mut rho = rho0.values().to_vec();
    let mut frames = Vec::with_capacity(time.steps() + 1);
    let mut diag = Diagnostics::default();
    let mut flux = 0.0;
    diag.push(0.0, rho0, 0.0, 0.0);
    frames.push(rho0.clone());
    let (mut vel, mut tmp, mut cp) = (vec![0.0; n + 1], Vec::with_capacity(n), Vec::with_capacity(n));
    let faces: Vec<f64> = (0..=n).map(|p| grid.face(p)).collect();
    let lambda = dt / (2.0 * h * h);

    for j in 0..time.steps() {
        let t = time.t(j);
        let view = FrameView { grid: &grid, step: j, t, shift: shifts[j], current: &rho };
        drift.velocity(&view, &mut vel)?;
        let vmax = vel.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let c = vmax * dt / h;
        if !(c <= opts.cfl_limit) {
            return Err(Error::Stability { step: j, courant: c, limit: opts.cfl_limit });
        }
        if vmax > 0.0 {
            flux += h * upwind(&mut rho, &vel, dt / h, &mut tmp);
        }

        if !nu_const {
            for (v, &x) in vel.iter_mut().zip(&faces) {
                let nu = coeffs.nu.eval(t, &[x]);
                *v = (0..nu.ncols()).map(|l| nu[(0, l)] * w.increment(j, l)).sum::<f64>();
            }
            let umax = vel.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            let sub = ((umax / h) / opts.cfl_limit).ceil().max(1.0) as usize;
            diag.max_substeps = diag.max_substeps.max(sub);
            for _ in 0..sub {
                flux += h * upwind(&mut rho, &vel, 1.0 / (sub as f64 * h), &mut tmp);
            }
        }

        if !constant_a {
            diffusivity(time.t(j + 1), shifts[j + 1], &mut a);
        }
        let edge = 0.5 * dt * (a[0] * rho[0] + a[n - 1] * rho[n - 1]);
        implicit_diffusion(&mut rho, &a, lambda, &mut cp);
        flux += edge;

        if let Some((cell, &value)) = rho.iter().enumerate().find(|(_, v)| !(**v >= -opts.negative_tol)) {
            return Err(Error::NegativeDensity { step: j + 1, cell, value });
        }
        rho.iter_mut().for_each(|v| *v = v.max(0.0));
        let field = DensityField::from_raw(grid.clone(), rho.clone());
        diag.push(time.t(j + 1), &field, shifts[j + 1], flux);
        frames.push(field);
    }

    Ok(SpdeSolution {
        time,
        grid,
        frames,
        shifts,
        fingerprint: w.fingerprint().to_string(),
        diagnostics: diag,
        increments: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::coeffs::MatrixField;
    use crate::model::init::InitialDensity;
    use crate::quad::normal_cdf;
    use nalgebra::DMatrix;

    fn gaussian_cells(grid: &Grid, mean: f64, var: f64) -> Vec<f64> {
        (0..grid.cells)
            .map(|i| (normal_cdf(grid.face(i + 1), mean, var) - normal_cdf(grid.face(i), mean, var)) / grid.h())
            .collect()
    }

    fn l1(a: &[f64], b: &[f64], h: f64) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() * h
    }

    fn setup(cells: usize, nu: f64, seed: u64) -> (CoefficientSet, DensityField, CommonPath, TimeGrid) {
        let grid = Grid::line(-8.0, 8.0, cells).unwrap();
        let time = TimeGrid::new(0.5, 500).unwrap();
        let c = CoefficientSet::constant_isotropic(1, 1.0, nu).unwrap();
        let rho0 = InitialDensity::gaussian(1, 0.0, 0.01).unwrap().discretize(&grid).unwrap();
        (c, rho0, CommonPath::generate(time, 1, seed).unwrap(), time)
    }

    #[test]
    fn heat_flow_matches_the_gaussian_kernel() {
        let (c, rho0, w, time) = setup(512, 0.0, 1);
        let sol = solve_linear_fpk(&NoDrift, &c, &rho0, &w, time).unwrap();
        let exact = gaussian_cells(rho0.grid(), 0.0, 0.51);
        let err = l1(sol.frame(500).values(), &exact, rho0.grid().h());
        assert!(err <= 5e-3, "{err}");
    }

    #[test]
    fn constant_common_noise_shifts_the_gaussian() {
        for seed in [3, 4] {
            let (c, rho0, w, time) = setup(512, 1.0, seed);
            let sol = solve_linear_fpk(&NoDrift, &c, &rho0, &w, time).unwrap();
            let (lab, lost) = sol.lab(500);
            assert!(lost < 1e-12);
            let exact = gaussian_cells(rho0.grid(), w.at(500)[0], 0.51);
            let err = l1(lab.values(), &exact, rho0.grid().h());
            assert!(err <= 1e-2, "seed {seed}: {err}");
            assert_eq!(sol.fingerprint(), w.fingerprint());
        }
    }

    #[test]
    fn mass_is_conserved_and_cells_stay_nonnegative() {
        let (c, rho0, w, time) = setup(256, 1.0, 5);
        let drift = TabulatedDrift {
            faces: (0..500).map(|j| (0..=256).map(|p| ((p + j) as f64 * 0.1).sin() * 3.0).collect()).collect(),
        };
        let sol = solve_linear_fpk(&drift, &c, &rho0, &w, time).unwrap();
        let d = &sol.diagnostics;
        assert_eq!(sol.frames().len(), 501);
        assert!(d.mass.iter().all(|m| (m - 1.0).abs() < 1e-10));
        assert!(d.min.iter().all(|m| *m >= 0.0));
        assert!(d.unaccounted_mass_drift() <= 1e-12);
    }

    #[test]
    fn common_noise_only_relabels_the_solution() {
        let (c0, rho0, w, time) = setup(256, 0.0, 6);
        let (c1, _, _, _) = setup(256, 1.0, 6);
        let a = solve_linear_fpk(&NoDrift, &c0, &rho0, &w, time).unwrap();
        let b = solve_linear_fpk(&NoDrift, &c1, &rho0, &w, time).unwrap();
        assert_eq!(a.frames(), b.frames());
        assert_eq!(b.shift(500), w.at(500)[0]);
        let (lab, _) = b.lab(500);
        let (shifted, _) = a.frame(500).translated(w.at(500)[0]);
        assert_eq!(lab, shifted);
    }

    #[test]
    fn l2_trajectory_does_not_depend_on_the_common_path() {
        let (c, rho0, w1, time) = setup(256, 1.0, 7);
        let w2 = CommonPath::generate(time, 1, 8).unwrap();
        let a = solve_linear_fpk(&NoDrift, &c, &rho0, &w1, time).unwrap();
        let b = solve_linear_fpk(&NoDrift, &c, &rho0, &w2, time).unwrap();
        for (x, y) in a.diagnostics.l2.iter().zip(&b.diagnostics.l2) {
            assert!((x - y).abs() <= 1e-8);
        }
        assert!(a.diagnostics.l2.windows(2).all(|w| w[1] <= w[0] + 1e-15));
    }

    #[test]
    fn reruns_are_bit_identical() {
        let (c, rho0, w, time) = setup(128, 1.0, 9);
        let drift = TabulatedDrift { faces: vec![vec![0.3; 129]; 500] };
        let a = solve_linear_fpk(&drift, &c, &rho0, &w, time).unwrap();
        let b = solve_linear_fpk(&drift, &c, &rho0, &w, time).unwrap();
        assert_eq!(a.frames(), b.frames());
        assert_eq!(a.diagnostics, b.diagnostics);
    }

    #[test]
    fn cfl_violation_is_reported() {
        let (c, rho0, w, time) = setup(128, 0.0, 1);
        let drift = TabulatedDrift { faces: vec![vec![200.0; 129]; 500] };
        let err = solve_linear_fpk(&drift, &c, &rho0, &w, time).unwrap_err();
        assert!(matches!(err, Error::Stability { .. }), "{err}");
    }

    #[test]
    fn second_moment_grows_by_sigma_squared_t() {
        let (c, rho0, w, time) = setup(512, 0.0, 1);
        let sol = solve_linear_fpk(&NoDrift, &c, &rho0, &w, time).unwrap();
        let d = &sol.diagnostics;
        // backward Euler reproduces the variance growth a·dt per step exactly away from the walls
        assert!((d.m2[500] - d.m2[0] - 0.5).abs() < 1e-10, "{}", d.m2[500] - d.m2[0]);
    }

    #[test]
    fn variable_common_noise_path_transports_the_mean() {
        let grid = Grid::line(-8.0, 8.0, 256).unwrap();
        let time = TimeGrid::new(0.5, 200).unwrap();
        let sigma = MatrixField::Constant(DMatrix::identity(1, 1));
        let nu = MatrixField::variable(1, 1, |_, _| DMatrix::identity(1, 1));
        let c = CoefficientSet::new("var", sigma, nu, 1.0, 1.0).unwrap();
        let rho0 = InitialDensity::gaussian(1, 0.0, 0.25).unwrap().discretize(&grid).unwrap();
        let w = CommonPath::generate(time, 1, 2).unwrap();
        let sol = solve_linear_fpk(&NoDrift, &c, &rho0, &w, time).unwrap();
        assert!(!sol.is_moving_frame());
        assert!(sol.diagnostics.max_substeps >= 1);
        let mean = sol.frame(200).mean()[0];
        assert!((mean - w.at(200)[0]).abs() < 1e-9, "{mean}");
        assert!(sol.diagnostics.mass.iter().all(|m| (m - 1.0).abs() < 1e-10));
        assert!(sol.diagnostics.min.iter().all(|m| *m >= 0.0));
    }
}
