//! Conditional Liouville equation for two particles in d = 1.
//!
//! Particle `i` moves with `b_i(x) = −½(k(0) + k(x_i − x_other))`. Both
//! coordinates receive the same common-noise increment, so for constant ν the
//! full `ννᵀ` block, cross terms included, is the diagonal shift
//! `(x₁, x₂) ↦ (x₁ + S, x₂ + S)`, handled in the moving frame as in the 1-D
//! solver.

use crate::error::{Error, Result};
use crate::model::coeffs::CoefficientSet;
use crate::model::kernel::KernelSpec;
use crate::sde::bundle::CommonPath;
use crate::sde::time::TimeGrid;
use crate::spde::field::{DensityField, Grid};
use crate::spde::linear::{frame_shifts, implicit_diffusion, Diagnostics, SolverOptions};

#[derive(Clone, Copy, Debug)]
pub struct LiouvilleOptions {
    pub solver: SolverOptions,
    /// Store every `record_stride`-th field (the last one is always stored).
    pub record_stride: usize,
}

impl Default for LiouvilleOptions {
    fn default() -> Self {
        Self { solver: SolverOptions::default(), record_stride: 1 }
    }
}

#[derive(Clone, Debug)]
pub struct LiouvilleSolution2 {
    time: TimeGrid,
    grid: Grid,
    steps: Vec<usize>,
    fields: Vec<DensityField>,
    shifts: Vec<f64>,
    fingerprint: String,
    pub diagnostics: Diagnostics,
}

impl LiouvilleSolution2 {
    pub fn time(&self) -> TimeGrid {
        self.time
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Step indices of the stored fields.
    pub fn recorded_steps(&self) -> &[usize] {
        &self.steps
    }

    /// Stored frame fields, aligned with [`Self::recorded_steps`].
    pub fn fields(&self) -> &[DensityField] {
        &self.fields
    }

    /// Frame field at step `j` if it was stored.
    pub fn frame(&self, j: usize) -> Option<&DensityField> {
        self.steps.binary_search(&j).ok().map(|k| &self.fields[k])
    }

    pub fn shift(&self, j: usize) -> f64 {
        self.shifts[j]
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    /// Lab-frame field at step `j` (if stored) with the mass pushed outside the box.
    pub fn lab(&self, j: usize) -> Option<(DensityField, f64)> {
        self.frame(j).map(|f| f.translated(self.shifts[j]))
    }
}

pub fn solve_liouville_2(
    k: &KernelSpec,
    coeffs: &CoefficientSet,
    rho0_2d: &DensityField,
    w: &CommonPath,
    time: TimeGrid,
) -> Result<LiouvilleSolution2> {
    solve_liouville_2_with(k, coeffs, rho0_2d, w, time, LiouvilleOptions::default())
}

pub fn solve_liouville_2_with(
    k: &KernelSpec,
    coeffs: &CoefficientSet,
    rho0_2d: &DensityField,
    w: &CommonPath,
    time: TimeGrid,
    opts: LiouvilleOptions,
) -> Result<LiouvilleSolution2> {
    let grid = rho0_2d.grid().clone();
    if grid.dim != 2 || coeffs.dims.d != 1 || k.dim() != 1 {
        return Err(Error::OutOfScope("the two-particle Liouville solver needs d = 1 and a 2-D grid".into()));
    }
    if coeffs.nu.as_constant().is_none() {
        return Err(Error::OutOfScope("two-particle Liouville solver requires constant ν".into()));
    }
    if w.grid() != time || w.dim() != coeffs.dims.m_common {
        return Err(Error::invalid("common path does not match the time grid or ν"));
    }
    if opts.record_stride == 0 {
        return Err(Error::invalid("record_stride must be positive"));
    }
    let (n, h, dt) = (grid.cells, grid.h(), time.dt());
    let k0 = k.eval1(0.0);
    // vel[p * n + j]: velocity of the first coordinate at face p (x₁ = lo + p h), x₂ at centre j.
    // By symmetry the second coordinate at face q, x₁ at centre i, is vel[q * n + i].
    let mut vel = vec![0.0; (n + 1) * n];
    for p in 0..=n {
        for j in 0..n {
            let z = (p as f64 - j as f64 - 0.5) * h;
            vel[p * n + j] = -0.5 * (k0 + k.eval1(z));
        }
    }
    let vmax = vel.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let courant = 2.0 * vmax * dt / h;
    if !(courant <= opts.solver.cfl_limit) {
        return Err(Error::Stability { step: 0, courant, limit: opts.solver.cfl_limit });
    }
    let v_at = |p: usize, j: usize| if p == 0 || p == n { 0.0 } else { vel[p * n + j] };

    let shifts = frame_shifts(coeffs, w);
    let centers = grid.centers();
    let sigma_const = coeffs.sigma_is_constant();
    let fill_a = |t: f64, s: f64, a: &mut Vec<f64>| {
        a.clear();
        a.extend(centers.iter().map(|xi| coeffs.sigma_sq_1d(t, xi + s)));
    };
    let mut a = Vec::with_capacity(n);
    fill_a(0.0, 0.0, &mut a);

    let c = dt / h;
    let lambda = dt / (2.0 * h * h);
    let mut rho = rho0_2d.values().to_vec();
    let mut old = rho.clone();
    let mut line = vec![0.0; n];
    let mut cp = Vec::with_capacity(n);
    let mut diag = Diagnostics::default();
    let mut flux = 0.0;
    diag.push(0.0, rho0_2d, 0.0, 0.0);
    let mut steps = vec![0];
    let mut fields = vec![rho0_2d.clone()];

    for step in 0..time.steps() {
        if vmax > 0.0 {
            old.copy_from_slice(&rho);
            for i in 0..n {
                for j in 0..n {
                    let (r1, l1) = (v_at(i + 1, j), v_at(i, j));
                    let (r2, l2) = (v_at(j + 1, i), v_at(j, i));
                    let out1 = r1.max(0.0) + (-l1).max(0.0);
                    let out2 = r2.max(0.0) + (-l2).max(0.0);
                    let mut in1 = 0.0;
                    let mut in2 = 0.0;
                    if i > 0 {
                        in1 += l1.max(0.0) * old[(i - 1) * n + j];
                    }
                    if i + 1 < n {
                        in1 += (-r1).max(0.0) * old[(i + 1) * n + j];
                    }
                    if j > 0 {
                        in2 += l2.max(0.0) * old[i * n + j - 1];
                    }
                    if j + 1 < n {
                        in2 += (-r2).max(0.0) * old[i * n + j + 1];
                    }
                    rho[i * n + j] = old[i * n + j] * (1.0 - c * (out1 + out2)) + c * (in1 + in2);
                }
            }
            for t in 0..n {
                // Walls hold back what an open box would lose on each of the four sides.
                flux += dt
                    * h
                    * ((-vel[t]).max(0.0) * old[t]
                        + vel[n * n + t].max(0.0) * old[(n - 1) * n + t]
                        + (-vel[t]).max(0.0) * old[t * n]
                        + vel[n * n + t].max(0.0) * old[t * n + n - 1]);
            }
        }

        if !sigma_const {
            fill_a(time.t(step + 1), shifts[step + 1], &mut a);
        }
        for t in 0..n {
            flux += 0.5 * dt * (a[0] * (rho[t] + rho[t * n]) + a[n - 1] * (rho[(n - 1) * n + t] + rho[t * n + n - 1]));
        }
        for j in 0..n {
            for i in 0..n {
                line[i] = rho[i * n + j];
            }
            implicit_diffusion(&mut line, &a, lambda, &mut cp);
            for i in 0..n {
                rho[i * n + j] = line[i];
            }
        }
        for i in 0..n {
            implicit_diffusion(&mut rho[i * n..(i + 1) * n], &a, lambda, &mut cp);
        }

        if let Some((cell, &value)) = rho.iter().enumerate().find(|(_, v)| !(**v >= -opts.solver.negative_tol)) {
            return Err(Error::NegativeDensity { step: step + 1, cell, value });
        }
        rho.iter_mut().for_each(|v| *v = v.max(0.0));
        let field = DensityField::from_raw(grid.clone(), rho.clone());
        diag.push(time.t(step + 1), &field, shifts[step + 1], flux);
        if (step + 1) % opts.record_stride == 0 || step + 1 == time.steps() {
            steps.push(step + 1);
            fields.push(field);
        }
    }

    Ok(LiouvilleSolution2 {
        time,
        grid,
        steps,
        fields,
        shifts,
        fingerprint: w.fingerprint().to_string(),
        diagnostics: diag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::coeffs::MatrixField;
    use crate::model::init::InitialDensity;
    use crate::quad::normal_cdf;
    use crate::spde::linear::{solve_linear_fpk, NoDrift};
    use crate::spde::tensor::{marginal, swap_asymmetry, tensorize};
    use nalgebra::DMatrix;

    fn setup(cells: usize, nu: f64, var: f64) -> (CoefficientSet, DensityField, DensityField, CommonPath, TimeGrid) {
        let grid = Grid::line(-6.0, 6.0, cells).unwrap();
        let time = TimeGrid::new(0.5, 100).unwrap();
        let c = CoefficientSet::constant_isotropic(1, 1.0, nu).unwrap();
        let rho0 = InitialDensity::gaussian(1, 0.0, var).unwrap().discretize(&grid).unwrap();
        let rho2 = tensorize(&rho0, 2).unwrap();
        (c, rho0, rho2, CommonPath::generate(time, 1, 31).unwrap(), time)
    }

    #[test]
    fn zero_kernel_stays_a_tensor_product() {
        let (c, rho0, rho2, w, time) = setup(96, 1.0, 0.3);
        let two = solve_liouville_2(&KernelSpec::zero(1), &c, &rho2, &w, time).unwrap();
        let one = solve_linear_fpk(&NoDrift, &c, &rho0, &w, time).unwrap();
        let g = rho0.grid();
        let err_1d: f64 = (0..g.cells)
            .map(|i| {
                (one.frame(100).at(i) * g.h() - (normal_cdf(g.face(i + 1), 0.0, 0.8) - normal_cdf(g.face(i), 0.0, 0.8)))
                    .abs()
            })
            .sum();
        let product = tensorize(one.frame(100), 2).unwrap();
        let h2 = g.h() * g.h();
        let err_2d: f64 =
            product.values().iter().zip(two.frame(100).unwrap().values()).map(|(a, b)| (a - b).abs()).sum::<f64>() * h2;
        assert!(err_2d <= 2.0 * err_1d, "{err_2d} vs {err_1d}");
        assert_eq!(two.shift(100), one.shift(100));
    }

    #[test]
    fn symmetric_data_stays_symmetric_and_marginals_agree() {
        let (c, _, rho2, w, time) = setup(80, 1.0, 0.5);
        let k = KernelSpec::odd_bump(0.5, 1.0).unwrap();
        let sol = solve_liouville_2(&k, &c, &rho2, &w, time).unwrap();
        assert_eq!(sol.fields().len(), 101);
        for f in sol.fields() {
            assert!(swap_asymmetry(f) <= 1e-10);
            let (m1, m2) = (marginal(f, 1).unwrap(), marginal(f, 2).unwrap());
            assert!((m1.mass() - m2.mass()).abs() <= 1e-8);
        }
        let d = &sol.diagnostics;
        assert!(d.mass.iter().all(|m| (m - d.mass[0]).abs() < 1e-10));
        assert!(d.min.iter().all(|m| *m >= 0.0));
    }

    #[test]
    fn record_stride_keeps_the_last_field() {
        let (c, _, rho2, w, time) = setup(32, 0.0, 0.5);
        let opts = LiouvilleOptions { record_stride: 30, ..Default::default() };
        let sol = solve_liouville_2_with(&KernelSpec::zero(1), &c, &rho2, &w, time, opts).unwrap();
        assert_eq!(sol.recorded_steps(), &[0, 30, 60, 90, 100]);
        assert!(sol.frame(45).is_none());
        assert_eq!(sol.diagnostics.t.len(), 101);
    }

    #[test]
    fn variable_common_noise_is_out_of_scope() {
        let (c, _, rho2, w, time) = setup(16, 0.0, 0.5);
        let c = c.with_nu(MatrixField::variable(1, 1, |_, z| DMatrix::from_element(1, 1, z[0].sin()))).unwrap();
        assert!(matches!(solve_liouville_2(&KernelSpec::zero(1), &c, &rho2, &w, time), Err(Error::OutOfScope(_))));
    }
}
