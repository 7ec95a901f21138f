//! Fixed-point construction of the nonlinear equation: each iterate solves
//! the linear equation whose drift is `−k * ρ` of the previous iterate.

use crate::error::{Error, Result};
use crate::model::coeffs::CoefficientSet;
use crate::model::kernel::KernelSpec;
use crate::sde::bundle::CommonPath;
use crate::sde::time::TimeGrid;
use crate::spde::conv::{Convolver, Targets};
use crate::spde::field::DensityField;
use crate::spde::linear::{check_inputs, solve_linear_fpk_with, FrozenConvolution, SolverOptions, SpdeSolution};

/// Default stopping tolerance, `1e-8·‖ρ₀‖_{L²}`.
pub fn default_tolerance(rho0: &DensityField) -> f64 {
    1e-8 * rho0.l2_norm()
}

/// `sup_j ‖a_j − b_j‖_{L²}` over two frame paths on the same grid.
pub fn sup_l2_distance(a: &[DensityField], b: &[DensityField]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let s: f64 = x.values().iter().zip(y.values()).map(|(u, v)| (u - v) * (u - v)).sum();
            (s * x.grid().cell_volume()).sqrt()
        })
        .fold(0.0, f64::max)
}

/// Iterates from `ρ⁰ ≡ ρ₀` held fixed in the moving frame until the sup-in-time
/// L² increment drops below `tol`. The returned solution carries the
/// increment sequence in [`SpdeSolution::increments`].
pub fn picard_solve(
    k: &KernelSpec,
    coeffs: &CoefficientSet,
    rho0: &DensityField,
    w: &CommonPath,
    time: TimeGrid,
    tol: f64,
    max_iter: usize,
) -> Result<SpdeSolution> {
    picard_solve_with(k, coeffs, rho0, w, time, tol, max_iter, SolverOptions::default())
}

#[allow(clippy::too_many_arguments)]
pub fn picard_solve_with(
    k: &KernelSpec,
    coeffs: &CoefficientSet,
    rho0: &DensityField,
    w: &CommonPath,
    time: TimeGrid,
    tol: f64,
    max_iter: usize,
    opts: SolverOptions,
) -> Result<SpdeSolution> {
    check_inputs(coeffs, rho0, w, time)?;
    if !(tol > 0.0) || max_iter == 0 {
        return Err(Error::invalid("Picard iteration needs tol > 0 and max_iter ≥ 1"));
    }
    let conv = Convolver::new(k, rho0.grid(), Targets::Faces)?;
    let mut prev: Vec<DensityField> = vec![rho0.clone(); time.steps() + 1];
    let mut increments = Vec::new();
    for _ in 0..max_iter {
        let drift = FrozenConvolution { conv: &conv, path: &prev, kernel_sup: k.sup_norm() };
        let mut sol = solve_linear_fpk_with(&drift, coeffs, rho0, w, time, opts)?;
        let inc = sup_l2_distance(&sol.frames, &prev);
        increments.push(inc);
        if inc < tol {
            sol.increments = increments;
            return Ok(sol);
        }
        prev = sol.frames;
    }
    Err(Error::PicardDivergence { max_iter, increments })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init::InitialDensity;
    use crate::spde::field::Grid;
    use crate::spde::linear::{solve_linear_fpk, SelfConsistent};

    fn setup(cells: usize, nu: f64) -> (CoefficientSet, DensityField, CommonPath, TimeGrid) {
        let grid = Grid::line(-8.0, 8.0, cells).unwrap();
        let time = TimeGrid::new(0.5, 100).unwrap();
        let c = CoefficientSet::constant_isotropic(1, 1.0, nu).unwrap();
        let rho0 = InitialDensity::gaussian(1, 0.0, 1.0).unwrap().discretize(&grid).unwrap();
        (c, rho0, CommonPath::generate(time, 1, 21).unwrap(), time)
    }

    #[test]
    fn zero_kernel_needs_one_iteration() {
        let (c, rho0, w, time) = setup(256, 1.0);
        let sol = picard_solve(&KernelSpec::zero(1), &c, &rho0, &w, time, 1e-10, 5).unwrap();
        assert_eq!(sol.increments.len(), 2);
        assert!(sol.increments[0] > 0.0);
        assert_eq!(sol.increments[1], 0.0);
    }

    #[test]
    fn increments_contract_for_the_odd_bump() {
        let (c, rho0, w, time) = setup(512, 1.0);
        let k = KernelSpec::odd_bump(0.5, 1.0).unwrap();
        let tol = default_tolerance(&rho0);
        let sol = picard_solve(&k, &c, &rho0, &w, time, tol, 20).unwrap();
        let inc = &sol.increments;
        assert!(inc.len() <= 12, "{inc:?}");
        for pair in inc[1..].windows(2) {
            if pair[0] > 0.0 {
                assert!(pair[1] / pair[0] < 0.8, "{inc:?}");
            }
        }
        // the discrete fixed point is the explicit nonlinear scheme
        let conv = Convolver::new(&k, rho0.grid(), Targets::Faces).unwrap();
        let direct =
            solve_linear_fpk(&SelfConsistent { conv: &conv, kernel_sup: 0.5, mass: rho0.mass() }, &c, &rho0, &w, time)
                .unwrap();
        assert!(sup_l2_distance(direct.frames(), sol.frames()) < 10.0 * tol);
    }

    #[test]
    fn exhausted_iterations_report_increments() {
        let (c, rho0, w, time) = setup(128, 0.0);
        let k = KernelSpec::odd_bump(0.5, 1.0).unwrap();
        match picard_solve(&k, &c, &rho0, &w, time, 1e-14, 2) {
            Err(Error::PicardDivergence { max_iter, increments }) => {
                assert_eq!(max_iter, 2);
                assert_eq!(increments.len(), 2);
            }
            other => panic!("{other:?}"),
        }
    }

    fn coarsen(f: &DensityField) -> Vec<f64> {
        f.values().chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect()
    }

    #[test]
    fn grid_refinement_converges_at_first_order() {
        // Upwind advection contributes O(h) and the diffusion O(h²) with the
        // opposite sign, so the observed order climbs towards 1 from below.
        let k = KernelSpec::odd_bump(0.5, 1.0).unwrap();
        let time = TimeGrid::new(0.5, 200).unwrap();
        let mut finals = Vec::new();
        for cells in [512, 1024, 2048, 4096] {
            let (c, rho0, w, _) = setup(cells, 0.0);
            let w = CommonPath::zero(time, w.dim());
            let sol = picard_solve(&k, &c, &rho0, &w, time, 1e-11, 30).unwrap();
            finals.push(sol.frame(200).clone());
        }
        let l2 = |a: &[f64], b: &[f64], h: f64| (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() * h).sqrt();
        let e: Vec<f64> =
            (0..3).map(|i| l2(finals[i].values(), &coarsen(&finals[i + 1]), finals[i].grid().h())).collect();
        let orders: Vec<f64> = e.windows(2).map(|p| (p[0] / p[1]).log2()).collect();
        assert!(orders[1] >= orders[0], "{e:?} {orders:?}");
        assert!(orders[1] >= 0.9, "{e:?} {orders:?}");
    }
}
