use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::coeffs::CoefficientSet;
use crate::model::init::InitialDensity;
use crate::model::kernel::KernelSpec;
use crate::sde::bundle::BrownianBundle;
use crate::sde::time::TimeGrid;
use crate::seed::{rng, stream_seed, Stream};
use crate::spde::conv::{interpolate_centers, Convolver, Targets};
use crate::spde::linear::SpdeSolution;

/// Positions `X[j][i]` of `N` particles in `R^d`, row-major `[steps+1][N][d]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleTrajectory {
    pub n: usize,
    pub d: usize,
    pub time: TimeGrid,
    pub seed: u64,
    pub(crate) x: Vec<f64>,
}

impl ParticleTrajectory {
    pub fn new(n: usize, d: usize, time: TimeGrid, seed: u64, x: Vec<f64>) -> Result<Self> {
        if x.len() != (time.steps() + 1) * n * d || n == 0 || d == 0 {
            return Err(Error::invalid("trajectory array has the wrong length"));
        }
        if let Some(p) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { step: p / (n * d), particle: (p / d) % n });
        }
        Ok(Self { n, d, time, seed, x })
    }

    pub fn steps(&self) -> usize {
        self.time.steps()
    }

    /// All positions at `t_j`, `N·d` values.
    pub fn at(&self, j: usize) -> &[f64] {
        let w = self.n * self.d;
        &self.x[j * w..(j + 1) * w]
    }

    pub fn particle(&self, j: usize, i: usize) -> &[f64] {
        &self.at(j)[i * self.d..(i + 1) * self.d]
    }

    pub fn values(&self) -> &[f64] {
        &self.x
    }
}

/// Interaction drift `−(1/N) Σ_l k(x_i − x_l)`, self term included.
///
/// Each particle's sum runs in a fixed order, so the result does not depend
/// on the thread count. For 1-D kernels with compact support the sum runs
/// over the sorted window `|x_i − x_l| < r`.
pub fn interaction_drift(k: &KernelSpec, x: &[f64], d: usize, out: &mut [f64]) {
    let n = x.len() / d;
    let inv_n = 1.0 / n as f64;
    if k.is_zero() {
        out.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    if d == 1 {
        if let Some(r) = k.support_radius() {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
            let xs: Vec<f64> = order.iter().map(|&i| x[i]).collect();
            let sums: Vec<f64> = (0..n)
                .into_par_iter()
                .map(|a| {
                    let xa = xs[a];
                    let lo = xs.partition_point(|&v| v <= xa - r);
                    let hi = xs.partition_point(|&v| v < xa + r);
                    xs[lo..hi].iter().map(|&xb| k.eval1(xa - xb)).sum::<f64>()
                })
                .collect();
            for (a, &i) in order.iter().enumerate() {
                out[i] = -sums[a] * inv_n;
            }
            return;
        }
        out.par_iter_mut().enumerate().for_each(|(i, o)| {
            let xi = x[i];
            *o = -x.iter().map(|&xl| k.eval1(xi - xl)).sum::<f64>() * inv_n;
        });
        return;
    }
    out.par_chunks_mut(d).enumerate().for_each(|(i, o)| {
        let xi = &x[i * d..(i + 1) * d];
        let mut z = vec![0.0; d];
        let mut kv = vec![0.0; d];
        o.iter_mut().for_each(|v| *v = 0.0);
        for l in 0..n {
            for a in 0..d {
                z[a] = xi[a] - x[l * d + a];
            }
            k.eval_into(&z, &mut kv);
            for a in 0..d {
                o[a] -= kv[a] * inv_n;
            }
        }
    });
}

fn check_dims(coeffs: &CoefficientSet, bundle: &BrownianBundle, time: TimeGrid, d: usize) -> Result<()> {
    if bundle.dims() != (coeffs.dims.m, coeffs.dims.m_common) {
        return Err(Error::invalid(format!(
            "bundle noise dims {:?} do not match coefficients ({}, {})",
            bundle.dims(),
            coeffs.dims.m,
            coeffs.dims.m_common
        )));
    }
    if bundle.grid() != time {
        return Err(Error::invalid("bundle was generated on a different time grid"));
    }
    if coeffs.dims.d != d {
        return Err(Error::invalid(format!("coefficients act on R^{}, particles live in R^{d}", coeffs.dims.d)));
    }
    Ok(())
}

/// `X^i_0` drawn from `rho0` on the per-particle initial streams of the bundle.
pub fn initial_positions(rho0: &InitialDensity, bundle: &BrownianBundle) -> Vec<f64> {
    (0..bundle.particles())
        .into_par_iter()
        .flat_map_iter(|i| rho0.sample(&mut rng(stream_seed(bundle.master_seed, Stream::Initial, i as u64))))
        .collect()
}

/// One Euler–Maruyama step from `t_j` given the drift at every particle.
fn advance(x: &mut [f64], drift: &[f64], coeffs: &CoefficientSet, bundle: &BrownianBundle, j: usize, dt: f64) {
    let d = coeffs.dims.d;
    let (m, mc) = (coeffs.dims.m, coeffs.dims.m_common);
    let t = bundle.grid().t(j);
    let dw: Vec<f64> = (0..mc).map(|l| bundle.common.increment(j, l)).collect();
    let (sc, nc) = (coeffs.sigma.as_constant(), coeffs.nu.as_constant());
    x.par_chunks_mut(d).zip(drift.par_chunks(d)).enumerate().for_each(|(i, (xi, bi))| {
        let sig = if sc.is_none() { Some(coeffs.sigma.eval(t, xi)) } else { None };
        let nu = if nc.is_none() { Some(coeffs.nu.eval(t, xi)) } else { None };
        let sig = sc.unwrap_or_else(|| sig.as_ref().unwrap());
        let nu = nc.unwrap_or_else(|| nu.as_ref().unwrap());
        for a in 0..d {
            let mut inc = bi[a] * dt;
            for q in 0..m {
                inc += sig[(a, q)] * bundle.idio_increment(i, j, q);
            }
            for (l, w) in dw.iter().enumerate() {
                inc += nu[(a, l)] * w;
            }
            xi[a] += inc;
        }
    });
}

fn run<F>(
    x0: Vec<f64>,
    coeffs: &CoefficientSet,
    bundle: &BrownianBundle,
    time: TimeGrid,
    mut drift_at: F,
) -> Result<ParticleTrajectory>
where
    F: FnMut(usize, &[f64], &mut [f64]) -> Result<()>,
{
    let d = coeffs.dims.d;
    let n = bundle.particles();
    if x0.len() != n * d {
        return Err(Error::invalid(format!("{} initial coordinates for {n} particles in R^{d}", x0.len())));
    }
    check_dims(coeffs, bundle, time, d)?;
    let mut out = Vec::with_capacity((time.steps() + 1) * n * d);
    out.extend_from_slice(&x0);
    let mut x = x0;
    let mut b = vec![0.0; n * d];
    for j in 0..time.steps() {
        drift_at(j, &x, &mut b)?;
        advance(&mut x, &b, coeffs, bundle, j, time.dt());
        if let Some(p) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { step: j + 1, particle: p / d });
        }
        out.extend_from_slice(&x);
    }
    ParticleTrajectory::new(n, d, time, bundle.master_seed, out)
}

fn assert_drift_bound(k: &KernelSpec, b: &[f64], d: usize) {
    if cfg!(debug_assertions) {
        let lim = k.sup_norm() * (1.0 + 1e-12) + 1e-300;
        for c in b.chunks(d) {
            let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(norm <= lim, "drift {norm} exceeds ‖k‖_∞ = {}", k.sup_norm());
        }
    }
}

/// Interacting particle system driven by the bundle, `X_0` sampled from `rho0`.
pub fn simulate_particles(
    k: &KernelSpec,
    coeffs: &CoefficientSet,
    rho0: &InitialDensity,
    bundle: &BrownianBundle,
    time: TimeGrid,
) -> Result<ParticleTrajectory> {
    if rho0.dim() != coeffs.dims.d {
        return Err(Error::invalid("initial density dimension does not match the coefficients"));
    }
    simulate_particles_from(k, coeffs, initial_positions(rho0, bundle), bundle, time)
}

/// As [`simulate_particles`] with explicit initial positions (`N·d` values).
pub fn simulate_particles_from(
    k: &KernelSpec,
    coeffs: &CoefficientSet,
    x0: Vec<f64>,
    bundle: &BrownianBundle,
    time: TimeGrid,
) -> Result<ParticleTrajectory> {
    let d = coeffs.dims.d;
    if k.dim() != d {
        return Err(Error::invalid("kernel dimension does not match the coefficients"));
    }
    run(x0, coeffs, bundle, time, |_, x, b| {
        interaction_drift(k, x, d, b);
        assert_drift_bound(k, b, d);
        Ok(())
    })
}

/// Conditional McKean–Vlasov particles: drift `−(k * ρ_{t_j})(Y^i)` from a
/// solution computed on the bundle's own common path, same `B^i`, `W` and
/// initial positions as [`simulate_particles`].
pub fn simulate_mckean(
    k: &KernelSpec,
    coeffs: &CoefficientSet,
    rho_path: &SpdeSolution,
    rho0: &InitialDensity,
    bundle: &BrownianBundle,
    time: TimeGrid,
) -> Result<ParticleTrajectory> {
    simulate_mckean_from(k, coeffs, rho_path, initial_positions(rho0, bundle), bundle, time)
}

pub fn simulate_mckean_from(
    k: &KernelSpec,
    coeffs: &CoefficientSet,
    rho_path: &SpdeSolution,
    x0: Vec<f64>,
    bundle: &BrownianBundle,
    time: TimeGrid,
) -> Result<ParticleTrajectory> {
    if rho_path.fingerprint() != bundle.common.fingerprint() {
        return Err(Error::FingerprintMismatch {
            solution: rho_path.fingerprint().to_string(),
            bundle: bundle.common.fingerprint().to_string(),
        });
    }
    if rho_path.time() != time {
        return Err(Error::invalid("density path and particles use different time grids"));
    }
    let grid = rho_path.grid().clone();
    let conv = if k.is_zero() { None } else { Some(Convolver::new(k, &grid, Targets::Centers)?) };
    let mut field = vec![0.0; grid.cells];
    run(x0, coeffs, bundle, time, |j, x, b| {
        match &conv {
            None => b.iter_mut().for_each(|v| *v = 0.0),
            Some(c) => {
                c.apply(rho_path.frame(j).values(), &mut field);
                let s = rho_path.shift(j);
                for (bi, xi) in b.iter_mut().zip(x) {
                    *bi = -interpolate_centers(&grid, &field, xi - s);
                }
                assert_drift_bound(k, b, 1);
            }
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::coeffs::MatrixField;
    use crate::sde::bundle::make_bundle;
    use crate::spde::linear::{solve_linear_fpk, NoDrift};
    use crate::spde::picard::picard_solve;
    use nalgebra::DMatrix;

    fn time() -> TimeGrid {
        TimeGrid::new(0.5, 50).unwrap()
    }

    #[test]
    fn zero_kernel_point_mass_reproduces_the_brownian_paths() {
        let c = CoefficientSet::constant_isotropic(1, 1.0, 0.0).unwrap();
        let b = make_bundle(time(), 16, (1, 1), 5).unwrap();
        let tr = simulate_particles_from(&KernelSpec::zero(1), &c, vec![0.0; 16], &b, time()).unwrap();
        for j in 0..=50 {
            for i in 0..16 {
                assert!((tr.particle(j, i)[0] - b.idio_at(i, j)[0]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn common_noise_only_moves_particles_together() {
        let sigma = MatrixField::Constant(DMatrix::zeros(1, 1));
        let nu = MatrixField::Constant(DMatrix::identity(1, 1));
        let c = CoefficientSet {
            name: "common".into(),
            sigma,
            nu,
            delta: 1.0,
            c1_bound: 1.0,
            dims: crate::model::Dims { d: 1, m: 1, m_common: 1 },
        };
        let b = make_bundle(time(), 8, (1, 1), 6).unwrap();
        let tr = simulate_particles_from(&KernelSpec::zero(1), &c, vec![0.0; 8], &b, time()).unwrap();
        for j in 0..=50 {
            let w = b.common.at(j)[0];
            assert!(tr.at(j).iter().all(|x| *x == tr.at(j)[0]));
            assert!((tr.at(j)[0] - w).abs() < 1e-14);
        }
    }

    #[test]
    fn accumulated_drift_is_bounded_by_sup_norm_times_horizon() {
        let c = CoefficientSet::constant_isotropic(1, 1.0, 1.0).unwrap();
        let rho0 = InitialDensity::gaussian(1, 0.0, 0.3).unwrap();
        let b = make_bundle(time(), 64, (1, 1), 7).unwrap();
        for k in [KernelSpec::odd_bump(0.5, 1.0).unwrap(), KernelSpec::step(0.7, 0.5).unwrap()] {
            let tr = simulate_particles(&k, &c, &rho0, &b, time()).unwrap();
            for i in 0..64 {
                let mart = b.idio_at(i, 50)[0] + b.common.at(50)[0];
                let drift = tr.particle(50, i)[0] - tr.particle(0, i)[0] - mart;
                assert!(drift.abs() <= k.sup_norm() * 0.5 + 1e-12);
            }
        }
    }

    #[test]
    fn reruns_are_bit_identical() {
        let c = CoefficientSet::constant_isotropic(1, 1.0, 1.0).unwrap();
        let rho0 = InitialDensity::gaussian(1, 0.0, 1.0).unwrap();
        let k = KernelSpec::odd_bump(0.5, 1.0).unwrap();
        let run = || simulate_particles(&k, &c, &rho0, &make_bundle(time(), 100, (1, 1), 8).unwrap(), time()).unwrap();
        assert_eq!(run(), run());
    }

    #[test]
    fn windowed_sum_matches_the_full_pair_loop() {
        let k = KernelSpec::odd_bump(0.5, 1.0).unwrap();
        let x: Vec<f64> = (0..300).map(|i| ((i * 7919) % 300) as f64 * 0.02 - 3.0).collect();
        let mut fast = vec![0.0; 300];
        interaction_drift(&k, &x, 1, &mut fast);
        for i in 0..300 {
            let full = -x.iter().map(|&xl| k.eval1(x[i] - xl)).sum::<f64>() / 300.0;
            assert!((fast[i] - full).abs() < 1e-15);
        }
    }

    #[test]
    fn two_dimensional_kernels_use_the_general_loop() {
        let k = KernelSpec::custom(
            "lin",
            2,
            2f64.sqrt(),
            1.0,
            None,
            false,
            std::sync::Arc::new(|z: &[f64], o: &mut [f64]| {
                o[0] = z[0].tanh();
                o[1] = z[1].tanh();
            }),
        )
        .unwrap();
        let x = vec![0.0, 0.0, 1.0, 2.0];
        let mut b = vec![0.0; 4];
        interaction_drift(&k, &x, 2, &mut b);
        assert!((b[0] - 0.5 * 1f64.tanh()).abs() < 1e-15);
        assert!((b[3] + 0.5 * 2f64.tanh()).abs() < 1e-15);
    }

    #[test]
    fn mckean_with_zero_kernel_equals_the_particle_system() {
        let c = CoefficientSet::constant_isotropic(1, 1.0, 1.0).unwrap();
        let rho0 = InitialDensity::gaussian(1, 0.0, 1.0).unwrap();
        let b = make_bundle(time(), 32, (1, 1), 9).unwrap();
        let g = crate::spde::Grid::line(-8.0, 8.0, 64).unwrap();
        let sol = solve_linear_fpk(&NoDrift, &c, &rho0.discretize(&g).unwrap(), &b.common, time()).unwrap();
        let a = simulate_particles(&KernelSpec::zero(1), &c, &rho0, &b, time()).unwrap();
        let m = simulate_mckean(&KernelSpec::zero(1), &c, &sol, &rho0, &b, time()).unwrap();
        assert_eq!(a, m);
    }

    #[test]
    fn mckean_rejects_a_foreign_common_path() {
        let c = CoefficientSet::constant_isotropic(1, 1.0, 1.0).unwrap();
        let rho0 = InitialDensity::gaussian(1, 0.0, 1.0).unwrap();
        let b1 = make_bundle(time(), 4, (1, 1), 1).unwrap();
        let b2 = make_bundle(time(), 4, (1, 1), 2).unwrap();
        let g = crate::spde::Grid::line(-8.0, 8.0, 64).unwrap();
        let sol = solve_linear_fpk(&NoDrift, &c, &rho0.discretize(&g).unwrap(), &b1.common, time()).unwrap();
        let err = simulate_mckean(&KernelSpec::zero(1), &c, &sol, &rho0, &b2, time()).unwrap_err();
        assert!(matches!(err, Error::FingerprintMismatch { .. }));
    }

    #[test]
    fn mckean_drift_uses_the_conditional_density() {
        let c = CoefficientSet::constant_isotropic(1, 1.0, 1.0).unwrap();
        let rho0 = InitialDensity::gaussian(1, 0.0, 1.0).unwrap();
        let b = make_bundle(time(), 200, (1, 1), 10).unwrap();
        let g = crate::spde::Grid::line(-8.0, 8.0, 256).unwrap();
        let k = KernelSpec::odd_bump(0.5, 1.0).unwrap();
        let sol = picard_solve(&k, &c, &rho0.discretize(&g).unwrap(), &b.common, time(), 1e-10, 20).unwrap();
        let y = simulate_mckean(&k, &c, &sol, &rho0, &b, time()).unwrap();
        let x = simulate_particles(&k, &c, &rho0, &b, time()).unwrap();
        // synchronous coupling keeps the two systems close
        let gap = (0..200).map(|i| (x.particle(50, i)[0] - y.particle(50, i)[0]).abs()).sum::<f64>() / 200.0;
        assert!(gap < 0.05, "{gap}");
    }

    #[test]
    fn gaussian_conditional_law_of_the_limit_particle() {
        // Y_T − W_T ~ N(0, 1 + T) independently of W
        let t = TimeGrid::new(0.5, 10).unwrap();
        let c = CoefficientSet::constant_isotropic(1, 1.0, 1.0).unwrap();
        let rho0 = InitialDensity::gaussian(1, 0.0, 1.0).unwrap();
        let g = crate::spde::Grid::line(-8.0, 8.0, 32).unwrap();
        let reps = 10_000;
        let mut acc = Vec::with_capacity(reps);
        for r in 0..reps {
            let b = make_bundle(t, 1, (1, 1), 1000 + r as u64).unwrap();
            let sol = solve_linear_fpk(&NoDrift, &c, &rho0.discretize(&g).unwrap(), &b.common, t).unwrap();
            let y = simulate_mckean(&KernelSpec::zero(1), &c, &sol, &rho0, &b, t).unwrap();
            acc.push(y.particle(10, 0)[0] - b.common.at(10)[0]);
        }
        let mean = acc.iter().sum::<f64>() / reps as f64;
        let var = acc.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        assert!(mean.abs() < 4.0 * (1.5f64 / reps as f64).sqrt(), "{mean}");
        assert!((var - 1.5).abs() < 0.1, "{var}");
    }
}
