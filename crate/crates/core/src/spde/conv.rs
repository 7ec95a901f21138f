//! Discrete convolution `(k * ρ)(x_p) ≈ Σ_j k(x_p − x_j) ρ_j h` on a 1-D grid.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::model::kernel::KernelSpec;
use crate::spde::field::Grid;

/// Grids at least this large use the FFT unless the kernel band is narrow.
pub const FFT_THRESHOLD: usize = 1024;
const NARROW_BAND: usize = 256;

/// Where the convolution is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Targets {
    /// The `cells + 1` faces `lo + p·h`.
    Faces,
    /// The `cells` centres `lo + (i + ½)·h`.
    Centers,
}

enum Engine {
    Direct,
    Fft { size: usize, kernel_hat: Vec<Complex<f64>>, forward: Arc<dyn Fft<f64>>, inverse: Arc<dyn Fft<f64>> },
}

/// Precomputed kernel table for one grid and target set.
pub struct Convolver {
    cells: usize,
    targets: usize,
    /// `table[d + cells − 1] = k((d + offset − ½)h)·h` for `d = p − j`.
    table: Vec<f64>,
    /// Inclusive range of `d` with a nonzero table entry.
    band: (i64, i64),
    engine: Engine,
}

impl std::fmt::Debug for Convolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Convolver")
            .field("cells", &self.cells)
            .field("targets", &self.targets)
            .field("band", &self.band)
            .field("fft", &self.uses_fft())
            .finish()
    }
}

impl Convolver {
    pub fn new(kernel: &KernelSpec, grid: &Grid, targets: Targets) -> Result<Self> {
        if grid.dim != 1 || kernel.dim() != 1 {
            return Err(Error::OutOfScope("grid convolution is implemented for d = 1".into()));
        }
        let n = grid.cells;
        let h = grid.h();
        let (nt, offset) = match targets {
            Targets::Faces => (n + 1, 0.0),
            Targets::Centers => (n, 0.5),
        };
        let len = n + nt - 1;
        let mut table = vec![0.0; len];
        let (mut first, mut last) = (i64::MAX, i64::MIN);
        for (slot, v) in table.iter_mut().enumerate() {
            let d = slot as i64 - (n as i64 - 1);
            let z = (d as f64 + offset - 0.5) * h;
            if let Some(r) = kernel.support_radius() {
                if z.abs() >= r {
                    continue;
                }
            }
            *v = kernel.eval1(z) * h;
            if !v.is_finite() {
                return Err(Error::Quadrature(vec![z]));
            }
            if *v != 0.0 {
                first = first.min(d);
                last = last.max(d);
            }
        }
        let band = if first > last { (0, -1) } else { (first, last) };
        let width = (band.1 - band.0 + 1).max(0) as usize;
        let engine = if n >= FFT_THRESHOLD && width > NARROW_BAND {
            let size = (len + n - 1).next_power_of_two();
            let mut planner = FftPlanner::new();
            let forward = planner.plan_fft_forward(size);
            let inverse = planner.plan_fft_inverse(size);
            let mut kernel_hat: Vec<Complex<f64>> =
                (0..size).map(|i| Complex::new(if i < len { table[i] } else { 0.0 }, 0.0)).collect();
            forward.process(&mut kernel_hat);
            Engine::Fft { size, kernel_hat, forward, inverse }
        } else {
            Engine::Direct
        };
        Ok(Self { cells: n, targets: nt, table, band, engine })
    }

    pub fn uses_fft(&self) -> bool {
        matches!(self.engine, Engine::Fft { .. })
    }

    pub fn target_count(&self) -> usize {
        self.targets
    }

    /// Writes `(k * ρ)` at every target into `out`.
    pub fn apply(&self, rho: &[f64], out: &mut [f64]) {
        assert_eq!(rho.len(), self.cells);
        assert_eq!(out.len(), self.targets);
        let n = self.cells as i64;
        match &self.engine {
            Engine::Direct => {
                let (dlo, dhi) = self.band;
                for (p, o) in out.iter_mut().enumerate() {
                    let p = p as i64;
                    let jlo = (p - dhi).max(0);
                    let jhi = (p - dlo).min(n - 1);
                    let mut acc = 0.0;
                    for j in jlo..=jhi {
                        acc += self.table[(p - j + n - 1) as usize] * rho[j as usize];
                    }
                    *o = acc;
                }
            }
            Engine::Fft { size, kernel_hat, forward, inverse } => {
                let mut buf: Vec<Complex<f64>> =
                    (0..*size).map(|i| Complex::new(if i < rho.len() { rho[i] } else { 0.0 }, 0.0)).collect();
                forward.process(&mut buf);
                for (b, k) in buf.iter_mut().zip(kernel_hat) {
                    *b *= k;
                }
                inverse.process(&mut buf);
                let scale = 1.0 / *size as f64;
                for (p, o) in out.iter_mut().enumerate() {
                    *o = buf[p + self.cells - 1].re * scale;
                }
            }
        }
    }

    pub fn convolve(&self, rho: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.targets];
        self.apply(rho, &mut out);
        out
    }
}

/// Linear interpolation of centre values at `x`; constant beyond the outer centres.
pub fn interpolate_centers(grid: &Grid, values: &[f64], x: f64) -> f64 {
    let s = (x - grid.lo) / grid.h() - 0.5;
    if s <= 0.0 {
        return values[0];
    }
    let n = values.len();
    if s >= (n - 1) as f64 {
        return values[n - 1];
    }
    let i = s.floor() as usize;
    let th = s - i as f64;
    values[i] * (1.0 - th) + values[i + 1] * th
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(k: &KernelSpec, g: &Grid, rho: &[f64], x: f64) -> f64 {
        (0..g.cells).map(|j| k.eval1(x - g.center(j)) * rho[j] * g.h()).sum()
    }

    fn density(g: &Grid) -> Vec<f64> {
        (0..g.cells).map(|i| (-(g.center(i) - 0.3).powi(2)).exp() * (1.0 + 0.5 * (3.0 * g.center(i)).sin())).collect()
    }

    #[test]
    fn direct_matches_brute_force_at_faces_and_centres() {
        let g = Grid::line(-4.0, 4.0, 200).unwrap();
        let rho = density(&g);
        for k in [KernelSpec::odd_bump(0.5, 1.0).unwrap(), KernelSpec::step(1.0, 0.71).unwrap()] {
            let faces = Convolver::new(&k, &g, Targets::Faces).unwrap();
            assert!(!faces.uses_fft());
            let f = faces.convolve(&rho);
            assert_eq!(f.len(), g.cells + 1);
            for (p, v) in f.iter().enumerate() {
                assert!((v - brute(&k, &g, &rho, g.face(p))).abs() < 1e-13);
            }
            let c = Convolver::new(&k, &g, Targets::Centers).unwrap().convolve(&rho);
            assert_eq!(c.len(), g.cells);
            for (i, v) in c.iter().enumerate() {
                assert!((v - brute(&k, &g, &rho, g.center(i))).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn fft_matches_direct() {
        let g = Grid::line(-8.0, 8.0, 2048).unwrap();
        let rho = density(&g);
        let wide = KernelSpec::odd_bump(0.5, 6.0).unwrap();
        let conv = Convolver::new(&wide, &g, Targets::Faces).unwrap();
        assert!(conv.uses_fft());
        let fast = conv.convolve(&rho);
        for p in (0..=g.cells).step_by(37) {
            assert!((fast[p] - brute(&wide, &g, &rho, g.face(p))).abs() < 1e-12, "{p}");
        }
    }

    #[test]
    fn bounded_by_sup_norm_times_mass() {
        let g = Grid::line(-4.0, 4.0, 256).unwrap();
        let rho = density(&g);
        let mass: f64 = rho.iter().sum::<f64>() * g.h();
        let k = KernelSpec::step(0.8, 1.5).unwrap();
        let c = Convolver::new(&k, &g, Targets::Faces).unwrap().convolve(&rho);
        assert!(c.iter().all(|v| v.abs() <= 0.8 * mass + 1e-14));
    }

    #[test]
    fn interpolation_is_exact_for_linear_data() {
        let g = Grid::line(0.0, 1.0, 10).unwrap();
        let v: Vec<f64> = (0..10).map(|i| 2.0 * g.center(i) + 1.0).collect();
        assert!((interpolate_centers(&g, &v, 0.33) - 1.66).abs() < 1e-14);
        assert_eq!(interpolate_centers(&g, &v, -5.0), v[0]);
    }
}
