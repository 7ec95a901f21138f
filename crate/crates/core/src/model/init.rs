use rand::Rng;

use crate::error::{Error, Result};
use crate::quad::{self, Rule};
use crate::spde::field::{DensityField, Grid};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussComponent {
    pub weight: f64,
    pub mean: f64,
    pub var: f64,
}

/// Initial law ρ₀ of the particles and of the SPDE.
#[derive(Clone, Debug)]
pub enum InitialDensity {
    /// Isotropic Gaussian `N(mean·1, var·I_d)`.
    Gaussian { dim: usize, mean: f64, var: f64 },
    /// 1-D Gaussian mixture with weights summing to one.
    Mixture(Vec<GaussComponent>),
    /// 1-D normalised smooth bump centred at `center` with support radius `radius`.
    Bump { center: f64, radius: f64 },
    /// Tabulated density; sampled cell-wise.
    Tabulated(DensityField),
}

fn bump_shape(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - u * u)).exp()
    }
}

fn bump_moments() -> (f64, f64) {
    let r = Rule::new(24);
    let z = r.integrate(bump_shape, -1.0, 1.0, &[], 32);
    let m2 = r.integrate(|u| u * u * bump_shape(u), -1.0, 1.0, &[], 32);
    (z, m2 / z)
}

fn inverse_normal(u: f64, mean: f64, var: f64) -> f64 {
    mean - (2.0 * var).sqrt() * statrs::function::erf::erfc_inv(2.0 * u)
}

impl InitialDensity {
    pub fn gaussian(dim: usize, mean: f64, var: f64) -> Result<Self> {
        if dim == 0 || !(var.is_finite() && var > 0.0) || !mean.is_finite() {
            return Err(Error::invalid(format!("gaussian needs dim ≥ 1 and var > 0 (var={var})")));
        }
        Ok(InitialDensity::Gaussian { dim, mean, var })
    }

    pub fn mixture(components: Vec<GaussComponent>) -> Result<Self> {
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if components.is_empty()
            || (total - 1.0).abs() > 1e-12
            || components.iter().any(|c| !(c.weight >= 0.0 && c.var > 0.0))
        {
            return Err(Error::invalid("mixture weights must be nonnegative and sum to one, variances positive"));
        }
        Ok(InitialDensity::Mixture(components))
    }

    pub fn bump(center: f64, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::invalid("bump radius must be positive"));
        }
        Ok(InitialDensity::Bump { center, radius })
    }

    pub fn dim(&self) -> usize {
        match self {
            InitialDensity::Gaussian { dim, .. } => *dim,
            InitialDensity::Tabulated(f) => f.grid().dim,
            _ => 1,
        }
    }

    pub fn pdf(&self, x: &[f64]) -> f64 {
        match self {
            InitialDensity::Gaussian { mean, var, .. } => x.iter().map(|v| quad::normal_pdf(*v, *mean, *var)).product(),
            InitialDensity::Mixture(cs) => cs.iter().map(|c| c.weight * quad::normal_pdf(x[0], c.mean, c.var)).sum(),
            InitialDensity::Bump { center, radius } => {
                let (z, _) = bump_moments();
                bump_shape((x[0] - center) / radius) / (z * radius)
            }
            InitialDensity::Tabulated(f) => {
                let g = f.grid();
                let idx: Option<Vec<usize>> = x.iter().map(|v| g.locate(*v)).collect();
                match idx {
                    Some(ix) if ix.len() == 1 => f.at(ix[0]),
                    Some(ix) => f.at2(ix[0], ix[1]),
                    None => 0.0,
                }
            }
        }
    }

    pub fn mass(&self) -> f64 {
        match self {
            InitialDensity::Tabulated(f) => f.mass(),
            _ => 1.0,
        }
    }

    /// `∫ |z|² ρ₀(z) dz`.
    pub fn second_moment(&self) -> f64 {
        match self {
            InitialDensity::Gaussian { dim, mean, var } => *dim as f64 * (var + mean * mean),
            InitialDensity::Mixture(cs) => cs.iter().map(|c| c.weight * (c.var + c.mean * c.mean)).sum(),
            InitialDensity::Bump { center, radius } => center * center + radius * radius * bump_moments().1,
            InitialDensity::Tabulated(f) => f.second_moment(),
        }
    }

    /// Draws one point: inverse CDF for Gaussians and mixtures, rejection for
    /// the bump, cell-then-uniform for tabulated densities.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            InitialDensity::Gaussian { dim, mean, var } => {
                (0..*dim).map(|_| inverse_normal(open_unit(rng), *mean, *var)).collect()
            }
            InitialDensity::Mixture(cs) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut pick = cs[cs.len() - 1];
                for c in cs {
                    acc += c.weight;
                    if u < acc {
                        pick = *c;
                        break;
                    }
                }
                vec![inverse_normal(open_unit(rng), pick.mean, pick.var)]
            }
            InitialDensity::Bump { center, radius } => {
                let peak = (-1.0f64).exp();
                loop {
                    let u = rng.random_range(-1.0..1.0);
                    let v: f64 = rng.random();
                    if v * peak < bump_shape(u) {
                        return vec![center + radius * u];
                    }
                }
            }
            InitialDensity::Tabulated(f) => {
                let g = f.grid();
                let total: f64 = f.values().iter().sum();
                let target = rng.random::<f64>() * total;
                let mut acc = 0.0;
                let mut cell = g.len() - 1;
                for (c, v) in f.values().iter().enumerate() {
                    acc += v;
                    if target < acc {
                        cell = c;
                        break;
                    }
                }
                g.point(cell).iter().map(|x| x + g.h() * (rng.random::<f64>() - 0.5)).collect()
            }
        }
    }

    /// Cell averages on `grid` (exact interval probabilities for Gaussians).
    pub fn discretize(&self, grid: &Grid) -> Result<DensityField> {
        if grid.dim != self.dim() {
            return Err(Error::GridMismatch(format!("density is {}-D, grid is {}-D", self.dim(), grid.dim)));
        }
        let h = grid.h();
        let line = |cell_mass: &dyn Fn(f64, f64) -> f64| -> Vec<f64> {
            (0..grid.cells).map(|i| cell_mass(grid.face(i), grid.face(i + 1)).max(0.0) / h).collect()
        };
        let values = match self {
            InitialDensity::Gaussian { mean, var, .. } => {
                let one = line(&|a, b| quad::normal_interval(a, b, *mean, *var));
                if grid.dim == 1 {
                    one
                } else {
                    one.iter().flat_map(|a| one.iter().map(move |b| a * b)).collect()
                }
            }
            InitialDensity::Mixture(cs) => {
                line(&|a, b| cs.iter().map(|c| c.weight * quad::normal_interval(a, b, c.mean, c.var)).sum())
            }
            InitialDensity::Bump { .. } => {
                let rule = Rule::new(16);
                (0..grid.cells)
                    .map(|i| rule.integrate(|x| self.pdf(&[x]), grid.face(i), grid.face(i + 1), &[], 2) / h)
                    .collect()
            }
            InitialDensity::Tabulated(f) => {
                grid.ensure_same(f.grid())?;
                f.values().to_vec()
            }
        };
        DensityField::new(grid.clone(), values)
    }
}

fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}
