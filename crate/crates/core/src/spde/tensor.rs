use crate::error::{Error, Result};
use crate::spde::field::{DensityField, Grid};

/// `ρ^{⊗N}` for a 1-D field, `N ∈ {1, 2}`.
pub fn tensorize(rho: &DensityField, n: usize) -> Result<DensityField> {
    let g = rho.grid();
    if g.dim * n > 2 || n == 0 {
        return Err(Error::OutOfScope(format!("tensor power {n} of a {}-D field", g.dim)));
    }
    if n == 1 {
        return Ok(rho.clone());
    }
    let g2 = Grid::new(2, g.lo, g.hi, g.cells)?;
    let v = rho.values();
    let mut out = Vec::with_capacity(g2.len());
    for a in v {
        for b in v {
            out.push(a * b);
        }
    }
    Ok(DensityField::from_raw(g2, out))
}

/// Marginal of a 2-D field in coordinate `which ∈ {1, 2}`.
pub fn marginal(rho2: &DensityField, which: usize) -> Result<DensityField> {
    let g = rho2.grid();
    if g.dim != 2 {
        return Err(Error::invalid("marginal needs a 2-D field"));
    }
    let n = g.cells;
    let h = g.h();
    let v = rho2.values();
    let out: Vec<f64> = match which {
        1 => (0..n).map(|i| (0..n).map(|j| v[i * n + j]).sum::<f64>() * h).collect(),
        2 => (0..n).map(|j| (0..n).map(|i| v[i * n + j]).sum::<f64>() * h).collect(),
        _ => return Err(Error::invalid(format!("marginal index must be 1 or 2, got {which}"))),
    };
    Ok(DensityField::from_raw(Grid::line(g.lo, g.hi, n)?, out))
}

/// `max |ρ(x₁,x₂) − ρ(x₂,x₁)|`.
pub fn swap_asymmetry(rho2: &DensityField) -> f64 {
    let n = rho2.grid().cells;
    let v = rho2.values();
    let mut m = 0.0_f64;
    for i in 0..n {
        for j in 0..i {
            m = m.max((v[i * n + j] - v[j * n + i]).abs());
        }
    }
    m
}
