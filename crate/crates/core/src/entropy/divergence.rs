//! Relative entropy, L¹ distance and the two universal inequalities that
//! connect them: Csiszár–Kullback–Pinsker and subadditivity.

use crate::error::{Error, Result};
use crate::spde::field::DensityField;
use crate::spde::tensor::{marginal, swap_asymmetry, tensorize};

/// Log floor for the reference density.
pub const DEFAULT_FLOOR: f64 = 1e-300;
/// Mass of `f` on `{g ≤ floor}` above which the entropy is infinite.
pub const DEFAULT_SUPPORT_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntropyOptions {
    pub floor: f64,
    pub support_tol: f64,
}

impl Default for EntropyOptions {
    fn default() -> Self {
        Self { floor: DEFAULT_FLOOR, support_tol: DEFAULT_SUPPORT_TOL }
    }
}

/// `H(f|g)` on a grid, possibly `+∞`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntropyValue {
    /// `f64::INFINITY` when `infinite` is set.
    pub value: f64,
    pub infinite: bool,
    /// Mass of `f` on cells where `g ≤ floor`.
    pub unsupported_mass: f64,
}

impl EntropyValue {
    pub fn is_finite(&self) -> bool {
        !self.infinite
    }
}

fn masses(f: &DensityField, g: &DensityField) -> Result<(f64, f64)> {
    f.grid().ensure_same(g.grid())?;
    let (mf, mg) = (f.mass(), g.mass());
    if !(mf > 0.0 && mg > 0.0) {
        return Err(Error::invalid(format!("relative entropy needs positive masses, got {mf} and {mg}")));
    }
    Ok((mf, mg))
}

pub fn relative_entropy(f: &DensityField, g: &DensityField) -> Result<EntropyValue> {
    relative_entropy_with(f, g, EntropyOptions::default())
}

/// `Σ p log(p/q)` over cell probabilities `p = f·h^d/‖f‖₁`, `q = g·h^d/‖g‖₁`.
///
/// Both densities are normalised so that the value is a divergence between
/// probability vectors; for unit-mass inputs this is `Σ f log(f/g) h^d`. The
/// sum is accumulated as `Σ (p log(p/q) − p + q)`, whose terms are
/// individually nonnegative.
pub fn relative_entropy_with(f: &DensityField, g: &DensityField, opts: EntropyOptions) -> Result<EntropyValue> {
    let (mf, mg) = masses(f, g)?;
    let vol = f.grid().cell_volume();
    let unsupported: f64 =
        f.values().iter().zip(g.values()).filter(|(_, &b)| b <= opts.floor).map(|(&a, _)| a * vol).sum();
    if unsupported > opts.support_tol {
        return Ok(EntropyValue { value: f64::INFINITY, infinite: true, unsupported_mass: unsupported });
    }
    let value = f
        .values()
        .iter()
        .zip(g.values())
        .map(|(&a, &b)| {
            let p = a * vol / mf;
            let q = b.max(opts.floor) * vol / mg;
            if p == 0.0 {
                q
            } else {
                (p * (p / q).ln() - p + q).max(0.0)
            }
        })
        .sum();
    Ok(EntropyValue { value, infinite: false, unsupported_mass: unsupported })
}

/// `Σ |f − g| h^d`.
pub fn l1_distance(f: &DensityField, g: &DensityField) -> Result<f64> {
    f.grid().ensure_same(g.grid())?;
    let vol = f.grid().cell_volume();
    Ok(f.values().iter().zip(g.values()).map(|(a, b)| (a - b).abs()).sum::<f64>() * vol)
}

/// L¹ distance between the normalised densities.
fn normalized_l1(f: &DensityField, g: &DensityField) -> Result<f64> {
    let (mf, mg) = masses(f, g)?;
    let vol = f.grid().cell_volume();
    Ok(f.values().iter().zip(g.values()).map(|(a, b)| (a / mf - b / mg).abs()).sum::<f64>() * vol)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CkpReport {
    pub entropy: EntropyValue,
    /// L¹ distance between the normalised densities.
    pub l1: f64,
    /// `2H − ‖f − g‖₁²`; `+∞` when `H` is infinite.
    pub margin: f64,
    /// The entropy was infinite, so the inequality holds trivially.
    pub vacuous: bool,
}

/// Evaluates `‖f − g‖₁² ≤ 2 H(f|g)` on normalised densities.
pub fn ckp_check(f: &DensityField, g: &DensityField) -> Result<CkpReport> {
    let entropy = relative_entropy(f, g)?;
    let l1 = normalized_l1(f, g)?;
    let margin = if entropy.infinite { f64::INFINITY } else { 2.0 * entropy.value - l1 * l1 };
    Ok(CkpReport { entropy, l1, margin, vacuous: entropy.infinite })
}

/// Relative tolerance on `max |f(x₁,x₂) − f(x₂,x₁)| / max f` for subadditivity.
pub const DEFAULT_SYMMETRY_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubadditivityReport {
    /// `H(f² | g ⊗ g)`.
    pub joint: EntropyValue,
    /// `H(f¹ | g)` for the first marginal `f¹`.
    pub marginal: EntropyValue,
    /// `½ H(f² | g⊗g) − H(f¹ | g)`; `+∞` when the joint entropy is infinite.
    pub margin: f64,
}

/// Evaluates `H(f¹|g) ≤ ½ H(f²|g⊗g)` for a symmetric two-particle density.
pub fn subadditivity_check(f2: &DensityField, g: &DensityField, symmetry_tol: f64) -> Result<SubadditivityReport> {
    if f2.grid().dim != 2 || g.grid().dim != 1 {
        return Err(Error::invalid("subadditivity needs a 2-D joint density and a 1-D reference"));
    }
    let scale = f2.max().max(f64::MIN_POSITIVE);
    let asym = swap_asymmetry(f2) / scale;
    if asym > symmetry_tol {
        return Err(Error::invalid(format!("joint density is not symmetric: relative asymmetry {asym:e}")));
    }
    let joint = relative_entropy(f2, &tensorize(g, 2)?)?;
    let marg = relative_entropy(&marginal(f2, 1)?, g)?;
    let margin = if joint.infinite { f64::INFINITY } else { 0.5 * joint.value - marg.value };
    Ok(SubadditivityReport { joint, marginal: marg, margin })
}
