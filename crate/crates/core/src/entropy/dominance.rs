//! Conditional dominance of relative entropy on a Gaussian common-factor toy:
//! `X = aG + bξ₁ + offset`, `Y = cG + eξ₂`, with `G, ξ₁, ξ₂` independent
//! standard normals.

use crate::error::{Error, Result};
use crate::quad::{gaussian_kl, normal_pdf, Rule};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianToy {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub e: f64,
    pub offset: f64,
}

/// Which of the two laws is conditioned on `G`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Conditioning {
    Both,
    FirstOnly,
    SecondOnly,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DominanceReport {
    /// `H(L_X | L_Y)`.
    pub unconditional: f64,
    /// `E_G[H(L_{X|·} | L_{Y|·})]`.
    pub conditional: f64,
    /// `conditional − unconditional`.
    pub margin: f64,
}

const G_RANGE: f64 = 12.0;
const G_PANELS: usize = 48;
const G_ORDER: usize = 20;

pub fn conditional_dominance_check(toy: GaussianToy, conditioning: Conditioning) -> Result<DominanceReport> {
    let GaussianToy { a, b, c, e, offset } = toy;
    if [a, b, c, e, offset].iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("toy parameters must be finite"));
    }
    if b == 0.0 || e == 0.0 {
        return Err(Error::invalid("degenerate toy: idiosyncratic scales b and e must be nonzero"));
    }
    let (vx, vy) = (a * a + b * b, c * c + e * e);
    let unconditional = gaussian_kl(offset, vx, 0.0, vy);
    let kl_given = |g: f64| match conditioning {
        Conditioning::Both => gaussian_kl(a * g + offset, b * b, c * g, e * e),
        Conditioning::FirstOnly => gaussian_kl(a * g + offset, b * b, 0.0, vy),
        Conditioning::SecondOnly => gaussian_kl(offset, vx, c * g, e * e),
    };
    let conditional =
        Rule::new(G_ORDER).integrate(|g| normal_pdf(g, 0.0, 1.0) * kl_given(g), -G_RANGE, G_RANGE, &[], G_PANELS);
    if !conditional.is_finite() {
        return Err(Error::Quadrature(vec![]));
    }
    Ok(DominanceReport { unconditional, conditional, margin: conditional - unconditional })
}
