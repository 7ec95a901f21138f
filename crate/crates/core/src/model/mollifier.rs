use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::kernel::KernelSpec;
use crate::quad::Rule;

const PANELS: usize = 8;
const ORDER: usize = 16;

/// Unnormalised bump `exp(-1/(1-|u|²))` on the open unit ball.
fn raw_bump(r2: f64) -> f64 {
    if r2 >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - r2)).exp()
    }
}

/// `∫_{B_1} exp(-1/(1-|u|²)) du` for d = 1, 2.
fn bump_mass(dim: usize) -> f64 {
    let rule = Rule::new(24);
    match dim {
        1 => rule.integrate(|u| raw_bump(u * u), -1.0, 1.0, &[], 32),
        _ => 2.0 * std::f64::consts::PI * rule.integrate(|r| r * raw_bump(r * r), 0.0, 1.0, &[], 32),
    }
}

/// Standard mollifier `J^ε(y) = ε^{-d} J(y/ε)` with `J` the normalised
/// smooth bump on the unit ball, discretised as a fixed symmetric node set
/// whose weights sum to one.
#[derive(Clone, Debug)]
pub struct Mollifier {
    dim: usize,
    epsilon: f64,
    nodes: Arc<Vec<(Vec<f64>, f64)>>,
    rule: Arc<Rule>,
    norm: f64,
}

impl Mollifier {
    pub fn new(dim: usize, epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::invalid(format!("mollification width must be positive, got {epsilon}")));
        }
        if !(1..=2).contains(&dim) {
            return Err(Error::OutOfScope(format!("mollification in dimension {dim}")));
        }
        let norm = bump_mass(dim);
        let rule = Rule::new(ORDER);
        // 1-D composite node set on [-1, 1]
        let mut line = Vec::new();
        let ph = 2.0 / PANELS as f64;
        for p in 0..PANELS {
            let mid = -1.0 + (p as f64 + 0.5) * ph;
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                line.push((mid + 0.5 * ph * x, 0.5 * ph * w));
            }
        }
        let mut nodes = Vec::new();
        match dim {
            1 => {
                for &(u, w) in &line {
                    nodes.push((vec![epsilon * u], w * raw_bump(u * u)));
                }
            }
            _ => {
                for &(u, wu) in &line {
                    for &(v, wv) in &line {
                        let j = raw_bump(u * u + v * v);
                        if j > 0.0 {
                            nodes.push((vec![epsilon * u, epsilon * v], wu * wv * j));
                        }
                    }
                }
            }
        }
        let total: f64 = nodes.iter().map(|n| n.1).sum();
        nodes.iter_mut().for_each(|n| n.1 /= total);
        Ok(Self { dim, epsilon, nodes: Arc::new(nodes), rule: Arc::new(rule), norm })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Normalised density `J^ε(y)`.
    pub fn density(&self, y: &[f64]) -> f64 {
        let r2: f64 = y.iter().map(|v| v * v).sum::<f64>() / (self.epsilon * self.epsilon);
        raw_bump(r2) / (self.norm * self.epsilon.powi(self.dim as i32))
    }

    /// `(k * J^ε)(z)`. In 1-D the quadrature is split at the base kernel's
    /// jump locations.
    pub fn convolve(&self, base: &KernelSpec, z: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        if self.dim == 1 && !base.discontinuities().is_empty() {
            let eps = self.epsilon;
            let breaks: Vec<f64> = base.discontinuities().iter().map(|p| z[0] - p).collect();
            let v = self.rule.integrate(|y| base.eval1(z[0] - y) * self.density(&[y]), -eps, eps, &breaks, 4);
            let norm = self.rule.integrate(|y| self.density(&[y]), -eps, eps, &breaks, 4);
            out[0] = v / norm;
            return;
        }
        let mut tmp = vec![0.0; base.dim()];
        let mut arg = vec![0.0; base.dim()];
        for (y, w) in self.nodes.iter() {
            for ((a, zi), yi) in arg.iter_mut().zip(z).zip(y) {
                *a = zi - yi;
            }
            base.eval_into(&arg, &mut tmp);
            for (o, t) in out.iter_mut().zip(&tmp) {
                *o += w * t;
            }
        }
    }

    pub fn convolve_matrix<F: Fn(&[f64]) -> DMatrix<f64>>(&self, f: F, z: &[f64]) -> DMatrix<f64> {
        let mut acc: Option<DMatrix<f64>> = None;
        let mut arg = vec![0.0; z.len()];
        for (y, w) in self.nodes.iter() {
            for ((a, zi), yi) in arg.iter_mut().zip(z).zip(y) {
                *a = zi - yi;
            }
            let m = f(&arg) * *w;
            acc = Some(match acc {
                Some(a) => a + m,
                None => m,
            });
        }
        acc.expect("mollifier has nodes")
    }
}
