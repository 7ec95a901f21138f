//! Gauss-Legendre rules and a few closed-form Gaussian helpers.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Gauss-Legendre rule on [-1, 1], reusable across many integrals.
#[derive(Clone, Debug)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn new(order: usize) -> Self {
        let (nodes, weights) = gauss_legendre(order);
        Self { nodes, weights }
    }

    /// Composite integral of `f` over [a, b], split at `breaks` and then into
    /// `panels` equal panels per piece.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64, breaks: &[f64], panels: usize) -> f64 {
        if b <= a {
            return 0.0;
        }
        let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&p| p > a && p < b).collect();
        cuts.push(a);
        cuts.push(b);
        cuts.sort_by(f64::total_cmp);
        let mut total = 0.0;
        for seg in cuts.windows(2) {
            let ph = (seg[1] - seg[0]) / panels as f64;
            let half = 0.5 * ph;
            for p in 0..panels {
                let mid = seg[0] + p as f64 * ph + half;
                for (xi, wi) in self.nodes.iter().zip(&self.weights) {
                    total += wi * half * f(mid + half * xi);
                }
            }
        }
        total
    }
}

/// Composite Gauss-Legendre integral of `f` over [a, b] split at `breaks`.
pub fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, breaks: &[f64], panels: usize, order: usize) -> f64 {
    Rule::new(order).integrate(f, a, b, breaks, panels)
}

pub fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    (-(x - mean) * (x - mean) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

pub fn normal_cdf(x: f64, mean: f64, var: f64) -> f64 {
    0.5 * libm::erfc(-(x - mean) / (2.0 * var).sqrt())
}

/// `P(a < X ≤ b)` for `X ~ N(mean, var)`, from the tail nearer the interval so
/// far-tail cells keep their relative accuracy.
pub fn normal_interval(a: f64, b: f64, mean: f64, var: f64) -> f64 {
    let s = (2.0 * var).sqrt();
    if a >= mean {
        0.5 * (libm::erfc((a - mean) / s) - libm::erfc((b - mean) / s))
    } else if b <= mean {
        0.5 * (libm::erfc((mean - b) / s) - libm::erfc((mean - a) / s))
    } else {
        normal_cdf(b, mean, var) - normal_cdf(a, mean, var)
    }
}

/// KL divergence of N(m1, v1) from N(m2, v2).
pub fn gaussian_kl(m1: f64, v1: f64, m2: f64, v2: f64) -> f64 {
    0.5 * ((v2 / v1).ln() + (v1 + (m1 - m2).powi(2)) / v2 - 1.0)
}
