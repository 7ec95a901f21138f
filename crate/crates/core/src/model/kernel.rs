use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::mollifier::Mollifier;
use crate::quad;

pub type KernelFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Smooth odd bump `k(z) = a · s · u · exp(-1/(1-u²))`, `u = z/r`, with `s`
/// chosen so that `max |k| = |a|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OddBump {
    pub amplitude: f64,
    pub radius: f64,
    scale: f64,
}

impl OddBump {
    pub fn new(amplitude: f64, radius: f64) -> Self {
        // maximiser of u·exp(-1/(1-u²)) solves (1-u²)² = 2u²
        let u = (6f64.sqrt() - 2f64.sqrt()) / 2.0;
        let peak = u * (-1.0 / (1.0 - u * u)).exp();
        Self { amplitude, radius, scale: amplitude / peak }
    }

    #[inline]
    pub fn value(&self, z: f64) -> f64 {
        let u = z / self.radius;
        let q = 1.0 - u * u;
        if q <= 0.0 {
            0.0
        } else {
            self.scale * u * (-1.0 / q).exp()
        }
    }
}

/// Truncated sign field `k(z) = a · sign(z)` on `|z| < r`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Step {
    pub amplitude: f64,
    pub radius: f64,
}

impl Step {
    #[inline]
    pub fn value(&self, z: f64) -> f64 {
        if z == 0.0 || z.abs() >= self.radius {
            0.0
        } else {
            self.amplitude * z.signum()
        }
    }
}

#[derive(Clone)]
pub enum KernelShape {
    Zero,
    OddBump(OddBump),
    Step(Step),
    Sum(Box<KernelSpec>, Box<KernelSpec>),
    Mollified { base: Box<KernelSpec>, mollifier: Mollifier },
    Custom(KernelFn),
}

/// Interaction force `k: R^d → R^d` together with its declared norm bounds.
#[derive(Clone)]
pub struct KernelSpec {
    name: String,
    dim: usize,
    shape: KernelShape,
    sup_norm: f64,
    l2_norm: f64,
    support_radius: Option<f64>,
    odd: bool,
    discontinuities: Vec<f64>,
    origin: Option<Vec<f64>>,
}

impl fmt::Debug for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelSpec")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("sup_norm", &self.sup_norm)
            .field("l2_norm", &self.l2_norm)
            .field("support_radius", &self.support_radius)
            .finish()
    }
}

impl KernelSpec {
    pub fn zero(dim: usize) -> Self {
        Self {
            name: "zero".into(),
            dim,
            shape: KernelShape::Zero,
            sup_norm: 0.0,
            l2_norm: 0.0,
            support_radius: Some(0.0),
            odd: true,
            discontinuities: Vec::new(),
            origin: None,
        }
    }

    pub fn odd_bump(amplitude: f64, radius: f64) -> Result<Self> {
        check_params(amplitude, radius)?;
        let bump = OddBump::new(amplitude, radius);
        let l2 = quad::integrate(|z| bump.value(z).powi(2), -radius, radius, &[0.0], 16, 16).sqrt();
        Ok(Self {
            name: format!("odd_bump(a={amplitude},r={radius})"),
            dim: 1,
            shape: KernelShape::OddBump(bump),
            sup_norm: amplitude.abs(),
            l2_norm: l2,
            support_radius: Some(radius),
            odd: true,
            discontinuities: Vec::new(),
            origin: None,
        })
    }

    pub fn step(amplitude: f64, radius: f64) -> Result<Self> {
        check_params(amplitude, radius)?;
        Ok(Self {
            name: format!("step(a={amplitude},r={radius})"),
            dim: 1,
            shape: KernelShape::Step(Step { amplitude, radius }),
            sup_norm: amplitude.abs(),
            l2_norm: amplitude.abs() * (2.0 * radius).sqrt(),
            support_radius: Some(radius),
            odd: true,
            discontinuities: vec![-radius, 0.0, radius],
            origin: None,
        })
    }

    /// Wraps an arbitrary force. `sup_norm` and `l2_norm` are trusted as
    /// declared; [`KernelSpec::probe_sup`] can check them.
    pub fn custom(
        name: impl Into<String>,
        dim: usize,
        sup_norm: f64,
        l2_norm: f64,
        support_radius: Option<f64>,
        odd: bool,
        f: KernelFn,
    ) -> Result<Self> {
        if dim == 0 || !(sup_norm >= 0.0 && l2_norm >= 0.0) {
            return Err(Error::invalid("custom kernel needs dim ≥ 1 and nonnegative norms"));
        }
        Ok(Self {
            name: name.into(),
            dim,
            shape: KernelShape::Custom(f),
            sup_norm,
            l2_norm,
            support_radius,
            odd,
            discontinuities: Vec::new(),
            origin: None,
        })
    }

    /// Pointwise sum; bounds add by the triangle inequality.
    pub fn sum(a: &KernelSpec, b: &KernelSpec) -> Result<Self> {
        if a.dim != b.dim {
            return Err(Error::invalid("kernel sum needs equal dimensions"));
        }
        let mut disc = a.discontinuities.clone();
        disc.extend(&b.discontinuities);
        Ok(Self {
            name: format!("{}+{}", a.name, b.name),
            dim: a.dim,
            shape: KernelShape::Sum(Box::new(a.clone()), Box::new(b.clone())),
            sup_norm: a.sup_norm + b.sup_norm,
            l2_norm: a.l2_norm + b.l2_norm,
            support_radius: match (a.support_radius, b.support_radius) {
                (Some(x), Some(y)) => Some(x.max(y)),
                _ => None,
            },
            odd: a.odd && b.odd,
            discontinuities: disc,
            origin: None,
        })
    }

    pub(crate) fn mollified(base: &KernelSpec, mollifier: Mollifier) -> Self {
        let eps = mollifier.epsilon();
        Self {
            name: format!("mollify({},eps={eps})", base.name),
            dim: base.dim,
            sup_norm: base.sup_norm,
            l2_norm: base.l2_norm,
            support_radius: base.support_radius.map(|r| r + eps),
            odd: base.odd,
            discontinuities: Vec::new(),
            origin: None,
            shape: KernelShape::Mollified { base: Box::new(base.clone()), mollifier },
        }
    }

    /// Overrides the value used at `z = 0` (the self-interaction term).
    pub fn with_origin_value(mut self, value: Vec<f64>) -> Result<Self> {
        if value.len() != self.dim {
            return Err(Error::invalid("origin value has the wrong dimension"));
        }
        if value.iter().any(|v| v.abs() > self.sup_norm) {
            self.sup_norm = value.iter().fold(self.sup_norm, |m, v| m.max(v.abs()));
        }
        self.odd = self.odd && value.iter().all(|v| *v == 0.0);
        self.origin = Some(value);
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn shape(&self) -> &KernelShape {
        &self.shape
    }
    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }
    pub fn l2_norm(&self) -> f64 {
        self.l2_norm
    }
    pub fn support_radius(&self) -> Option<f64> {
        self.support_radius
    }
    /// `k(-z) = -k(z)` everywhere, including `k(0) = 0`.
    pub fn is_odd(&self) -> bool {
        self.odd
    }
    pub fn is_zero(&self) -> bool {
        self.sup_norm == 0.0
    }
    /// Jump locations of a 1-D kernel (used to split quadrature panels).
    pub fn discontinuities(&self) -> &[f64] {
        &self.discontinuities
    }

    pub fn eval_into(&self, z: &[f64], out: &mut [f64]) {
        debug_assert_eq!(z.len(), self.dim);
        if let Some(o) = &self.origin {
            if z.iter().all(|v| *v == 0.0) {
                out.copy_from_slice(o);
                return;
            }
        }
        match &self.shape {
            KernelShape::Zero => out.iter_mut().for_each(|v| *v = 0.0),
            KernelShape::OddBump(b) => out[0] = b.value(z[0]),
            KernelShape::Step(s) => out[0] = s.value(z[0]),
            KernelShape::Sum(a, b) => {
                let mut tmp = vec![0.0; self.dim];
                a.eval_into(z, out);
                b.eval_into(z, &mut tmp);
                out.iter_mut().zip(&tmp).for_each(|(o, t)| *o += t);
            }
            KernelShape::Mollified { base, mollifier } => mollifier.convolve(base, z, out),
            KernelShape::Custom(f) => f(z, out),
        }
    }

    pub fn eval(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(z, &mut out);
        out
    }

    /// Scalar evaluation for 1-D kernels.
    #[inline]
    pub fn eval1(&self, z: f64) -> f64 {
        match (&self.shape, &self.origin) {
            (KernelShape::OddBump(b), None) => b.value(z),
            (KernelShape::Step(s), None) => s.value(z),
            (KernelShape::Zero, None) => 0.0,
            _ => {
                let mut out = [0.0];
                self.eval_into(&[z], &mut out);
                out[0]
            }
        }
    }

    /// Largest sampled `|k(z)|` over the given probe points.
    pub fn probe_sup(&self, probes: &[Vec<f64>]) -> f64 {
        probes.iter().map(|z| self.eval(z).iter().map(|v| v * v).sum::<f64>().sqrt()).fold(0.0, f64::max)
    }
}

fn check_params(amplitude: f64, radius: f64) -> Result<()> {
    if !amplitude.is_finite() || !(radius.is_finite() && radius > 0.0) {
        return Err(Error::invalid(format!(
            "kernel needs finite amplitude and positive radius (a={amplitude}, r={radius})"
        )));
    }
    Ok(())
}
