use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub type MatrixFn = Arc<dyn Fn(f64, &[f64]) -> DMatrix<f64> + Send + Sync>;

/// A `(t, z) ↦ rows × cols` matrix field.
#[derive(Clone)]
pub enum MatrixField {
    Constant(DMatrix<f64>),
    Variable { rows: usize, cols: usize, f: MatrixFn },
}

impl fmt::Debug for MatrixField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatrixField::Constant(m) => write!(f, "Constant({m:?})"),
            MatrixField::Variable { rows, cols, .. } => write!(f, "Variable({rows}x{cols})"),
        }
    }
}

impl MatrixField {
    pub fn variable<F>(rows: usize, cols: usize, f: F) -> Self
    where
        F: Fn(f64, &[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    {
        MatrixField::Variable { rows, cols, f: Arc::new(f) }
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            MatrixField::Constant(m) => (m.nrows(), m.ncols()),
            MatrixField::Variable { rows, cols, .. } => (*rows, *cols),
        }
    }

    pub fn eval(&self, t: f64, z: &[f64]) -> DMatrix<f64> {
        match self {
            MatrixField::Constant(m) => m.clone(),
            MatrixField::Variable { f, .. } => f(t, z),
        }
    }

    pub fn as_constant(&self) -> Option<&DMatrix<f64>> {
        match self {
            MatrixField::Constant(m) => Some(m),
            MatrixField::Variable { .. } => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, MatrixField::Constant(m) if m.iter().all(|v| *v == 0.0))
    }

    /// `M Mᵀ` at `(t, z)`.
    pub fn gram(&self, t: f64, z: &[f64]) -> DMatrix<f64> {
        let m = self.eval(t, z);
        &m * m.transpose()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dims {
    /// Space dimension.
    pub d: usize,
    /// Idiosyncratic noise dimension.
    pub m: usize,
    /// Common noise dimension.
    pub m_common: usize,
}

/// Diffusion coefficients σ (idiosyncratic) and ν (common) with their
/// declared ellipticity constant and C¹ bound.
#[derive(Clone, Debug)]
pub struct CoefficientSet {
    pub name: String,
    pub sigma: MatrixField,
    pub nu: MatrixField,
    pub delta: f64,
    pub c1_bound: f64,
    pub dims: Dims,
}

impl CoefficientSet {
    pub fn new(
        name: impl Into<String>,
        sigma: MatrixField,
        nu: MatrixField,
        delta: f64,
        c1_bound: f64,
    ) -> Result<Self> {
        let (d, m) = sigma.shape();
        let (d2, m_common) = nu.shape();
        if d != d2 || d == 0 || m == 0 || m_common == 0 {
            return Err(Error::invalid(format!("σ is {d}x{m} but ν is {d2}x{m_common}")));
        }
        if !(delta.is_finite() && delta > 0.0) || !(c1_bound.is_finite() && c1_bound > 0.0) {
            return Err(Error::invalid("ellipticity constant and C¹ bound must be positive"));
        }
        Ok(Self { name: name.into(), sigma, nu, delta, c1_bound, dims: Dims { d, m, m_common } })
    }

    /// σ = s·I_d, ν = v·I_d (square noise), δ = s².
    pub fn constant_isotropic(d: usize, s: f64, v: f64) -> Result<Self> {
        let sigma = MatrixField::Constant(DMatrix::identity(d, d) * s);
        let nu = MatrixField::Constant(DMatrix::identity(d, d) * v);
        Self::new(format!("const(s={s},v={v},d={d})"), sigma, nu, s * s, s.abs().max(v.abs()).max(1e-12))
    }

    /// For d = 1 with constant ν: the scalar ν row as a vector of length m̃.
    pub fn constant_nu_row(&self) -> Option<Vec<f64>> {
        if self.dims.d != 1 {
            return None;
        }
        self.nu.as_constant().map(|m| m.row(0).iter().copied().collect())
    }

    /// Scalar `σσᵀ` for d = 1.
    pub fn sigma_sq_1d(&self, t: f64, z: f64) -> f64 {
        self.sigma.gram(t, &[z])[(0, 0)]
    }

    pub fn sigma_is_constant(&self) -> bool {
        self.sigma.as_constant().is_some()
    }

    pub fn with_nu(&self, nu: MatrixField) -> Result<Self> {
        Self::new(format!("{}|nu", self.name), self.sigma.clone(), nu, self.delta, self.c1_bound)
    }
}
