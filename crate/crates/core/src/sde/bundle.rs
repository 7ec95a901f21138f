use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sde::time::TimeGrid;
use crate::seed::{fingerprint_f64, rng, stream_seed, Stream};

/// One common Brownian path `W` of dimension `m̃`, row-major `[steps+1][m̃]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CommonPath {
    dim: usize,
    grid: TimeGrid,
    values: Vec<f64>,
    fingerprint: String,
}

impl CommonPath {
    pub fn generate(grid: TimeGrid, dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("common noise dimension must be positive"));
        }
        let values = brownian(grid, dim, seed);
        Ok(Self::from_raw(grid, dim, values))
    }

    /// A path given explicitly; `values[0..dim]` must be zero.
    pub fn from_values(grid: TimeGrid, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || values.len() != (grid.steps() + 1) * dim {
            return Err(Error::invalid("common path length does not match the time grid"));
        }
        if values[..dim].iter().any(|v| *v != 0.0) || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("common path must start at 0 and be finite"));
        }
        Ok(Self::from_raw(grid, dim, values))
    }

    /// The zero path (no common noise realised).
    pub fn zero(grid: TimeGrid, dim: usize) -> Self {
        Self::from_raw(grid, dim, vec![0.0; (grid.steps() + 1) * dim])
    }

    fn from_raw(grid: TimeGrid, dim: usize, values: Vec<f64>) -> Self {
        let mut key = values.clone();
        key.push(grid.horizon());
        let fingerprint = fingerprint_f64(&key);
        Self { dim, grid, values, fingerprint }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn at(&self, j: usize) -> &[f64] {
        &self.values[j * self.dim..(j + 1) * self.dim]
    }

    /// `W_{j+1} − W_j` for component `l`.
    pub fn increment(&self, j: usize, l: usize) -> f64 {
        self.values[(j + 1) * self.dim + l] - self.values[j * self.dim + l]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Hash identifying the path; shared by every object computed along it.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }
}

/// Common path plus `N` idiosyncratic paths, all derived from one master seed.
#[derive(Clone, Debug)]
pub struct BrownianBundle {
    pub master_seed: u64,
    pub common: CommonPath,
    m: usize,
    n: usize,
    /// Row-major `[N][steps+1][m]`.
    idio: Vec<f64>,
}

/// Seeds of the streams used by a bundle: the common path and each idiosyncratic path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StreamRecord {
    pub common: u64,
    pub idiosyncratic: Vec<u64>,
}

pub fn make_bundle(grid: TimeGrid, n: usize, dims: (usize, usize), master_seed: u64) -> Result<BrownianBundle> {
    let (m, m_common) = dims;
    if n == 0 || m == 0 {
        return Err(Error::invalid("bundle needs N ≥ 1 and m ≥ 1"));
    }
    let common = CommonPath::generate(grid, m_common, stream_seed(master_seed, Stream::Common, 0))?;
    let len = (grid.steps() + 1) * m;
    let mut idio = vec![0.0; n * len];
    idio.par_chunks_mut(len).enumerate().for_each(|(i, chunk)| {
        chunk.copy_from_slice(&brownian(grid, m, stream_seed(master_seed, Stream::Idiosyncratic, i as u64)));
    });
    Ok(BrownianBundle { master_seed, common, m, n, idio })
}

impl BrownianBundle {
    /// Same idiosyncratic paths with another common path; used to decouple W from B in tests.
    pub fn with_common(mut self, common: CommonPath) -> Result<Self> {
        if common.grid() != self.common.grid() {
            return Err(Error::invalid("common path lives on a different time grid"));
        }
        self.common = common;
        Ok(self)
    }

    pub fn particles(&self) -> usize {
        self.n
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.m, self.common.dim())
    }

    pub fn grid(&self) -> TimeGrid {
        self.common.grid()
    }

    pub fn streams(&self) -> StreamRecord {
        StreamRecord {
            common: stream_seed(self.master_seed, Stream::Common, 0),
            idiosyncratic: (0..self.n as u64)
                .map(|i| stream_seed(self.master_seed, Stream::Idiosyncratic, i))
                .collect(),
        }
    }

    /// `B^i_{t_j}`.
    pub fn idio_at(&self, i: usize, j: usize) -> &[f64] {
        let s = (i * (self.grid().steps() + 1) + j) * self.m;
        &self.idio[s..s + self.m]
    }

    /// `B^i_{t_{j+1}} − B^i_{t_j}` for component `l`.
    pub fn idio_increment(&self, i: usize, j: usize, l: usize) -> f64 {
        self.idio_at(i, j + 1)[l] - self.idio_at(i, j)[l]
    }
}

fn brownian(grid: TimeGrid, dim: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    let sd = grid.dt().sqrt();
    let mut out = vec![0.0; (grid.steps() + 1) * dim];
    for j in 0..grid.steps() {
        for l in 0..dim {
            let z: f64 = StandardNormal.sample(&mut r);
            out[(j + 1) * dim + l] = out[j * dim + l] + sd * z;
        }
    }
    out
}
