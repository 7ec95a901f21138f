use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Uniform cell-centred grid on the box `[lo, hi]^dim`, `cells` cells per axis.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub dim: usize,
    pub lo: f64,
    pub hi: f64,
    pub cells: usize,
}

impl Grid {
    pub fn new(dim: usize, lo: f64, hi: f64, cells: usize) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::OutOfScope(format!("grids of dimension {dim}")));
        }
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::invalid(format!("grid box [{lo}, {hi}] is empty")));
        }
        if cells < 2 {
            return Err(Error::invalid("grid needs at least two cells per axis"));
        }
        Ok(Self { dim, lo, hi, cells })
    }

    pub fn line(lo: f64, hi: f64, cells: usize) -> Result<Self> {
        Self::new(1, lo, hi, cells)
    }

    pub fn h(&self) -> f64 {
        (self.hi - self.lo) / self.cells as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.dim as i32)
    }

    pub fn len(&self) -> usize {
        self.cells.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Centre of cell `i` along one axis.
    pub fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.h()
    }

    /// Position of face `p` (0..=cells) along one axis.
    pub fn face(&self, p: usize) -> f64 {
        self.lo + p as f64 * self.h()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.cells).map(|i| self.center(i)).collect()
    }

    /// Cell index containing `x` along one axis, if inside the box.
    pub fn locate(&self, x: f64) -> Option<usize> {
        if !(x >= self.lo && x < self.hi) {
            return None;
        }
        Some((((x - self.lo) / self.h()) as usize).min(self.cells - 1))
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        match self.dim {
            1 => vec![self.center(flat)],
            _ => vec![self.center(flat / self.cells), self.center(flat % self.cells)],
        }
    }

    pub(crate) fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!("{self:?} vs {other:?}")));
        }
        Ok(())
    }
}

/// Nonnegative piecewise-constant density on a [`Grid`].
///
/// 2-D values are stored row-major with the first coordinate as the row:
/// `values[i * cells + j]` is the cell `(x1_i, x2_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityField {
    grid: Grid,
    values: Vec<f64>,
}

const MAGIC: &[u8; 8] = b"CHDF0001";

impl DensityField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!("density has {} values, grid needs {}", values.len(), grid.len())));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid(format!("density value {v} at cell {i} is not a finite nonnegative number")));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        let n = grid.len();
        Self { grid, values: vec![0.0; n] }
    }

    /// Samples `f` at the cell centres.
    pub fn from_fn<F: Fn(&[f64]) -> f64>(grid: Grid, f: F) -> Result<Self> {
        let values = (0..grid.len()).map(|c| f(&grid.point(c))).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// ∫ |x - offset·1|² ρ(x) dx; `offset` translates the grid coordinates.
    pub fn second_moment_shifted(&self, offset: f64) -> f64 {
        let g = &self.grid;
        let sum: f64 = (0..g.len())
            .map(|c| {
                let r2: f64 = g.point(c).iter().map(|x| (x + offset) * (x + offset)).sum();
                r2 * self.values[c]
            })
            .sum();
        sum * g.cell_volume()
    }

    pub fn second_moment(&self) -> f64 {
        self.second_moment_shifted(0.0)
    }

    pub fn mean(&self) -> Vec<f64> {
        let g = &self.grid;
        let mut m = vec![0.0; g.dim];
        for c in 0..g.len() {
            for (mi, x) in m.iter_mut().zip(g.point(c)) {
                *mi += x * self.values[c];
            }
        }
        m.iter().map(|v| v * g.cell_volume()).collect()
    }

    pub fn at(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn at2(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.cells + j]
    }

    /// Translates the density by `shift` along every axis, splitting each
    /// cell's mass linearly between the two (four in 2-D) receiving cells.
    /// Mass pushed outside the box is dropped; returns the field and the
    /// dropped mass.
    pub fn translated(&self, shift: f64) -> (DensityField, f64) {
        let g = &self.grid;
        let n = g.cells as i64;
        let s = shift / g.h();
        let mut q = s.round();
        if (s - q).abs() > 1e-9 {
            q = s.floor();
        }
        let theta = (s - q).max(0.0);
        let q = q as i64;
        let w = [(q, 1.0 - theta), (q + 1, theta)];
        let mut out = vec![0.0; g.len()];
        let mut lost = 0.0;
        let vol = g.cell_volume();
        match g.dim {
            1 => {
                for (i, &v) in self.values.iter().enumerate() {
                    if v == 0.0 {
                        continue;
                    }
                    for &(dq, wt) in &w {
                        let m = v * wt;
                        let t = i as i64 + dq;
                        if (0..n).contains(&t) {
                            out[t as usize] += m;
                        } else {
                            lost += m * vol;
                        }
                    }
                }
            }
            _ => {
                for i in 0..g.cells {
                    for j in 0..g.cells {
                        let v = self.values[i * g.cells + j];
                        if v == 0.0 {
                            continue;
                        }
                        for &(di, wi) in &w {
                            for &(dj, wj) in &w {
                                let m = v * wi * wj;
                                let (ti, tj) = (i as i64 + di, j as i64 + dj);
                                if (0..n).contains(&ti) && (0..n).contains(&tj) {
                                    out[ti as usize * g.cells + tj as usize] += m;
                                } else {
                                    lost += m * vol;
                                }
                            }
                        }
                    }
                }
            }
        }
        (DensityField::from_raw(g.clone(), out), lost)
    }

    /// Writes `x..., value` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let g = &self.grid;
        if g.dim == 1 {
            writeln!(w, "x,value")?;
        } else {
            writeln!(w, "x1,x2,value")?;
        }
        for c in 0..g.len() {
            for x in g.point(c) {
                write!(w, "{x},")?;
            }
            writeln!(w, "{}", self.values[c])?;
        }
        Ok(())
    }

    /// Reads the CSV produced by [`DensityField::write_csv`] for a uniform grid.
    pub fn read_csv<R: Read>(mut r: R) -> Result<Self> {
        let mut text = String::new();
        r.read_to_string(&mut text)?;
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::invalid("empty density csv"))?;
        let dim = header.split(',').count() - 1;
        if !(1..=2).contains(&dim) {
            return Err(Error::invalid(format!("density csv header `{header}`")));
        }
        let mut coords: Vec<f64> = Vec::new();
        let mut values = Vec::new();
        for (ln, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::invalid(format!("density csv line {}: {e}", ln + 2)))?;
            if cols.len() != dim + 1 {
                return Err(Error::invalid(format!("density csv line {} has {} columns", ln + 2, cols.len())));
            }
            if coords.len() < 2 {
                coords.push(cols[dim - 1]);
            }
            values.push(cols[dim]);
        }
        let cells = match dim {
            1 => values.len(),
            _ => (values.len() as f64).sqrt().round() as usize,
        };
        if cells < 2 || cells.pow(dim as u32) != values.len() || coords.len() < 2 {
            return Err(Error::invalid("density csv is not a full uniform grid"));
        }
        let h = coords[1] - coords[0];
        let lo = coords[0] - 0.5 * h;
        let grid = Grid::new(dim, lo, lo + h * cells as f64, cells)?;
        DensityField::new(grid, values)
    }

    /// Flat little-endian binary: magic, dim, cells (u64), lo, hi, values (f64).
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.grid.dim as u64).to_le_bytes())?;
        w.write_all(&(self.grid.cells as u64).to_le_bytes())?;
        w.write_all(&self.grid.lo.to_le_bytes())?;
        w.write_all(&self.grid.hi.to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::invalid("not a density binary (bad magic)"));
        }
        let mut b = [0u8; 8];
        let mut next = |r: &mut R| -> Result<[u8; 8]> {
            r.read_exact(&mut b)?;
            Ok(b)
        };
        let dim = u64::from_le_bytes(next(&mut r)?) as usize;
        let cells = u64::from_le_bytes(next(&mut r)?) as usize;
        let lo = f64::from_le_bytes(next(&mut r)?);
        let hi = f64::from_le_bytes(next(&mut r)?);
        let grid = Grid::new(dim, lo, hi, cells)?;
        let mut values = Vec::with_capacity(grid.len());
        for _ in 0..grid.len() {
            values.push(f64::from_le_bytes(next(&mut r)?));
        }
        DensityField::new(grid, values)
    }
}
