use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid on `[0, horizon]` with `steps` intervals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::invalid("time grid needs at least one step"));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::invalid(format!("horizon must be positive, got {horizon}")));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// `t_j = j·dt`.
    pub fn t(&self, j: usize) -> f64 {
        j as f64 * self.dt()
    }

    /// Indices `round(c·steps/(count-1))` for `c = 0..count`; first is 0, last is `steps`.
    pub fn checkpoints(&self, count: usize) -> Vec<usize> {
        if count < 2 {
            return vec![self.steps];
        }
        let mut idx: Vec<usize> =
            (0..count).map(|c| ((c * self.steps) as f64 / (count - 1) as f64).round() as usize).collect();
        idx.dedup();
        idx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_zero_steps() {
        assert!(TimeGrid::new(1.0, 0).is_err());
        assert!(TimeGrid::new(0.0, 3).is_err());
    }

    #[test]
    fn points_are_multiples_of_dt() {
        let g = TimeGrid::new(0.5, 100).unwrap();
        assert_eq!(g.dt(), 0.005);
        assert_eq!(g.t(37), 37.0 * 0.005);
        let c = g.checkpoints(17);
        assert_eq!(c.len(), 17);
        assert_eq!((c[0], c[8], c[16]), (0, 50, 100));
    }
}
