//! Declarative study configuration (TOML, schema version 1, unknown keys rejected).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::coeffs::CoefficientSet;
use crate::model::init::InitialDensity;
use crate::model::kernel::KernelSpec;
use crate::model::{builtin_library, MatrixField};
use crate::sde::density::DensityMethod;
use crate::sde::time::TimeGrid;
use crate::seed::fingerprint;
use crate::spde::field::{DensityField, Grid};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub schema_version: u32,
    pub model: ModelSection,
    pub time: TimeSection,
    pub study: StudySection,
    pub grid: GridSection,
    #[serde(default)]
    pub density: DensitySection,
    #[serde(default)]
    pub picard: PicardSection,
    #[serde(default)]
    pub mode: ModeSection,
    #[serde(default)]
    pub liouville: LiouvilleSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Preset calls, e.g. `odd_bump(a=0.5, r=1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kernel: String,
    pub sigma: String,
    pub nu: String,
    pub initial: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub horizon: f64,
    pub steps: usize,
}

fn default_checkpoints() -> usize {
    17
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    /// Strictly increasing particle counts.
    pub particles: Vec<usize>,
    /// Common-noise replicates per particle count.
    pub replicates: usize,
    pub master_seed: u64,
    /// Evenly spaced checkpoints, including 0 and T, for the sup over time.
    #[serde(default = "default_checkpoints")]
    pub checkpoints: usize,
    /// Entropy, CKP and fluctuation diagnostics at the final time.
    #[serde(default = "default_true")]
    pub diagnostics: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub lo: f64,
    pub hi: f64,
    pub cells: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityKind {
    #[default]
    Kde,
    Histogram,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySection {
    #[serde(default)]
    pub method: DensityKind,
    /// KDE bandwidth; Silverman's rule when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
}

impl DensitySection {
    pub fn method(&self) -> DensityMethod {
        match self.method {
            DensityKind::Kde => DensityMethod::Kde { bandwidth: self.bandwidth },
            DensityKind::Histogram => DensityMethod::Histogram,
        }
    }
}

fn default_max_iter() -> usize {
    50
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardSection {
    /// Absolute tolerance; `1e-8·‖ρ₀‖_{L²}` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

impl Default for PicardSection {
    fn default() -> Self {
        Self { tol: None, max_iter: default_max_iter() }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSection {
    /// Replace ν by zero (idiosyncratic noise only).
    #[serde(default)]
    pub nu_zero: bool,
    /// Also run the two-particle Liouville study alongside `study`.
    #[serde(default)]
    pub liouville_small: bool,
}

fn default_liouville_cells() -> usize {
    160
}
fn default_liouville_lo() -> f64 {
    -6.0
}
fn default_liouville_hi() -> f64 {
    6.0
}
fn default_stride() -> usize {
    1
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiouvilleSection {
    #[serde(default = "default_liouville_cells")]
    pub cells: usize,
    #[serde(default = "default_liouville_lo")]
    pub lo: f64,
    #[serde(default = "default_liouville_hi")]
    pub hi: f64,
    /// Report every `record_stride`-th step (the last one always).
    #[serde(default = "default_stride")]
    pub record_stride: usize,
    /// Common-path replicate index under the master seed.
    #[serde(default)]
    pub path: u64,
}

impl Default for LiouvilleSection {
    fn default() -> Self {
        Self {
            cells: default_liouville_cells(),
            lo: default_liouville_lo(),
            hi: default_liouville_hi(),
            record_stride: default_stride(),
            path: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

impl StudyConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: StudyConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Short SHA-256 of the canonical serialisation, excluding the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = OutputSection::default();
        fingerprint(c.to_toml().as_bytes())
    }

    /// Structural checks that do not need the presets.
    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version));
        }
        let p = &self.study.particles;
        if p.is_empty() || p[0] < 2 || p.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("particle counts must be strictly increasing and ≥ 2, got {p:?}"));
        }
        if self.study.replicates < 2 {
            return bad("replicates must be at least 2".into());
        }
        if self.study.checkpoints < 2 {
            return bad("checkpoints must be at least 2 (0 and T)".into());
        }
        if let Some(b) = self.density.bandwidth {
            if !(b.is_finite() && b > 0.0) {
                return bad(format!("bandwidth must be positive, got {b}"));
            }
        }
        if let Some(t) = self.picard.tol {
            if !(t.is_finite() && t > 0.0) {
                return bad(format!("picard tol must be positive, got {t}"));
            }
        }
        if self.picard.max_iter == 0 || self.liouville.record_stride == 0 {
            return bad("max_iter and record_stride must be positive".into());
        }
        TimeGrid::new(self.time.horizon, self.time.steps)?;
        Grid::line(self.grid.lo, self.grid.hi, self.grid.cells)?;
        Grid::line(self.liouville.lo, self.liouville.hi, self.liouville.cells)?;
        Ok(())
    }

    pub fn resolve_time(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.time.horizon, self.time.steps)
    }

    /// Resolves presets and builds every derived object.
    pub fn resolve(&self) -> Result<Model> {
        let lib = builtin_library();
        let kernel = lib.kernel(&self.model.kernel)?;
        let mut coeffs = lib.coefficients(&self.model.sigma, &self.model.nu)?;
        if self.mode.nu_zero {
            let (d, mc) = (coeffs.dims.d, coeffs.dims.m_common);
            coeffs = coeffs.with_nu(MatrixField::Constant(nalgebra::DMatrix::zeros(d, mc)))?;
        }
        let initial = lib.initial(&self.model.initial)?;
        if coeffs.dims.d != 1 || kernel.dim() != 1 || initial.dim() != 1 {
            return Err(Error::OutOfScope("studies run in d = 1".into()));
        }
        let time = TimeGrid::new(self.time.horizon, self.time.steps)?;
        let grid = Grid::line(self.grid.lo, self.grid.hi, self.grid.cells)?;
        let rho0 = initial.discretize(&grid)?;
        Ok(Model { kernel, coeffs, initial, time, grid, rho0 })
    }
}

/// A resolved configuration.
#[derive(Clone, Debug)]
pub struct Model {
    pub kernel: KernelSpec,
    pub coeffs: CoefficientSet,
    pub initial: InitialDensity,
    pub time: TimeGrid,
    pub grid: Grid,
    pub rho0: DensityField,
}
