//! Interaction kernels, diffusion coefficients, initial laws, their
//! structural validation and mollification.

pub mod coeffs;
pub mod init;
pub mod kernel;
pub mod mollifier;
pub mod mollify;
pub mod preset;
pub mod validate;

pub use coeffs::{CoefficientSet, Dims, MatrixField};
pub use init::{GaussComponent, InitialDensity};
pub use kernel::{KernelShape, KernelSpec};
pub use mollifier::Mollifier;
pub use mollify::{mollify_coefficients, mollify_kernel};
pub use preset::{builtin_library, Catalog, PresetKind};
pub use validate::{validate, ProbePlan, ValidationReport};
