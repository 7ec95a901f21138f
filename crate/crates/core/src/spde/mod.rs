//! Pathwise solvers for the conditional Fokker–Planck equation, its Picard
//! construction, tensor products, and the two-particle Liouville equation.

pub mod bounds;
pub mod conv;
pub mod field;
pub mod linear;
pub mod liouville;
pub mod picard;
pub mod tensor;

pub use bounds::{diagnostics_check, l2_cap, moment_cap, BoundsReport, Caps};
pub use conv::{Convolver, Targets};
pub use field::{DensityField, Grid};
pub use linear::{
    solve_linear_fpk, solve_linear_fpk_with, Diagnostics, Drift, FrameView, FrozenConvolution, NoDrift, SelfConsistent,
    SolverOptions, SpdeSolution, TabulatedDrift,
};
pub use liouville::{solve_liouville_2, solve_liouville_2_with, LiouvilleOptions, LiouvilleSolution2};
pub use picard::{default_tolerance, picard_solve, picard_solve_with};
pub use tensor::{marginal, swap_asymmetry, tensorize};
