//! Relative entropy, L¹ distances and the inequality checks built on them.

pub mod cancellation;
pub mod dissipation;
pub mod divergence;
pub mod dominance;
pub mod fluctuation;

pub use cancellation::{cancellation_check, CancellationReport};
pub use dissipation::{dissipation_report, entropy_gronwall_rate, liouville_entropy_bound, DissipationReport};
pub use divergence::{
    ckp_check, l1_distance, relative_entropy, relative_entropy_with, subadditivity_check, CkpReport, EntropyOptions,
    EntropyValue, SubadditivityReport, DEFAULT_SYMMETRY_TOL,
};
pub use dominance::{conditional_dominance_check, Conditioning, DominanceReport, GaussianToy};
pub use fluctuation::{fluctuation_term, FluctuationEstimate};
