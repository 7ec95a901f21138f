//! Brownian bundles and Euler–Maruyama simulation of the particle system and
//! the conditional McKean–Vlasov system; empirical densities and an
//! exchangeability test.

pub mod bundle;
pub mod density;
pub mod exchange;
pub mod export;
pub mod particles;
pub mod time;

pub use bundle::{make_bundle, BrownianBundle, CommonPath};
pub use density::{empirical_density, silverman_bandwidth, DensityMethod, EmpiricalDensity};
pub use exchange::{exchangeability_test, ExchangeabilityReport};
pub use export::{read_trajectory_binary, write_trajectory_binary, write_trajectory_csv};
pub use particles::{
    initial_positions, interaction_drift, simulate_mckean, simulate_mckean_from, simulate_particles,
    simulate_particles_from, ParticleTrajectory,
};
pub use time::TimeGrid;
