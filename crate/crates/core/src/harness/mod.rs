//! Configuration, experiment orchestration, rate fitting and persistence.

pub mod config;
pub mod liouville;
pub mod output;
pub mod rate;
pub mod study;

pub use config::{Model, StudyConfig, SCHEMA_VERSION};
pub use liouville::{liouville_study, LiouvilleRow, LiouvilleSeries};
pub use output::{read_rows, write_liouville, write_rows, write_study};
pub use rate::{fit_rate, RateFit};
pub use study::{replicate_seed, run_replicate, run_study, summarize, NSummary, Row, RowStatus, StudyResult, Summary};
