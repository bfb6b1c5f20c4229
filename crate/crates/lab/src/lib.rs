//! Experiment driver around `mpcorr-core`: configs, a rayon executor, result
//! records and reports.

pub mod config;
pub mod exec;
pub mod experiments;
pub mod record;
pub mod report;

pub use config::{ConfigBuilder, ExperimentConfig, Kind};
pub use exec::Pool;
pub use experiments::run;
pub use record::ResultRecord;
