//! Host-side companion to `socnav-core`: config files, episode logs, scorer
//! processes, heatmap export, batch runs and the teleop server.

pub mod config;
pub mod error;
pub mod heatmap;
pub mod log;
pub mod runner;
pub mod scorer;
pub mod serve;

pub use config::{load_config, parse_config, ConfigError};
pub use error::RunError;
pub use log::{read_record, write_record, LogLine};
pub use runner::{make_env, run_batch, BatchOptions, PolicySpec};
pub use scorer::load_scorer;
