//! Experiment harness for rank-adaptive matrix estimation: configuration,
//! seeded parallel Monte-Carlo runs, CSV/JSON artifacts and the `rankadapt`
//! command line.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod matrix_io;
pub mod output;

pub use config::{ConfigSources, Estimator, ExperimentConfig, ExperimentId};
pub use error::{BenchError, BenchResult};
pub use experiments::{run_experiment, write_artifacts, ExperimentOutput};
