//! Monte Carlo sweeps, oracle suites and report files for the airsec
//! optimizer.
//!
//! An [`ExperimentSpec`] names a base scenario, a sweep axis and the schemes
//! to compare. [`run_sweep`] draws one channel set per sweep value and
//! realization and runs every scheme on it; [`emit_report`] writes the
//! aggregated table, the raw records and the resolved configuration.

use std::path::Path;

use airsec_core::driver::DriverError;
use airsec_core::sysmodel::ModelError;
use thiserror::Error;

pub mod oracle;
pub mod report;
pub mod spec;
pub mod sweep;
pub mod verify;

pub use oracle::{exhaustive_mode_oracle, OracleResult};
pub use report::{emit_report, load_records, RecordsFile, ReportPaths};
pub use spec::{ExperimentFile, ExperimentSpec, SweepAxis};
pub use sweep::{aggregate, run_sweep, SchemeRecord, SummaryRow, TrialRecord, TrialStatus};
pub use verify::{verify_minorants, verify_proposition1, verify_sinr};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Driver(#[from] DriverError),
    #[error("oracle: {0}")]
    Oracle(String),
}

impl HarnessError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
