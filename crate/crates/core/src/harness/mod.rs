//! Dataset generation, the sequential test-then-update protocol, and
//! result summaries.

pub mod config;
pub mod dataset;
pub mod metrics;
pub mod protocol;
pub mod summary;

pub use config::{ExperimentConfig, SigmaSetting};
pub use dataset::{generate_dataset, Sample, Which};
pub use protocol::{run_protocol, test_then_update, train};
pub use summary::{summarize, EstimatorSummary, Summary};

use crate::error::Error;

/// Process exit code for an error: 2 for configuration problems, 3 for I/O.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::InvalidLambda(_) | Error::InvalidArgument(_) => 2,
        Error::Io { .. } | Error::Parse { .. } => 3,
        _ => 1,
    }
}
