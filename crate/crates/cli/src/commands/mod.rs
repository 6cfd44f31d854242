//! One module per pipeline stage.

pub mod complexity;
pub mod ingest;
pub mod regress;
pub mod relatedness;
pub mod spatial;
pub mod synth;

use crate::config::Config;
use crate::CliError;

/// Every stage in pipeline order.
pub fn all(cfg: &Config) -> Result<(), CliError> {
    ingest::run(cfg)?;
    complexity::run(cfg)?;
    relatedness::run(cfg)?;
    spatial::run(cfg)?;
    regress::run(cfg)
}
