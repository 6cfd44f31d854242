//! Regional economic complexity: revealed comparative advantage, eigenvector
//! complexity indices, activity relatedness, spatial autocorrelation, and
//! dynamic-panel growth regressions.
//!
//! Kernels take an [`Exec`] policy. With the `parallel` feature (default),
//! [`Exec::Parallel`] runs on rayon; [`Exec::Sequential`] is always available
//! and produces identical results.

pub mod complexity;
pub mod data;
pub mod econometrics;
pub mod error;
pub mod ingest;
pub mod io;
pub mod par;
pub mod rca;
pub mod relatedness;
pub mod spatial;
pub mod stats;
pub mod synth;

pub use error::{Error, ErrorKind, Result};
pub use par::Exec;
