//! Per-trip driving volatility from second-by-second speed traces, joined
//! against trip, vehicle and person tables, with OLS and quantile regression
//! to find the correlates of highly volatile trips.
//!
//! The pipeline, bottom up:
//!
//! * [`ingest`] parses driving cycles and the three survey tables, joins them
//!   into [`ingest::AnalysisRow`]s and fills missing covariates.
//! * [`volatility`] turns a speed trace into percent log returns and their
//!   sample standard deviation.
//! * [`stats`] holds descriptive statistics, histograms, Pearson correlation
//!   and variance inflation factors.
//! * [`model`] builds dummy-coded design matrices and fits OLS and quantile
//!   regressions (primal-dual interior point), with bootstrap standard errors
//!   and quantile sweeps.
//! * [`synth`] generates seeded fixtures with known ground truth.
//! * [`report`] renders tables and plot-ready exports.

pub mod ingest;
pub mod model;
pub mod report;
pub mod rng;
pub mod stats;
pub mod synth;
pub mod volatility;

use thiserror::Error;

/// Any error raised by the library, tagged by the module that produced it.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Ingest(#[from] ingest::IngestError),
    #[error(transparent)]
    Volatility(#[from] volatility::VolatilityError),
    #[error(transparent)]
    Stats(#[from] stats::StatsError),
    #[error(transparent)]
    Model(#[from] model::ModelError),
    #[error(transparent)]
    Synth(#[from] synth::SynthError),
    #[error(transparent)]
    Report(#[from] report::ReportError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
