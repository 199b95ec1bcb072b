//! The integral benchmark and the growth-model filtering benchmark.
//!
//! Work is split into independent tasks, each with its own substream, and
//! results are collected in index order, so reports do not depend on the
//! size of the rayon pool they run in.

mod growth;
mod integral;

pub use growth::{
    run_filter_bench, simulate_trajectory, FilterBenchReport, GrowthModel, GrowthObservation, PairedDifference,
    RmseSeries, Trajectory,
};
pub use integral::{
    g_sum_powers, run_integral_bench, run_integral_bench_with, true_integral_sum_powers, IntegralBenchReport,
    IntegralRow, REFERENCE_ROWS,
};

use thiserror::Error;

use crate::filter::FilterError;
use crate::integrator::IntegrationError;
use crate::rules::RuleError;
use crate::sampling::SamplingError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BenchError {
    #[error("invalid benchmark setting: {0}")]
    Invalid(String),
    #[error("reference integral is zero, relative error undefined")]
    ZeroReference,
    #[error("trajectory exceeded the observation limit on {attempts} consecutive attempts")]
    TrajectoryOverflow { attempts: usize },
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error(transparent)]
    Filter(#[from] FilterError),
}

// top-level substream tags
const INTEGRAL_TAG: u64 = 0x11;
const TRAJECTORY_TAG: u64 = 0x21;
const FILTER_TAG: u64 = 0x22;
