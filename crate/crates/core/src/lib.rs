//! Stochastic-approximation cross-entropy optimization over Gaussian models,
//! with Monte-Carlo CE baselines, numeric reference oracles and a benchmark
//! harness.
//!
//! Everything numeric is generic over [`Scalar`] (implemented for `f32` and
//! `f64`); the aliases at the bottom fix the common choice.

pub mod baselines;
pub mod error;
pub mod gaussian;
pub mod harness;
pub mod incremental;
pub mod linalg;
pub mod objectives;
pub mod oracles;
pub mod rng;
pub mod scalar;
pub mod schedule;
pub mod trace;

pub use baselines::{BatchAlgorithm, BatchOptimizer, MonteCarloConfig};
pub use error::{Error, Result};
pub use gaussian::{
    log_density, sample_gaussian, sample_mixture, Branch, GaussianParams, GaussianSampler,
    MixtureModel,
};
pub use harness::{load_config, run_experiment, Algorithm, ExperimentResult, RunConfig};
pub use incremental::{
    Ce2nd, Ce2ndState, RunOutcome, Schedules, StepInfo, StopReason, StopRule, LAMBDA_MAX,
};
pub use linalg::Matrix;
pub use objectives::{
    make_benchmark, make_triangle_example, Benchmark, KnownOptimum, ObjectiveFunction,
    ValueBounds,
};
pub use rng::RngState;
pub use scalar::Scalar;
pub use schedule::{Clock, Schedule, ScheduleIndex};
pub use trace::{write_trace, TraceRecord, TRACE_HEADER};

pub type Ce2nd64 = Ce2nd<f64>;
pub type Ce2nd32 = Ce2nd<f32>;
pub type Gaussian64 = GaussianParams<f64>;
pub type Gaussian32 = GaussianParams<f32>;
pub type Objective64 = ObjectiveFunction<f64>;
pub type Objective32 = ObjectiveFunction<f32>;
pub type Matrix64 = Matrix<f64>;
pub type Batch64 = BatchOptimizer<f64>;
pub type Batch32 = BatchOptimizer<f32>;
