//! Frugal global optimization of Lipschitz functions.
//!
//! The crate implements the LIPO family of sequential maximizers — pure
//! random search, LIPO with a known Lipschitz constant, the adaptive
//! AdaLIPO which learns the constant online, and their `+` variants that
//! stop early once rejection sampling becomes expensive — together with a
//! six-function benchmark harness and a numeric evaluator of the
//! curse-of-dimensionality bound on the acceptance rate.
//!
//! Entry points: [`optimizers::run`] for a single optimization,
//! [`experiments::run_campaign`] for repeated-run statistics, and
//! [`theory::rejection_bound`] for the analytic side.

pub mod cli;
pub mod domain;
pub mod experiments;
pub mod lipschitz;
pub mod objective;
pub mod optimizers;
pub mod theory;

pub use domain::{BoxDomain, EvaluatedPoint, History, Point, RngStream, RunTrace};
pub use lipschitz::{KappaEstimate, KappaEstimator};
pub use objective::{
    make_benchmark, make_benchmark_in_dim, BenchmarkFunction, BenchmarkName, CountingObjective,
    Objective,
};
pub use optimizers::{run, OptimizerKind, OptimizerSpec, RunResult, StopReason, StoppingRule};
