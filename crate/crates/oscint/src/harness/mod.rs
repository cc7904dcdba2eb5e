//! Experiment harness: problem library, long-run drift driver, convergence
//! and drift-scaling studies, and reference solutions.

pub mod config;
pub mod problems;
pub mod runner;
pub mod studies;

pub use config::{
    Coordinates, ExperimentConfig, MethodConfig, ProblemConfig, RkCoefficients, SamplingConfig,
};
pub use runner::{
    csv_string, least_squares_slope, reference_solution, run_long, secular_slope_h,
    secular_slope_k, write_csv, DriftMeta, DriftSeries, IterationStats,
};
pub use studies::{convergence_study, drift_scaling_study, ConvergenceStudy, DriftScalingStudy};
