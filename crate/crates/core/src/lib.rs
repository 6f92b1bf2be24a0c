//! Stream-based graph active learning benchmark engine.
//!
//! Numeric code is generic over [`Scalar`]; the aliases below fix it to
//! `f64`, which is what the harness and CLI use.

pub mod burden;
pub mod dataio;
pub mod graph;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod scalar;
pub mod stats;
pub mod strategies;

pub use graph::{compute_centrality, CentralityMetric, Graph};
pub use harness::{run_experiment, ExperimentConfig, HarnessError, RunResult};
pub use metrics::{Metric, NodeCategory};
pub use scalar::Scalar;
pub use strategies::Strategy;

pub type Matrix64 = linalg::Matrix<f64>;
pub type Dataset64 = dataio::Dataset<f64>;
pub type Gcn64 = model::Gcn<f64>;
pub type GcnParams64 = model::GcnParams<f64>;
pub type NormalizedAdjacency64 = model::NormalizedAdjacency<f64>;
pub type CentralityVector64 = graph::CentralityVector<f64>;
pub type PerformanceSeries64 = metrics::PerformanceSeries<f64>;
pub type EvalSlice64 = metrics::EvalSlice<f64>;
pub type SampleGroups64 = stats::SampleGroups<f64>;
