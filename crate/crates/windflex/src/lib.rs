//! Configuration-driven reserve studies: weather history in, evaluated day-ahead
//! and real-time schedules out.
//!
//! [`run_pipeline`] chains ingest, model fitting, scenario stressing, reserve
//! sizing, SCUC and real-time dispatch, and writes an [`EvaluationReport`].
//! [`harness`] compares the coverage of weather-driven and weather-ignorant
//! scenario envelopes on synthetic data.

pub mod config;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod pipeline;
pub mod report;

pub use config::RunConfig;
pub use error::{PipelineError, Stage};
pub use metrics::{cost_breakdown, reserve_activation_factors, CostBreakdown, ReserveActivation};
pub use pipeline::{run_pipeline, run_sweep, Artifacts};
pub use report::EvaluationReport;
