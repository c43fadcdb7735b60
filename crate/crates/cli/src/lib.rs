//! Experiment plans, the canned verification experiments and their outputs.

pub mod config;
pub mod experiments;
pub mod summary;

pub use config::{parse_config, ExperimentPlan, PlanKind};
pub use experiments::{execute, restart};
pub use summary::{Check, PointSummary, RunSummary};
