//! Benchmarking pipeline for community Q&A user data.
//!
//! The crate covers the full path from a raw user table to a ranked model
//! grid: missing-value imputation, multicollinearity pruning, five feature
//! transforms, a registry of 21 learners, TPE search with genetic-algorithm
//! validation, repeated evaluation with rank-based significance tests, and
//! the text preprocessing used by the textual dropout model.

pub mod data;
pub mod error;
pub mod eval;
pub mod features;
pub mod hpo;
pub mod hybrid;
pub mod impute;
pub mod models;
pub mod pipeline;
pub mod rng;
pub mod stats;
pub mod textprep;
pub mod util;

pub use data::{FeatureSchema, PlanCell, Rq, TargetSpec, Task, UserFeatureTable};
pub use error::{Error, Result};
pub use eval::{ConfusionMatrix, MetricSet, RunDistribution, SignificanceReport};
pub use hpo::{AgreementReport, Assignment, OptimizationResult, SearchSpace};
pub use models::{FittedModel, ModelSpec};
