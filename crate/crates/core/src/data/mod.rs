//! Dataset representation: schema, masked tables, experiment plans and the
//! synthetic user generator.

pub mod plan;
pub mod schema;
pub mod synth;
pub mod table;

pub use plan::{build_plan, ExperimentPlan, PlanCell};
pub use schema::{
    violation_density, violation_density_columns, ColumnRole, ColumnSpec, FeatureSchema, Rq, TargetSpec, Task,
    ANSWERS, BASE_PREDICTORS, DROPOUT, GENDER, LANGUAGES, QUALITY_DIMENSIONS, USER_DEVELOPMENT_INDEX,
    USER_MANAGEMENT_INDEX,
};
pub use synth::{generate_synthetic_users, zero_group_columns, SyntheticProfile};
pub use table::{UserFeatureTable, MISSING};

use std::path::Path;

use crate::error::Result;

/// Loads a delimiter-separated user table under `schema`.
pub fn load_table(source: impl AsRef<Path>, schema: &FeatureSchema, delimiter: u8) -> Result<UserFeatureTable> {
    UserFeatureTable::load(source, schema, delimiter)
}
