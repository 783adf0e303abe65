//! Feature engineering: the five train-fitted transforms, correlation
//! screening, variance inflation factors and composite removal.

mod transform;
mod vif;

pub use transform::{fit_apply_transform, ColumnParams, FeTechnique, FeatureTransform, POWER_GRID};
pub use vif::{
    composite_rules, compute_vif, drop_composites, pearson_r, prune_by_vif, VifEntry, VifReport, VIF_THRESHOLD,
};
