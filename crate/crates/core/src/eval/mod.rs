//! Scoring, splitting, repeated evaluation, rank-based significance tests
//! and result summaries.

mod metrics;
mod repeated;
mod significance;
mod split;
mod summary;

pub use metrics::{r2_score, rmse, score, score_with_positive, ConfusionMatrix, MetricSet};
pub use repeated::{
    evaluate_once, fit_named, positive_label_for, repeated_eval, repeated_eval_xy, CellResult, EvalOptions,
    RunDistribution, DUMMY_MODEL,
};
pub use significance::{
    bonferroni, conover_iman, kruskal_wallis, ks_normality, Correction, PairwiseResult, SignificanceReport, ALPHA,
};
pub use split::{split_indices, split_train_test, Split};
pub use summary::{format_number, rank_cells, select_best, summarize, Summary};
