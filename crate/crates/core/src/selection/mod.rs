//! Couple-disjoint fold planning, nested cross-validation and reporting.

pub mod folds;
pub mod grid;
pub mod metrics;
pub mod nested;
pub mod report;

pub use folds::{plan_grouped_folds, FoldPlan};
pub use grid::Grid;
pub use metrics::{balanced_accuracy, ConfusionMatrix};
pub use nested::{
    audit_group_disjointness, derive_seed, inner_select, nested_cv, nested_cv_design, plan_nested_splits,
    run_experiment_matrix, CellStatus, CvSettings, EvalReport, ExperimentMatrix, FoldOutcome, InnerSelection,
    MatrixCell, NestedOutcome, SplitPlan,
};
pub use report::{best_confusion, CellRecord, MatrixRecord, Summary};
