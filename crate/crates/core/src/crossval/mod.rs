//! Nested k-fold cross-validation: fold plans, one-axis-at-a-time
//! hyperparameter sweeps on inner folds, best / small model selection and
//! the per-outer-fold report.

mod folds;
mod report;
mod sweep;

pub use folds::{make_folds, FoldPlan};
pub use report::{
    run_nested_cv, run_nested_cv_with_plan, CvConfig, CvItem, CvReport, FoldRow, SummaryRow,
};
pub use sweep::{
    select_best, select_small, sweep_axis, Axis, AxisSweep, AxisValue, CellStats, Selection,
    SweepGrid, SweepResult,
};
