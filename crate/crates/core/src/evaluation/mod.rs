//! Frame-level scoring on the 10 ms grid: ROC, AUC, TPR at a fixed FPR,
//! the per-condition breakdown and an energy baseline.

mod reference;
mod roc;
mod scoring;

pub use reference::{
    published_reference, FoldSummary, PublishedReference, ReferenceRow, ReferenceStd,
};
pub use roc::{
    condition_breakdown, export_roc, read_roc, roc_curve, roc_from_scores, tpr_at_fpr,
    ConditionReport, RocCurve, RocPoint, TprByCondition, PAPER_OPERATING_FPR,
};
pub use scoring::{
    align_scores, energy_baseline, expand_scores, read_scores, score_frames, write_scores,
    ScoreTrack,
};
