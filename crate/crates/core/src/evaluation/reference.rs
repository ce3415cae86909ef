use serde::{Deserialize, Serialize};

use crate::error::Result;

const PUBLISHED: &str = include_str!("../../data/published_reference.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceStd {
    pub clean: f64,
    pub noise: f64,
    pub music: f64,
    pub all: f64,
}

/// One system's TPRs at the operating FPR.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub system: String,
    pub clean: f64,
    pub noise: f64,
    pub music: f64,
    pub all: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std: Option<ReferenceStd>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub mean_params: f64,
    pub mean_acc: f64,
    pub std_params: f64,
    pub std_acc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OuterFoldSummary {
    pub best: FoldSummary,
    pub small: FoldSummary,
}

/// Published full-corpus numbers, shipped for side-by-side reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PublishedReference {
    pub note: String,
    pub operating_fpr: f64,
    pub tpr_at_operating_fpr: Vec<ReferenceRow>,
    pub outer_fold_summary: OuterFoldSummary,
    pub auc: f64,
}

pub fn published_reference() -> Result<PublishedReference> {
    Ok(serde_json::from_str(PUBLISHED)?)
}
