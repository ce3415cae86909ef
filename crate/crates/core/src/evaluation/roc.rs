use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::scoring::{align_scores, ScoreTrack};
use crate::audio_io::{Condition, FrameLabels};
use crate::error::{Result, VadError};

/// False positive rate at which TPRs are reported for AVA-Speech.
pub const PAPER_OPERATING_FPR: f64 = 0.315;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Frames scoring at least this value are called speech. The first
    /// point's threshold is `+inf`.
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// Cumulative (false, true) positive counts at each distinct threshold,
/// descending, starting from `(0, 0, +inf)`.
fn sweep(scores: &[f64], positives: &[bool]) -> Vec<(u64, u64, f64)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut out = vec![(0u64, 0u64, f64::INFINITY)];
    let (mut fp, mut tp) = (0u64, 0u64);
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        while k < order.len() && scores[order[k]] == s {
            if positives[order[k]] {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        out.push((fp, tp, s));
    }
    out
}

/// ROC over raw scores; `positives[i]` marks speech frames. Tied scores
/// form one point and interior collinear points are dropped.
pub fn roc_from_scores(scores: &[f64], positives: &[bool]) -> Result<RocCurve> {
    if scores.len() != positives.len() {
        return Err(VadError::Alignment(format!(
            "{} scores for {} labels",
            scores.len(),
            positives.len()
        )));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(VadError::Metric(format!("score {i} is not finite")));
    }
    let p = positives.iter().filter(|&&x| x).count() as u64;
    let n = positives.len() as u64 - p;
    if p == 0 {
        return Err(VadError::Metric(
            "no positive (speech) frames; ROC undefined".into(),
        ));
    }
    if n == 0 {
        return Err(VadError::Metric(
            "no negative (non-speech) frames; ROC undefined".into(),
        ));
    }
    let raw = sweep(scores, positives);
    let mut kept: Vec<(u64, u64, f64)> = vec![raw[0]];
    for i in 1..raw.len() {
        if i + 1 < raw.len() {
            let (a, b, c) = (kept[kept.len() - 1], raw[i], raw[i + 1]);
            let cross = (b.0 as i128 - a.0 as i128) * (c.1 as i128 - b.1 as i128)
                - (b.1 as i128 - a.1 as i128) * (c.0 as i128 - b.0 as i128);
            if cross == 0 {
                continue;
            }
        }
        kept.push(raw[i]);
    }
    // Exact trapezoid in integer units of 1 / (2·n·p).
    let twice_area: u128 = kept
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) as u128 * (w[1].1 + w[0].1) as u128)
        .sum();
    let auc = twice_area as f64 / (2.0 * n as f64 * p as f64);
    let points = kept
        .into_iter()
        .map(|(fp, tp, threshold)| RocPoint {
            fpr: fp as f64 / n as f64,
            tpr: tp as f64 / p as f64,
            threshold,
        })
        .collect();
    Ok(RocCurve { points, auc })
}

/// ROC of a score track against speech / non-speech frame labels.
pub fn roc_curve(scores: &ScoreTrack, frames: &FrameLabels) -> Result<RocCurve> {
    let aligned = align_scores(scores, frames)?;
    roc_from_scores(&aligned, &frames.speech_mask)
}

/// TPR at `target_fpr` by linear interpolation between the last point with
/// `fpr ≤ target` and its successor, plus the lower point's threshold.
pub fn tpr_at_fpr(curve: &RocCurve, target_fpr: f64) -> (f64, f64) {
    let target = target_fpr.clamp(0.0, 1.0);
    let lo = curve
        .points
        .iter()
        .rposition(|p| p.fpr <= target)
        .unwrap_or(0);
    let a = curve.points[lo];
    match curve.points.get(lo + 1) {
        Some(b) if b.fpr > a.fpr => (
            a.tpr + (b.tpr - a.tpr) * (target - a.fpr) / (b.fpr - a.fpr),
            a.threshold,
        ),
        _ => (a.tpr, a.threshold),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TprByCondition {
    pub clean: Option<f64>,
    pub noise: Option<f64>,
    pub music: Option<f64>,
    pub all: Option<f64>,
}

/// TPR per condition at one global operating point. `None` marks a
/// condition with no frames.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub operating_fpr: f64,
    pub threshold: f64,
    pub tpr: TprByCondition,
    pub auc: Option<f64>,
}

/// Picks one operating point where the FPR over NoSpeech frames equals
/// `target_fpr` (interpolating between the two bracketing thresholds) and
/// reads every condition's TPR at that same point.
pub fn condition_breakdown(
    scores: &ScoreTrack,
    frames: &FrameLabels,
    target_fpr: f64,
) -> Result<ConditionReport> {
    let aligned = align_scores(scores, frames)?;
    let negatives = frames
        .labels
        .iter()
        .filter(|&&c| c == Condition::NoSpeech)
        .count();
    if negatives == 0 {
        return Err(VadError::Metric("no NoSpeech frames; FPR undefined".into()));
    }
    let target = target_fpr.clamp(0.0, 1.0);
    // Cumulative counts per class at each distinct threshold, descending.
    let mut order: Vec<usize> = (0..aligned.len()).collect();
    order.sort_by(|&a, &b| aligned[b].total_cmp(&aligned[a]));
    let class = |c: Condition| {
        Condition::ALL
            .iter()
            .position(|&x| x == c)
            .expect("known condition")
    };
    let mut rows: Vec<([usize; 4], f64)> = vec![([0; 4], f64::INFINITY)];
    let mut counts = [0usize; 4];
    let mut k = 0;
    while k < order.len() {
        let s = aligned[order[k]];
        while k < order.len() && aligned[order[k]] == s {
            counts[class(frames.labels[order[k]])] += 1;
            k += 1;
        }
        rows.push((counts, s));
    }
    let neg = class(Condition::NoSpeech);
    let fpr = |r: &([usize; 4], f64)| r.0[neg] as f64 / negatives as f64;
    let lo = rows.iter().rposition(|r| fpr(r) <= target).unwrap_or(0);
    let (alpha, hi) = match rows.get(lo + 1) {
        Some(h) if fpr(h) > fpr(&rows[lo]) => (
            (target - fpr(&rows[lo])) / (fpr(h) - fpr(&rows[lo])),
            lo + 1,
        ),
        _ => (0.0, lo),
    };
    let rate = |classes: &[Condition]| {
        let total: usize = classes.iter().map(|&c| counts[class(c)]).sum();
        (total > 0).then(|| {
            let at = |i: usize| classes.iter().map(|&c| rows[i].0[class(c)]).sum::<usize>() as f64;
            (at(lo) + alpha * (at(hi) - at(lo))) / total as f64
        })
    };
    let speech = [
        Condition::CleanSpeech,
        Condition::SpeechNoise,
        Condition::SpeechMusic,
    ];
    let auc = if frames.speech_mask.iter().any(|&s| s) {
        Some(roc_from_scores(&aligned, &frames.speech_mask)?.auc)
    } else {
        None
    };
    Ok(ConditionReport {
        operating_fpr: target,
        threshold: rows[lo].1,
        tpr: TprByCondition {
            clean: rate(&[Condition::CleanSpeech]),
            noise: rate(&[Condition::SpeechNoise]),
            music: rate(&[Condition::SpeechMusic]),
            all: rate(&speech),
        },
        auc,
    })
}

/// Writes `fpr,tpr,threshold` rows followed by an `auc,<value>` line.
pub fn export_roc(curve: &RocCurve, path: impl AsRef<Path>) -> Result<()> {
    let mut s = String::from("fpr,tpr,threshold\n");
    for p in &curve.points {
        writeln!(s, "{},{},{}", p.fpr, p.tpr, p.threshold).expect("string write");
    }
    writeln!(s, "auc,{}", curve.auc).expect("string write");
    fs::write(path, s)?;
    Ok(())
}

pub fn read_roc(path: impl AsRef<Path>) -> Result<RocCurve> {
    let text = fs::read_to_string(path)?;
    let mut points = Vec::new();
    let mut auc = None;
    for (row, line) in text.lines().enumerate().skip(1) {
        let fields: Vec<&str> = line.trim().split(',').collect();
        let num = |s: &str| {
            s.parse::<f64>().map_err(|e| VadError::Parse {
                row: row + 1,
                message: format!("`{s}`: {e}"),
            })
        };
        match fields.as_slice() {
            [""] => {}
            ["auc", v] => auc = Some(num(v)?),
            [f, t, th] => points.push(RocPoint {
                fpr: num(f)?,
                tpr: num(t)?,
                threshold: num(th)?,
            }),
            _ => {
                return Err(VadError::Parse {
                    row: row + 1,
                    message: format!("expected 3 fields, got `{line}`"),
                })
            }
        }
    }
    let auc = auc.ok_or_else(|| VadError::Format("ROC file has no auc line".into()))?;
    Ok(RocCurve { points, auc })
}
