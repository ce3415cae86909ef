use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, VadError};

/// Mutually exclusive speech-activity condition of a labeled segment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Condition {
    NoSpeech,
    CleanSpeech,
    SpeechMusic,
    SpeechNoise,
}

impl Condition {
    pub const ALL: [Condition; 4] = [
        Condition::NoSpeech,
        Condition::CleanSpeech,
        Condition::SpeechMusic,
        Condition::SpeechNoise,
    ];

    pub fn is_speech(self) -> bool {
        self != Condition::NoSpeech
    }

    /// Canonical CSV spelling.
    pub fn as_str(self) -> &'static str {
        match self {
            Condition::NoSpeech => "NO_SPEECH",
            Condition::CleanSpeech => "CLEAN_SPEECH",
            Condition::SpeechMusic => "SPEECH_WITH_MUSIC",
            Condition::SpeechNoise => "SPEECH_WITH_NOISE",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "NO_SPEECH" | "NoSpeech" => Ok(Condition::NoSpeech),
            "CLEAN_SPEECH" | "CleanSpeech" => Ok(Condition::CleanSpeech),
            "SPEECH_WITH_MUSIC" | "Speech+Music" => Ok(Condition::SpeechMusic),
            "SPEECH_WITH_NOISE" | "Speech+Noise" => Ok(Condition::SpeechNoise),
            other => Err(format!("unknown condition '{other}'")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start_s: f64,
    pub end_s: f64,
    pub condition: Condition,
}

/// Non-overlapping labeled segments, sorted by start time.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabelTrack {
    segments: Vec<Segment>,
}

impl LabelTrack {
    pub fn new(mut segments: Vec<Segment>) -> Result<Self> {
        for s in &segments {
            if !(s.start_s.is_finite() && s.end_s.is_finite()) || s.end_s <= s.start_s {
                return Err(VadError::Validation(format!(
                    "segment [{}, {}) has non-positive length",
                    s.start_s, s.end_s
                )));
            }
        }
        segments.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
        for pair in segments.windows(2) {
            if pair[1].start_s < pair[0].end_s {
                return Err(VadError::Validation(format!(
                    "segments [{}, {}) {} and [{}, {}) {} overlap; labels must be mutually exclusive",
                    pair[0].start_s,
                    pair[0].end_s,
                    pair[0].condition,
                    pair[1].start_s,
                    pair[1].end_s,
                    pair[1].condition
                )));
            }
        }
        Ok(Self { segments })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// End of the last segment, or 0 for an empty track.
    pub fn end_s(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.end_s)
    }

    /// The segment containing time `t` under the half-open rule.
    pub fn condition_at(&self, t: f64) -> Option<Condition> {
        let idx = self.segments.partition_point(|s| s.start_s <= t);
        if idx == 0 {
            return None;
        }
        let seg = &self.segments[idx - 1];
        (t < seg.end_s).then_some(seg.condition)
    }
}

/// Parses `segment_id,start_s,end_s,condition` rows. A header row is
/// recognized by a non-numeric start field on the first line.
pub fn parse_labels(text: &str) -> Result<LabelTrack> {
    let mut segments = Vec::new();
    let mut first = true;
    for (i, line) in text.lines().enumerate() {
        let row = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let is_first = std::mem::replace(&mut first, false);
        if fields.len() != 4 {
            if is_first && fields.get(1).is_some_and(|f| f.parse::<f64>().is_err()) {
                continue;
            }
            return Err(VadError::Parse {
                row,
                message: format!("expected 4 columns, found {}", fields.len()),
            });
        }
        let start = fields[1].parse::<f64>();
        if is_first && start.is_err() {
            continue;
        }
        let start_s = start.map_err(|e| VadError::Parse {
            row,
            message: format!("bad start '{}': {e}", fields[1]),
        })?;
        let end_s = fields[2].parse::<f64>().map_err(|e| VadError::Parse {
            row,
            message: format!("bad end '{}': {e}", fields[2]),
        })?;
        let condition = fields[3]
            .parse::<Condition>()
            .map_err(|message| VadError::Parse { row, message })?;
        segments.push(Segment {
            start_s,
            end_s,
            condition,
        });
    }
    LabelTrack::new(segments)
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<LabelTrack> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_labels(&text)
}

/// Writes the track with canonical condition names; `segment_id` is used
/// for every row.
pub fn save_labels(track: &LabelTrack, segment_id: &str, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from("segment_id,start_s,end_s,condition\n");
    for s in track.segments() {
        out.push_str(&format!(
            "{segment_id},{},{},{}\n",
            s.start_s, s.end_s, s.condition
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Per-frame conditions on a fixed grid.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameLabels {
    pub frame_step_s: f64,
    pub labels: Vec<Condition>,
    pub speech_mask: Vec<bool>,
    /// Frames whose midpoint fell outside every segment.
    pub gap_frames: usize,
}

impl FrameLabels {
    pub fn from_conditions(labels: Vec<Condition>, frame_step_s: f64) -> Self {
        let speech_mask = labels.iter().map(|c| c.is_speech()).collect();
        Self {
            frame_step_s,
            labels,
            speech_mask,
            gap_frames: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Samples the track at each frame midpoint. Frame count is
/// `floor(duration / step)`; uncovered midpoints become `NoSpeech`.
pub fn rasterize_labels(
    track: &LabelTrack,
    duration_s: f64,
    frame_step_s: f64,
) -> Result<FrameLabels> {
    if frame_step_s.is_nan() || frame_step_s <= 0.0 {
        return Err(VadError::Argument("frame step must be positive".into()));
    }
    if duration_s.is_nan() || duration_s < 0.0 {
        return Err(VadError::Argument("duration must be non-negative".into()));
    }
    // Tolerate representation error in e.g. 0.35 / 0.01.
    let n = (duration_s / frame_step_s + 1e-9).floor() as usize;
    let mut labels = Vec::with_capacity(n);
    let mut gaps = 0;
    for i in 0..n {
        let mid = (i as f64 + 0.5) * frame_step_s;
        labels.push(track.condition_at(mid).unwrap_or_else(|| {
            gaps += 1;
            Condition::NoSpeech
        }));
    }
    if gaps > 0 {
        log::warn!("{gaps} of {n} frames fall in unlabeled gaps; treated as NoSpeech");
    }
    let mut frames = FrameLabels::from_conditions(labels, frame_step_s);
    frames.gap_frames = gaps;
    Ok(frames)
}
