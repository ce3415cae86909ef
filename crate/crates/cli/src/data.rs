//! Data directories: `<name>.vfea` features paired with `<name>.csv` labels.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use vadkit::audio_io::{load_labels, rasterize_labels, FrameLabels};
use vadkit::crossval::CvItem;
use vadkit::features::{read_features, ImageSequence, IMAGE_FRAMES};
use vadkit::{Result, VadError, FRAME_STEP_S};

pub struct Recording {
    pub name: String,
    pub images: ImageSequence,
    pub frames: FrameLabels,
}

/// Loads every feature / label pair in `dir`, sorted by name. Unpaired
/// files are an error listing the orphans.
pub fn load_dir(dir: &Path) -> Result<Vec<Recording>> {
    let mut pairs: BTreeMap<String, (Option<PathBuf>, Option<PathBuf>)> = BTreeMap::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let (Some(stem), Some(ext)) = (path.file_stem(), path.extension()) else {
            continue;
        };
        let slot = pairs
            .entry(stem.to_string_lossy().into_owned())
            .or_default();
        match ext.to_str() {
            Some("vfea") => slot.0 = Some(path),
            Some("csv") => slot.1 = Some(path),
            _ => {}
        }
    }
    let orphans: Vec<String> = pairs
        .iter()
        .filter_map(|(name, (f, l))| match (f, l) {
            (Some(_), None) => Some(format!("{name}.vfea (no labels)")),
            (None, Some(_)) => Some(format!("{name}.csv (no features)")),
            _ => None,
        })
        .collect();
    if !orphans.is_empty() {
        return Err(VadError::Argument(format!(
            "unpaired files in {}: {}",
            dir.display(),
            orphans.join(", ")
        )));
    }
    if pairs.is_empty() {
        return Err(VadError::Argument(format!(
            "no feature/label pairs in {}",
            dir.display()
        )));
    }
    pairs
        .into_iter()
        .map(|(name, (f, l))| {
            let images = read_features(f.expect("paired"))?;
            let track = load_labels(l.expect("paired"))?;
            let covered = if images.is_empty() {
                0
            } else {
                (images.len() - 1) * images.frames_per_step() + IMAGE_FRAMES
            };
            let frames = rasterize_labels(&track, covered as f64 * FRAME_STEP_S, FRAME_STEP_S)?;
            Ok(Recording {
                name,
                images,
                frames,
            })
        })
        .collect()
}

pub fn cv_items(recs: Vec<Recording>) -> Result<Vec<CvItem>> {
    recs.into_iter()
        .map(|r| CvItem::new(r.name, r.images, &r.frames))
        .collect()
}
