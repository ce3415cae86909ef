use std::fs;
use std::path::Path;

use vadkit::audio_io::{load_audio, load_labels, rasterize_labels, Condition, FrameLabels};
use vadkit::crossval::{make_folds, run_nested_cv_with_plan, CvConfig, SweepGrid};
use vadkit::evaluation::{
    align_scores, condition_breakdown, export_roc, published_reference, read_scores, roc_curve,
    roc_from_scores, score_frames, write_scores, ConditionReport, ScoreTrack,
};
use vadkit::features::{write_features, FeatureConfig, FeatureExtractor};
use vadkit::model::{count_params, load_model, save_model, ModelConfig};
use vadkit::training::{accuracy, train as train_model, TrainConfig, TrainingExample};
use vadkit::{Model, Result, VadError, FRAME_STEP_S};

use crate::data::{cv_items, load_dir};
use crate::{CvArgs, EvalArgs, FeaturesArgs, ParamsArgs, PredictArgs, RocExportArgs, TrainArgs};

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| VadError::Config(format!("{}: {e}", path.display())))
}

fn model_config(path: &Path) -> Result<ModelConfig> {
    let c: ModelConfig = read_json(path)?;
    c.validate()?;
    Ok(c)
}

fn train_config(path: &Path) -> Result<TrainConfig> {
    let c: TrainConfig = read_json(path)?;
    c.validate()?;
    Ok(c)
}

fn thousands(n: usize) -> String {
    let s = n.to_string();
    let mut out = String::new();
    for (i, ch) in s.chars().enumerate() {
        if i > 0 && (s.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

pub fn features(a: &FeaturesArgs) -> Result<()> {
    let buf = load_audio(&a.input, a.rate)?;
    let config = FeatureConfig {
        sample_rate_hz: a.rate,
        fmax_hz: (a.rate as f64 / 2.0).min(8000.0),
        ..FeatureConfig::default()
    };
    let seq = FeatureExtractor::new(config)?.extract(&buf)?;
    if seq.is_empty() {
        eprintln!(
            "warning: {} is shorter than one 320 ms image; no images written",
            a.input.display()
        );
    }
    write_features(&seq, &a.out)?;
    println!("images: {}", seq.len());
    println!("duration_s: {:.3}", buf.duration_s());
    Ok(())
}

pub fn train(a: &TrainArgs) -> Result<()> {
    let mc = model_config(&a.model_config)?;
    let tc = train_config(&a.train_config)?;
    let examples = examples_in(&a.data, tc.seq_len)?;
    if examples.is_empty() {
        return Err(VadError::Argument(format!(
            "{} holds no sequence of {} images",
            a.data.display(),
            tc.seq_len
        )));
    }
    let val = match &a.val_data {
        Some(dir) => whole_examples_in(dir)?,
        None => Vec::new(),
    };
    let (model, history) = train_model::<f32>(&examples, &mc, &tc, &val)?;
    save_model(&model, &a.out)?;
    let history_path = a.out.with_extension("history.csv");
    history.write_csv(&history_path)?;
    println!("train_acc: {:.4}", accuracy(&model, &examples)?);
    if !val.is_empty() {
        println!("val_acc: {:.4}", accuracy(&model, &val)?);
        println!("best_epoch: {}", history.best_epoch);
    }
    println!("model: {}", a.out.display());
    println!("history: {}", history_path.display());
    Ok(())
}

fn examples_in(dir: &Path, seq_len: usize) -> Result<Vec<TrainingExample>> {
    let mut out = Vec::new();
    for item in cv_items(load_dir(dir)?)? {
        out.extend(item.examples(seq_len)?);
    }
    Ok(out)
}

fn whole_examples_in(dir: &Path) -> Result<Vec<TrainingExample>> {
    cv_items(load_dir(dir)?)?
        .iter()
        .filter_map(|i| i.whole_example().transpose())
        .collect()
}

pub fn predict(a: &PredictArgs) -> Result<()> {
    let model: Model = load_model(&a.model)?;
    let buf = load_audio(&a.input, vadkit::WORKING_RATE_HZ)?;
    let seq = FeatureExtractor::new(FeatureConfig::default())?.extract(&buf)?;
    if seq.is_empty() {
        return Err(VadError::Argument(format!(
            "{} is shorter than one 320 ms image",
            a.input.display()
        )));
    }
    let frames = (buf.duration_s() / FRAME_STEP_S + 1e-9).floor() as usize;
    let track = score_frames(&model, &seq, frames)?;
    write_scores(&track, &a.out)?;
    println!("frames: {}", track.len());
    Ok(())
}

/// Reads a scores / labels pair, rasterizing labels over their own span.
fn scored_pair(scores: &Path, labels: &Path) -> Result<(ScoreTrack, FrameLabels)> {
    let track = read_scores(scores)?;
    let labels = load_labels(labels)?;
    let frames = rasterize_labels(&labels, labels.end_s(), FRAME_STEP_S)?;
    let aligned = align_scores(&track, &frames)?;
    Ok((ScoreTrack::new(aligned, FRAME_STEP_S)?, frames))
}

fn fmt_tpr(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "n/a".into())
}

pub fn eval(a: &EvalArgs) -> Result<()> {
    if a.scores.len() != a.labels.len() {
        return Err(VadError::Argument(format!(
            "{} --scores but {} --labels; give them in pairs",
            a.scores.len(),
            a.labels.len()
        )));
    }
    if !(0.0..=1.0).contains(&a.fpr) {
        return Err(VadError::Argument(format!(
            "--fpr {} outside [0, 1]",
            a.fpr
        )));
    }
    let mut pooled_scores = Vec::new();
    let mut pooled_labels: Vec<Condition> = Vec::new();
    let mut per_file_auc = Vec::new();
    for (s, l) in a.scores.iter().zip(&a.labels) {
        let (track, frames) = scored_pair(s, l)?;
        if let Ok(c) = roc_curve(&track, &frames) {
            per_file_auc.push(c.auc);
        }
        pooled_scores.extend(track.scores);
        pooled_labels.extend(frames.labels);
    }
    let track = ScoreTrack::new(pooled_scores, FRAME_STEP_S)?;
    let frames = FrameLabels::from_conditions(pooled_labels, FRAME_STEP_S);
    let curve = roc_from_scores(&track.scores, &frames.speech_mask)?;
    let report: ConditionReport = condition_breakdown(&track, &frames, a.fpr)?;
    if let Some(path) = &a.report {
        fs::write(path, serde_json::to_string_pretty(&report)?)?;
    }
    if let Some(path) = &a.roc {
        export_roc(&curve, path)?;
    }
    println!(
        "TPR at FPR {:.3} (threshold {:.6})",
        report.operating_fpr, report.threshold
    );
    println!(
        "{:<34} {:>6} {:>6} {:>6} {:>6}",
        "system", "Clean", "Noise", "Music", "All"
    );
    let t = &report.tpr;
    println!(
        "{:<34} {:>6} {:>6} {:>6} {:>6}",
        "this run",
        fmt_tpr(t.clean),
        fmt_tpr(t.noise),
        fmt_tpr(t.music),
        fmt_tpr(t.all)
    );
    if a.with_baselines {
        let r = published_reference()?;
        for row in &r.tpr_at_operating_fpr {
            println!(
                "{:<34} {:>6.3} {:>6.3} {:>6.3} {:>6.3}",
                format!("{} [published reference]", row.system),
                row.clean,
                row.noise,
                row.music,
                row.all
            );
        }
        println!("published reference rows come from the full AVA-Speech corpus and were not reproduced here");
    }
    println!("auc_pooled: {:.6}", curve.auc);
    if per_file_auc.len() > 1 {
        let mean = per_file_auc.iter().sum::<f64>() / per_file_auc.len() as f64;
        println!("auc_mean_per_file: {mean:.6}");
    }
    Ok(())
}

pub fn cv(a: &CvArgs) -> Result<()> {
    let grid = SweepGrid::from_json(&fs::read_to_string(&a.grid)?)?;
    let mut cfg = CvConfig {
        k_outer: a.outer,
        k_inner: a.inner,
        seed: a.seed,
        threshold: a.threshold,
        ..CvConfig::default()
    };
    if let Some(p) = &a.base_model {
        cfg.base_model = model_config(p)?;
    }
    if let Some(p) = &a.train_config {
        cfg.base_train = train_config(p)?;
    }
    let items = cv_items(load_dir(&a.data)?)?;
    if items.len() < cfg.k_outer {
        return Err(VadError::Argument(format!(
            "{} items cannot fill {} outer folds",
            items.len(),
            cfg.k_outer
        )));
    }
    let mut plan = make_folds(items.len(), cfg.k_outer, cfg.k_inner, cfg.seed)?;
    if a.debug_inject_leak {
        let leaked = plan.outer_test(0)[0];
        plan.inner[0][leaked] = Some(0);
    }
    let report = run_nested_cv_with_plan(&items, &grid, &cfg, plan)?;
    report.write_outputs(&a.out)?;
    print!("{}", report.table_csv());
    Ok(())
}

pub fn params(a: &ParamsArgs) -> Result<()> {
    let c = model_config(&a.model_config)?;
    for (layer, n) in c.layer_breakdown()? {
        println!("{layer:<10} {:>12}", thousands(n));
    }
    println!("{:<10} {:>12}", "total", thousands(count_params(&c)?));
    Ok(())
}

pub fn roc_export(a: &RocExportArgs) -> Result<()> {
    let (track, frames) = scored_pair(&a.scores, &a.labels)?;
    let curve = roc_curve(&track, &frames)?;
    export_roc(&curve, &a.out)?;
    println!("points: {}", curve.points.len());
    println!("auc: {:.6}", curve.auc);
    Ok(())
}
