//! End-to-end runs of the `vadkit` binary.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;
use vadkit::audio_io::{
    save_labels, write_wav, AudioBuffer, Condition, LabelTrack, Segment, WavEncoding,
};
use vadkit::model::ModelConfig;
use vadkit::training::TrainConfig;

fn vadkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vadkit"))
        .args(args)
        .env("VADKIT_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// 320 ms slots of tone bursts (speech) or noise, with matching labels.
fn toy_wav(dir: &Path, name: &str, slots: &[bool], seed: u64) -> (PathBuf, PathBuf) {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let slot = 5120;
    let mut samples = Vec::new();
    for (k, &speech) in slots.iter().enumerate() {
        let len = if k + 1 == slots.len() {
            slot + 480
        } else {
            slot
        };
        let f0 = r.random_range(150.0..400.0);
        let amp = r.random_range(0.05..0.3);
        for i in 0..len {
            let t = i as f64 / 16_000.0;
            samples.push(if speech {
                amp * (1..=3)
                    .map(|h| (2.0 * PI * f0 * h as f64 * t).sin() / h as f64)
                    .sum::<f64>()
            } else {
                amp * r.random_range(-1.0..1.0)
            });
        }
    }
    let wav = dir.join(format!("{name}.wav"));
    write_wav(
        &wav,
        &AudioBuffer::new(samples, 16_000).unwrap(),
        WavEncoding::Pcm16,
    )
    .unwrap();
    let segs = slots
        .iter()
        .enumerate()
        .map(|(k, &s)| Segment {
            start_s: 0.32 * k as f64,
            end_s: 0.32 * (k + 1) as f64 + if k + 1 == slots.len() { 0.03 } else { 0.0 },
            condition: if s {
                Condition::CleanSpeech
            } else {
                Condition::NoSpeech
            },
        })
        .collect();
    let labels = dir.join(format!("{name}.csv"));
    save_labels(&LabelTrack::new(segs).unwrap(), name, &labels).unwrap();
    (wav, labels)
}

fn alternating(n: usize, offset: usize) -> Vec<bool> {
    (0..n).map(|k| !(k + offset).is_multiple_of(3)).collect()
}

fn tiny_model() -> ModelConfig {
    ModelConfig {
        conv1_kernel: [3, 3],
        conv1_width: 2,
        conv2_kernel: [3, 3],
        conv2_width: 2,
        dense_width: 8,
        lstm_width: 4,
        bidirectional: true,
        dropout_rate: 0.0,
        input_height: 32,
        input_width: 32,
    }
}

fn write_json<T: serde::Serialize>(path: &Path, v: &T) {
    fs::write(path, serde_json::to_string(v).unwrap()).unwrap();
}

/// `n` recordings converted to a train directory of `.vfea` + `.csv`.
fn data_dir(root: &Path, n: usize, slots: usize) -> PathBuf {
    let raw = root.join("raw");
    let data = root.join("data");
    fs::create_dir_all(&raw).unwrap();
    fs::create_dir_all(&data).unwrap();
    for k in 0..n {
        let name = format!("rec{k:02}");
        let (wav, labels) = toy_wav(&raw, &name, &alternating(slots, k), k as u64);
        let out = vadkit(&[
            "features",
            "--in",
            p(&wav),
            "--out",
            p(&data.join(format!("{name}.vfea"))),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        fs::copy(labels, data.join(format!("{name}.csv"))).unwrap();
    }
    data
}

#[test]
fn params_prints_published_counts() {
    let dir = TempDir::new().unwrap();
    for (cfg, want) in [
        (ModelConfig::best(), "530,946"),
        (ModelConfig::small(), "108,834"),
    ] {
        let path = dir.path().join("m.json");
        write_json(&path, &cfg);
        let out = vadkit(&["params", "--model-config", p(&path)]);
        assert_eq!(code(&out), 0);
        let text = stdout(&out);
        let total = text.lines().find(|l| l.starts_with("total")).unwrap();
        assert!(total.ends_with(want), "{text}");
    }
}

#[test]
fn features_counts_whole_images() {
    let dir = TempDir::new().unwrap();
    let (wav, _) = toy_wav(dir.path(), "ten", &alternating(31, 0), 1);
    // 31 slots plus a tail: 9.95 s. Pad to exactly 10 s.
    let ten_s = dir.path().join("ten_s.wav");
    let mut buf = vadkit::audio_io::read_wav(&wav).unwrap().into_samples();
    buf.resize(160_000, 0.0);
    write_wav(
        &ten_s,
        &AudioBuffer::new(buf, 16_000).unwrap(),
        WavEncoding::Pcm16,
    )
    .unwrap();
    let out = vadkit(&[
        "features",
        "--in",
        p(&ten_s),
        "--out",
        p(&dir.path().join("a.vfea")),
    ]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("images: 31"), "{}", stdout(&out));

    let short = dir.path().join("short.wav");
    write_wav(
        &short,
        &AudioBuffer::new(vec![0.1; 1600], 16_000).unwrap(),
        WavEncoding::Pcm16,
    )
    .unwrap();
    let out = vadkit(&[
        "features",
        "--in",
        p(&short),
        "--out",
        p(&dir.path().join("b.vfea")),
    ]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("images: 0"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
}

#[test]
fn error_exit_codes() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.wav");
    let out = vadkit(&[
        "features",
        "--in",
        p(&missing),
        "--out",
        p(&dir.path().join("x.vfea")),
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let (wav, _) = toy_wav(dir.path(), "clip", &alternating(4, 0), 2);
    let bad_model = dir.path().join("bad.cblv");
    fs::write(&bad_model, b"CBLV garbage").unwrap();
    let out = vadkit(&[
        "predict",
        "--model",
        p(&bad_model),
        "--in",
        p(&wav),
        "--out",
        p(&dir.path().join("s.csv")),
    ]);
    assert_eq!(code(&out), 2);

    // Only non-speech frames: the ROC is undefined.
    let silent_labels = dir.path().join("silent.csv");
    let track = LabelTrack::new(vec![Segment {
        start_s: 0.0,
        end_s: 1.0,
        condition: Condition::NoSpeech,
    }])
    .unwrap();
    save_labels(&track, "silent", &silent_labels).unwrap();
    let scores = dir.path().join("silent.scores.csv");
    let track = vadkit::evaluation::ScoreTrack::new(vec![0.3; 100], 0.01).unwrap();
    vadkit::evaluation::write_scores(&track, &scores).unwrap();
    let out = vadkit(&[
        "eval",
        "--scores",
        p(&scores),
        "--labels",
        p(&silent_labels),
    ]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));

    let out = vadkit(&["eval", "--scores", p(&scores)]);
    assert_eq!(code(&out), 2, "usage error");
}

#[test]
fn train_predict_eval_pipeline() {
    let dir = TempDir::new().unwrap();
    let data = data_dir(dir.path(), 4, 16);
    let mc = dir.path().join("model.json");
    let tc = dir.path().join("train.json");
    write_json(&mc, &tiny_model());
    write_json(
        &tc,
        &TrainConfig {
            batch_size: 4,
            seq_len: 8,
            epochs: 3,
            learning_rate: 3e-3,
            seed: 5,
            dropout_rate: 0.0,
        },
    );
    let m1 = dir.path().join("a.cblv");
    let m2 = dir.path().join("b.cblv");
    for m in [&m1, &m2] {
        let out = vadkit(&[
            "train",
            "--data",
            p(&data),
            "--model-config",
            p(&mc),
            "--train-config",
            p(&tc),
            "--out",
            p(m),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(
        fs::read(&m1).unwrap(),
        fs::read(&m2).unwrap(),
        "same seed, same bytes"
    );
    let history = fs::read_to_string(m1.with_extension("history.csv")).unwrap();
    assert!(history.starts_with("epoch,train_loss,train_acc,val_acc"));
    assert_eq!(history.lines().count(), 4);

    let (wav, labels) = toy_wav(dir.path(), "held", &alternating(20, 1), 99);
    let scores = dir.path().join("held.scores.csv");
    let out = vadkit(&[
        "predict",
        "--model",
        p(&m1),
        "--in",
        p(&wav),
        "--out",
        p(&scores),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(fs::read_to_string(&scores)
        .unwrap()
        .starts_with("frame_index,time_s,p_speech"));

    let report = dir.path().join("report.json");
    let roc = dir.path().join("roc.csv");
    let out = vadkit(&[
        "eval",
        "--scores",
        p(&scores),
        "--labels",
        p(&labels),
        "--report",
        p(&report),
        "--roc",
        p(&roc),
        "--with-baselines",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    for needle in [
        "Clean",
        "Noise",
        "Music",
        "All",
        "this run",
        "[published reference]",
        "auc_pooled",
    ] {
        assert!(text.contains(needle), "missing {needle} in\n{text}");
    }
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["operating_fpr"], 0.315);
    assert!(fs::read_to_string(&roc)
        .unwrap()
        .lines()
        .last()
        .unwrap()
        .starts_with("auc,"));

    let out = vadkit(&[
        "roc-export",
        "--scores",
        p(&scores),
        "--labels",
        p(&labels),
        "--out",
        p(&dir.path().join("r2.csv")),
    ]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("auc:"));
}

#[test]
fn cv_writes_table_and_catches_leaks() {
    let dir = TempDir::new().unwrap();
    let data = data_dir(dir.path(), 6, 8);
    let mc = dir.path().join("base.json");
    let tc = dir.path().join("train.json");
    let grid = dir.path().join("grid.json");
    write_json(&mc, &tiny_model());
    write_json(
        &tc,
        &TrainConfig {
            batch_size: 4,
            seq_len: 8,
            epochs: 1,
            learning_rate: 3e-3,
            seed: 0,
            dropout_rate: 0.0,
        },
    );
    fs::write(&grid, r#"{"lstm_width": [2, 4]}"#).unwrap();
    let out_dir = dir.path().join("cv");
    let args = |out: &Path| {
        vec![
            "cv".to_string(),
            "--data".into(),
            p(&data).into(),
            "--grid".into(),
            p(&grid).into(),
            "--outer".into(),
            "3".into(),
            "--inner".into(),
            "2".into(),
            "--base-model".into(),
            p(&mc).into(),
            "--train-config".into(),
            p(&tc).into(),
            "--out".into(),
            p(out).into(),
        ]
    };
    let run = |extra: &[&str], out: &Path| {
        let mut a = args(out);
        a.extend(extra.iter().map(|s| s.to_string()));
        vadkit(&a.iter().map(String::as_str).collect::<Vec<_>>())
    };
    let out = run(&[], &out_dir);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(out_dir.join("report.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 3 + 2, "{table}");
    for f in [
        "report.json",
        "boxplot_fold0.csv",
        "best_fold0.cblv",
        "small_fold2.cblv",
    ] {
        assert!(out_dir.join(f).exists(), "{f}");
    }

    let out = run(&["--debug-inject-leak"], &dir.path().join("leak"));
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("leak"));
}
