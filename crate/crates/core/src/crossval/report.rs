use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::folds::{make_folds, FoldPlan};
use super::sweep::{
    examples_for, select_best, select_small, sweep_axis, whole_examples, Selection, SweepGrid,
    SweepResult,
};
use crate::audio_io::FrameLabels;
use crate::error::{Result, VadError};
use crate::features::ImageSequence;
use crate::model::{save_model, ModelConfig, ModelParams};
use crate::training::{accuracy, derive_seed, image_targets, train, TrainConfig, TrainingExample};

/// One recording: the unit that folds are drawn over.
#[derive(Clone, Debug, PartialEq)]
pub struct CvItem {
    pub name: String,
    pub images: ImageSequence,
    pub targets: Vec<u8>,
}

impl CvItem {
    pub fn new(
        name: impl Into<String>,
        images: ImageSequence,
        frames: &FrameLabels,
    ) -> Result<Self> {
        let targets = image_targets(&images, frames)?;
        Ok(Self {
            name: name.into(),
            images,
            targets,
        })
    }

    /// Non-overlapping training sequences of `seq_len` images.
    pub fn examples(&self, seq_len: usize) -> Result<Vec<TrainingExample>> {
        (0..self.images.len() / seq_len)
            .map(|k| {
                let s = k * seq_len;
                TrainingExample::new(
                    self.images.slice(s, seq_len),
                    self.targets[s..s + seq_len].to_vec(),
                )
            })
            .collect()
    }

    /// The whole item as one sequence, or `None` when it has no images.
    pub fn whole_example(&self) -> Result<Option<TrainingExample>> {
        if self.images.is_empty() {
            return Ok(None);
        }
        TrainingExample::new(self.images.clone(), self.targets.clone()).map(Some)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub k_outer: usize,
    pub k_inner: usize,
    pub seed: u64,
    /// Largest best-to-worst median gap treated as "no effect" by
    /// [`select_small`](super::select_small).
    pub threshold: f64,
    pub base_model: ModelConfig,
    pub base_train: TrainConfig,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            k_outer: 10,
            k_inner: 9,
            seed: 0,
            threshold: 0.01,
            base_model: ModelConfig::small(),
            base_train: TrainConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldRow {
    pub fold: usize,
    pub best_params: usize,
    pub best_acc: f64,
    pub small_params: usize,
    pub small_acc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub best_params: f64,
    pub best_acc: f64,
    pub small_params: f64,
    pub small_acc: f64,
}

/// Per-outer-fold results, their mean and sample standard deviation, and
/// every inner sweep.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CvReport {
    pub config: CvConfig,
    pub plan: FoldPlan,
    pub folds: Vec<FoldRow>,
    pub mean: SummaryRow,
    pub std: SummaryRow,
    pub selections: Vec<(Selection, Selection)>,
    pub sweeps: Vec<SweepResult>,
    /// `(best, small)` model per outer fold.
    #[serde(skip)]
    pub models: Vec<(ModelParams<f32>, ModelParams<f32>)>,
}

fn summarize(rows: &[FoldRow]) -> (SummaryRow, SummaryRow) {
    let n = rows.len() as f64;
    let col = |f: &dyn Fn(&FoldRow) -> f64| -> (f64, f64) {
        let mean = rows.iter().map(f).sum::<f64>() / n;
        let var = rows.iter().map(|r| (f(r) - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        (mean, var.sqrt())
    };
    let bp = col(&|r| r.best_params as f64);
    let ba = col(&|r| r.best_acc);
    let sp = col(&|r| r.small_params as f64);
    let sa = col(&|r| r.small_acc);
    (
        SummaryRow {
            best_params: bp.0,
            best_acc: ba.0,
            small_params: sp.0,
            small_acc: sa.0,
        },
        SummaryRow {
            best_params: bp.1,
            best_acc: ba.1,
            small_params: sp.1,
            small_acc: sa.1,
        },
    )
}

impl CvReport {
    /// Table rows: one per outer fold plus mean and std.
    pub fn row_count(&self) -> usize {
        self.folds.len() + 2
    }

    pub fn table_csv(&self) -> String {
        let mut s = String::from("fold,best_params,best_acc,small_params,small_acc\n");
        for r in &self.folds {
            writeln!(
                s,
                "{},{},{},{},{}",
                r.fold, r.best_params, r.best_acc, r.small_params, r.small_acc
            )
            .expect("string write");
        }
        for (name, r) in [("mean", &self.mean), ("std", &self.std)] {
            writeln!(
                s,
                "{name},{},{},{},{}",
                r.best_params, r.best_acc, r.small_params, r.small_acc
            )
            .expect("string write");
        }
        s
    }

    /// Boxplot data for one outer fold: one row per successful inner cell.
    pub fn boxplot_csv(&self, outer_fold: usize) -> String {
        let mut s = String::from("axis,value,fold,accuracy\n");
        for sweep in self.sweeps.iter().filter(|r| r.outer_fold == outer_fold) {
            for a in &sweep.axes {
                for (v, row) in a.values.iter().zip(&a.accuracies) {
                    for (fold, acc) in row.iter().enumerate() {
                        if let Some(acc) = acc {
                            writeln!(s, "{},{},{},{}", a.axis, v, fold, acc).expect("string write");
                        }
                    }
                }
            }
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes `report.csv`, `report.json`, `boxplot_fold<k>.csv` and the
    /// `best_fold<k>.cblv` / `small_fold<k>.cblv` models into `dir`.
    pub fn write_outputs(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.csv"), self.table_csv())?;
        fs::write(dir.join("report.json"), self.to_json()?)?;
        for o in 0..self.folds.len() {
            fs::write(
                dir.join(format!("boxplot_fold{o}.csv")),
                self.boxplot_csv(o),
            )?;
        }
        for (o, (best, small)) in self.models.iter().enumerate() {
            save_model(best, dir.join(format!("best_fold{o}.cblv")))?;
            save_model(small, dir.join(format!("small_fold{o}.cblv")))?;
        }
        Ok(())
    }
}

/// Builds a seeded fold plan and runs [`run_nested_cv_with_plan`].
pub fn run_nested_cv(items: &[CvItem], grid: &SweepGrid, cfg: &CvConfig) -> Result<CvReport> {
    let plan = make_folds(items.len(), cfg.k_outer, cfg.k_inner, cfg.seed)?;
    run_nested_cv_with_plan(items, grid, cfg, plan)
}

fn train_and_test(
    items: &[CvItem],
    plan: &FoldPlan,
    o: usize,
    sel: &Selection,
    seed: u64,
) -> Result<(ModelParams<f32>, f64)> {
    let tc = TrainConfig {
        seed,
        ..sel.train.clone()
    };
    let train_ex = examples_for(items, &plan.outer_train(o), tc.seq_len)?;
    let test_ex = whole_examples(items, &plan.outer_test(o))?;
    if train_ex.is_empty() || test_ex.is_empty() {
        return Err(VadError::Argument(format!(
            "outer fold {o} has no usable train or test examples"
        )));
    }
    let (model, _) = train::<f32>(&train_ex, &sel.model, &tc, &[])?;
    let acc = accuracy(&model, &test_ex)?;
    Ok((model, acc))
}

/// For every outer fold: sweep each grid axis over the inner folds, select
/// the best and small configurations, retrain both on the full outer-train
/// set and score them on the outer-test items. The plan is checked for
/// leakage before any training starts.
pub fn run_nested_cv_with_plan(
    items: &[CvItem],
    grid: &SweepGrid,
    cfg: &CvConfig,
    plan: FoldPlan,
) -> Result<CvReport> {
    if plan.n_items() != items.len() {
        return Err(VadError::Argument(format!(
            "fold plan covers {} items, data has {}",
            plan.n_items(),
            items.len()
        )));
    }
    plan.validate()?;
    grid.validate(&cfg.base_model, &cfg.base_train)?;
    let base_train = TrainConfig {
        seed: cfg.seed,
        ..cfg.base_train.clone()
    };
    let base_model = ModelConfig {
        dropout_rate: base_train.dropout_rate,
        ..cfg.base_model.clone()
    };

    let mut folds = Vec::new();
    let mut selections = Vec::new();
    let mut sweeps = Vec::new();
    let mut models = Vec::new();
    for o in 0..plan.k_outer {
        let wrap = |e: VadError| VadError::Fold {
            fold: o,
            source: Box::new(e),
        };
        log::info!("outer fold {o}: sweeping {} axes", grid.axes.len());
        let axes = grid
            .axes
            .iter()
            .map(|(axis, values)| {
                sweep_axis(&plan, o, *axis, values, &base_model, &base_train, items)
            })
            .collect::<Result<Vec<_>>>()
            .map_err(wrap)?;
        let result = SweepResult {
            outer_fold: o,
            base_model: base_model.clone(),
            base_train: base_train.clone(),
            axes,
        };
        let best = select_best(&result).map_err(wrap)?;
        let small = select_small(&result, cfg.threshold).map_err(wrap)?;
        let (best_model, best_acc) = train_and_test(
            items,
            &plan,
            o,
            &best,
            derive_seed(cfg.seed, &[o as u64, 1]),
        )
        .map_err(wrap)?;
        let (small_model, small_acc) = train_and_test(
            items,
            &plan,
            o,
            &small,
            derive_seed(cfg.seed, &[o as u64, 2]),
        )
        .map_err(wrap)?;
        log::info!("outer fold {o}: best acc {best_acc:.4}, small acc {small_acc:.4}");
        folds.push(FoldRow {
            fold: o,
            best_params: best.param_count().map_err(wrap)?,
            best_acc,
            small_params: small.param_count().map_err(wrap)?,
            small_acc,
        });
        selections.push((best, small));
        sweeps.push(result);
        models.push((best_model, small_model));
    }
    let (mean, std) = summarize(&folds);
    Ok(CvReport {
        config: cfg.clone(),
        plan,
        folds,
        mean,
        std,
        selections,
        sweeps,
        models,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_reproduces_published_table() {
        // Outer-fold rows of the published comparison table.
        let best_k = [413, 880, 267, 715, 419, 287, 573, 355, 715, 531];
        let best_acc = [
            0.9132, 0.8975, 0.9397, 0.9061, 0.9228, 0.9170, 0.9213, 0.9146, 0.9263, 0.9181,
        ];
        let small_k = [150, 254, 150, 128, 254, 150, 254, 217, 254, 109];
        let small_acc = [
            0.9091, 0.9000, 0.9362, 0.9069, 0.9230, 0.9084, 0.9198, 0.9132, 0.9283, 0.9136,
        ];
        let rows: Vec<FoldRow> = (0..10)
            .map(|fold| FoldRow {
                fold,
                best_params: best_k[fold] * 1000,
                best_acc: best_acc[fold],
                small_params: small_k[fold] * 1000,
                small_acc: small_acc[fold],
            })
            .collect();
        let (mean, std) = summarize(&rows);
        assert!((mean.best_acc - 0.9177).abs() < 5e-5);
        assert!((mean.small_acc - 0.9159).abs() < 5e-5);
        // Per-fold counts are printed in rounded thousands.
        assert!((mean.best_params / 1000.0 - 516.0).abs() < 1.0);
        assert!((mean.small_params / 1000.0 - 192.0).abs() < 1.0);
        // Inputs are rounded to 4 places, so the std agrees to about 3e-5.
        assert!((std.best_acc - 0.01142).abs() < 3e-5);
        assert!((std.small_acc - 0.01096).abs() < 3e-5);
        assert!((std.best_params / 1000.0 - 204.0).abs() < 1.0);
        assert!((std.small_params / 1000.0 - 60.0).abs() < 1.0);
    }
}
