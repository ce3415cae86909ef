use std::cmp::Ordering;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::folds::FoldPlan;
use super::report::CvItem;
use crate::error::{Result, VadError};
use crate::model::{count_params, ModelConfig};
use crate::training::{derive_seed, train, TrainConfig, TrainingExample};

/// A swept hyperparameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Conv1Kernel,
    Conv1Width,
    Conv2Kernel,
    Conv2Width,
    DenseWidth,
    LstmWidth,
    Dropout,
    BatchSize,
    SeqLen,
    Bidirectional,
}

impl Axis {
    pub const ALL: [Axis; 10] = [
        Axis::Conv1Kernel,
        Axis::Conv1Width,
        Axis::Conv2Kernel,
        Axis::Conv2Width,
        Axis::DenseWidth,
        Axis::LstmWidth,
        Axis::Dropout,
        Axis::BatchSize,
        Axis::SeqLen,
        Axis::Bidirectional,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Axis::Conv1Kernel => "conv1_kernel",
            Axis::Conv1Width => "conv1_width",
            Axis::Conv2Kernel => "conv2_kernel",
            Axis::Conv2Width => "conv2_width",
            Axis::DenseWidth => "dense_width",
            Axis::LstmWidth => "lstm_width",
            Axis::Dropout => "dropout",
            Axis::BatchSize => "batch_size",
            Axis::SeqLen => "seq_len",
            Axis::Bidirectional => "bidirectional",
        }
    }

    pub fn from_name(s: &str) -> Option<Axis> {
        Axis::ALL.into_iter().find(|a| a.name() == s)
    }

    /// Whether the axis changes the parameter count.
    pub fn affects_size(self) -> bool {
        !matches!(self, Axis::Dropout | Axis::BatchSize | Axis::SeqLen)
    }

    /// Current value of this axis in a configuration pair.
    pub fn get(self, m: &ModelConfig, t: &TrainConfig) -> AxisValue {
        match self {
            Axis::Conv1Kernel => AxisValue::Kernel(m.conv1_kernel),
            Axis::Conv1Width => AxisValue::Int(m.conv1_width),
            Axis::Conv2Kernel => AxisValue::Kernel(m.conv2_kernel),
            Axis::Conv2Width => AxisValue::Int(m.conv2_width),
            Axis::DenseWidth => AxisValue::Int(m.dense_width),
            Axis::LstmWidth => AxisValue::Int(m.lstm_width),
            Axis::Dropout => AxisValue::Float(t.dropout_rate as f64),
            Axis::BatchSize => AxisValue::Int(t.batch_size),
            Axis::SeqLen => AxisValue::Int(t.seq_len),
            Axis::Bidirectional => AxisValue::Bool(m.bidirectional),
        }
    }

    /// Sets this axis, rejecting values of the wrong kind.
    pub fn set(self, value: &AxisValue, m: &mut ModelConfig, t: &mut TrainConfig) -> Result<()> {
        match (self, value) {
            (Axis::Conv1Kernel, AxisValue::Kernel(k)) => m.conv1_kernel = *k,
            (Axis::Conv2Kernel, AxisValue::Kernel(k)) => m.conv2_kernel = *k,
            (Axis::Conv1Width, AxisValue::Int(v)) => m.conv1_width = *v,
            (Axis::Conv2Width, AxisValue::Int(v)) => m.conv2_width = *v,
            (Axis::DenseWidth, AxisValue::Int(v)) => m.dense_width = *v,
            (Axis::LstmWidth, AxisValue::Int(v)) => m.lstm_width = *v,
            (Axis::BatchSize, AxisValue::Int(v)) => t.batch_size = *v,
            (Axis::SeqLen, AxisValue::Int(v)) => t.seq_len = *v,
            (Axis::Dropout, AxisValue::Float(v)) => {
                t.dropout_rate = *v as f32;
                m.dropout_rate = *v as f32;
            }
            (Axis::Bidirectional, AxisValue::Bool(b)) => m.bidirectional = *b,
            _ => {
                return Err(VadError::Config(format!(
                    "value {value} does not fit axis {}",
                    self.name()
                )))
            }
        }
        Ok(())
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A candidate value on some axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisValue {
    Kernel([usize; 2]),
    Int(usize),
    Float(f64),
    Bool(bool),
}

impl AxisValue {
    /// Literal order used for the last tie break: kernels by area then
    /// shape, numbers numerically, `false < true`.
    fn literal_cmp(&self, other: &AxisValue) -> Ordering {
        match (self, other) {
            (AxisValue::Kernel(a), AxisValue::Kernel(b)) => (a[0] * a[1], a).cmp(&(b[0] * b[1], b)),
            (AxisValue::Int(a), AxisValue::Int(b)) => a.cmp(b),
            (AxisValue::Float(a), AxisValue::Float(b)) => a.total_cmp(b),
            (AxisValue::Bool(a), AxisValue::Bool(b)) => a.cmp(b),
            _ => Ordering::Equal,
        }
    }

    fn parse(axis: Axis, v: &Value) -> Result<AxisValue> {
        let bad = || VadError::Config(format!("grid value {v} does not fit axis {axis}"));
        let as_usize = |v: &Value| v.as_u64().map(|x| x as usize).filter(|&x| x > 0);
        Ok(match axis {
            Axis::Conv1Kernel | Axis::Conv2Kernel => match v {
                Value::Array(a) if a.len() == 2 => AxisValue::Kernel([
                    as_usize(&a[0]).ok_or_else(bad)?,
                    as_usize(&a[1]).ok_or_else(bad)?,
                ]),
                _ => {
                    let k = as_usize(v).ok_or_else(bad)?;
                    AxisValue::Kernel([k, k])
                }
            },
            Axis::Dropout => {
                let r = v
                    .as_f64()
                    .filter(|r| (0.0..1.0).contains(r))
                    .ok_or_else(bad)?;
                AxisValue::Float(r)
            }
            Axis::Bidirectional => AxisValue::Bool(v.as_bool().ok_or_else(bad)?),
            _ => AxisValue::Int(as_usize(v).ok_or_else(bad)?),
        })
    }
}

impl fmt::Display for AxisValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AxisValue::Kernel([h, w]) => write!(f, "{h}x{w}"),
            AxisValue::Int(v) => write!(f, "{v}"),
            AxisValue::Float(v) => write!(f, "{v}"),
            AxisValue::Bool(v) => write!(f, "{v}"),
        }
    }
}

/// Candidate values per swept axis. Axes absent from the grid are not
/// swept and keep their base value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub axes: Vec<(Axis, Vec<AxisValue>)>,
}

impl SweepGrid {
    /// Parses a JSON object keyed by axis name, each mapping to a list of
    /// candidates, e.g. `{"lstm_width": [32, 64], "conv1_kernel": [[3,3],[5,5]]}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let root: Value = serde_json::from_str(text)?;
        let obj = root
            .as_object()
            .ok_or_else(|| VadError::Config("grid file must be a JSON object".into()))?;
        let mut axes = Vec::new();
        for (key, list) in obj {
            let axis = Axis::from_name(key)
                .ok_or_else(|| VadError::Config(format!("unknown grid axis `{key}`")))?;
            let items = list
                .as_array()
                .filter(|a| !a.is_empty())
                .ok_or_else(|| VadError::Config(format!("axis `{key}` needs a non-empty list")))?;
            let values = items
                .iter()
                .map(|v| AxisValue::parse(axis, v))
                .collect::<Result<Vec<_>>>()?;
            axes.push((axis, values));
        }
        axes.sort_by_key(|(a, _)| *a);
        Ok(Self { axes })
    }

    /// Checks every swept value against the base configuration.
    pub fn validate(&self, base_model: &ModelConfig, base_train: &TrainConfig) -> Result<()> {
        for (axis, values) in &self.axes {
            if values.is_empty() {
                return Err(VadError::Config(format!("axis {axis} has no values")));
            }
            for v in values {
                let (mut m, mut t) = (base_model.clone(), base_train.clone());
                axis.set(v, &mut m, &mut t)?;
                m.validate()?;
                t.validate()?;
            }
        }
        Ok(())
    }
}

/// Boxplot summary of one (axis, value) distribution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl CellStats {
    /// Linear-interpolated quantiles; `None` when every cell failed.
    pub fn of(values: &[f64]) -> Option<CellStats> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let x = p * (v.len() - 1) as f64;
            let (lo, hi) = (x.floor() as usize, x.ceil() as usize);
            v[lo] + (v[hi] - v[lo]) * (x - lo as f64)
        };
        Some(CellStats {
            n: v.len(),
            min: v[0],
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
            max: v[v.len() - 1],
        })
    }
}

/// Inner-fold validation accuracies for every value of one axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisSweep {
    pub axis: Axis,
    pub values: Vec<AxisValue>,
    /// `accuracies[value][inner_fold]`; `None` marks a failed cell.
    pub accuracies: Vec<Vec<Option<f64>>>,
    pub stats: Vec<Option<CellStats>>,
}

impl AxisSweep {
    pub fn median(&self, value_index: usize) -> Option<f64> {
        self.stats[value_index].map(|s| s.median)
    }
}

/// All sweeps of one outer fold together with the base they vary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub outer_fold: usize,
    pub base_model: ModelConfig,
    pub base_train: TrainConfig,
    pub axes: Vec<AxisSweep>,
}

/// Chosen configuration pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl Selection {
    pub fn param_count(&self) -> Result<usize> {
        count_params(&self.model)
    }
}

pub(crate) fn examples_for(
    items: &[CvItem],
    indices: &[usize],
    seq_len: usize,
) -> Result<Vec<TrainingExample>> {
    let mut out = Vec::new();
    for &i in indices {
        out.extend(items[i].examples(seq_len)?);
    }
    Ok(out)
}

pub(crate) fn whole_examples(items: &[CvItem], indices: &[usize]) -> Result<Vec<TrainingExample>> {
    indices
        .iter()
        .filter_map(|&i| items[i].whole_example().transpose())
        .collect()
}

/// Trains one cell per (value, inner fold) of outer fold `outer_fold`
/// with `axis` set to each value and everything else at the base, and
/// records the validation accuracy of the retained snapshot. Cells whose
/// training fails are recorded as `None` with a warning.
#[allow(clippy::too_many_arguments)]
pub fn sweep_axis(
    plan: &FoldPlan,
    outer_fold: usize,
    axis: Axis,
    values: &[AxisValue],
    base_model: &ModelConfig,
    base_train: &TrainConfig,
    items: &[CvItem],
) -> Result<AxisSweep> {
    if values.is_empty() {
        return Err(VadError::Selection(format!(
            "axis {axis} has no values to sweep"
        )));
    }
    let cells: Vec<(usize, usize)> = (0..values.len())
        .flat_map(|v| (0..plan.k_inner).map(move |i| (v, i)))
        .collect();
    let flat = cells
        .par_iter()
        .map(|&(vi, inner)| -> Result<Option<f64>> {
            let (mut m, mut t) = (base_model.clone(), base_train.clone());
            axis.set(&values[vi], &mut m, &mut t)?;
            t.seed = derive_seed(
                base_train.seed,
                &[outer_fold as u64, inner as u64, axis as u64, vi as u64],
            );
            let (train_idx, val_idx) = plan.inner_split(outer_fold, inner);
            let train_ex = examples_for(items, &train_idx, t.seq_len)?;
            let val_ex = whole_examples(items, &val_idx)?;
            if train_ex.is_empty() || val_ex.is_empty() {
                log::warn!(
                    "{axis}={}: inner fold {inner} has no usable examples",
                    values[vi]
                );
                return Ok(None);
            }
            match train::<f32>(&train_ex, &m, &t, &val_ex) {
                Ok((_, history)) => Ok(history.best_val_acc()),
                Err(e) => {
                    log::warn!("{axis}={} inner fold {inner} failed: {e}", values[vi]);
                    Ok(None)
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let accuracies: Vec<Vec<Option<f64>>> = flat.chunks(plan.k_inner).map(<[_]>::to_vec).collect();
    let stats = accuracies
        .iter()
        .map(|row| CellStats::of(&row.iter().flatten().copied().collect::<Vec<_>>()))
        .collect();
    Ok(AxisSweep {
        axis,
        values: values.to_vec(),
        accuracies,
        stats,
    })
}

fn params_with(axis: Axis, value: &AxisValue, m: &ModelConfig, t: &TrainConfig) -> usize {
    let (mut m, mut t) = (m.clone(), t.clone());
    match axis.set(value, &mut m, &mut t) {
        Ok(()) => count_params(&m).unwrap_or(usize::MAX),
        Err(_) => usize::MAX,
    }
}

fn best_value(s: &AxisSweep, base_model: &ModelConfig, base_train: &TrainConfig) -> Result<usize> {
    let candidates: Vec<usize> = (0..s.values.len())
        .filter(|&i| s.median(i).is_some())
        .collect();
    candidates
        .into_iter()
        .min_by(|&a, &b| {
            let (ma, mb) = (
                s.median(a).expect("filtered"),
                s.median(b).expect("filtered"),
            );
            mb.total_cmp(&ma)
                .then_with(|| {
                    params_with(s.axis, &s.values[a], base_model, base_train).cmp(&params_with(
                        s.axis,
                        &s.values[b],
                        base_model,
                        base_train,
                    ))
                })
                .then_with(|| s.values[a].literal_cmp(&s.values[b]))
        })
        .ok_or_else(|| VadError::Selection(format!("axis {} has no successful cells", s.axis)))
}

/// Per axis, the value with the highest median inner-validation accuracy;
/// ties go to fewer parameters, then the smaller literal value.
pub fn select_best(results: &SweepResult) -> Result<Selection> {
    let (mut m, mut t) = (results.base_model.clone(), results.base_train.clone());
    for s in &results.axes {
        let i = best_value(s, &results.base_model, &results.base_train)?;
        s.axis.set(&s.values[i], &mut m, &mut t)?;
    }
    Ok(Selection { model: m, train: t })
}

/// Starts from [`select_best`]. Size-affecting axes whose best-to-worst
/// median gap is at most `threshold` are then moved, one at a time, to
/// the value giving the fewest parameters, so the result never has more
/// parameters than the best selection.
pub fn select_small(results: &SweepResult, threshold: f64) -> Result<Selection> {
    let Selection {
        model: mut m,
        train: mut t,
    } = select_best(results)?;
    for s in &results.axes {
        if !s.axis.affects_size() {
            continue;
        }
        let medians: Vec<f64> = (0..s.values.len()).filter_map(|i| s.median(i)).collect();
        let hi = medians.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = medians.iter().copied().fold(f64::INFINITY, f64::min);
        if hi - lo > threshold {
            continue;
        }
        let current = s.axis.get(&m, &t);
        let pick = s
            .values
            .iter()
            .enumerate()
            .filter(|(i, _)| s.median(*i).is_some())
            .map(|(_, v)| v)
            .chain(std::iter::once(&current))
            .min_by(|a, b| {
                params_with(s.axis, a, &m, &t)
                    .cmp(&params_with(s.axis, b, &m, &t))
                    .then_with(|| a.literal_cmp(b))
            })
            .copied()
            .expect("current value is a candidate");
        s.axis.set(&pick, &mut m, &mut t)?;
    }
    Ok(Selection { model: m, train: t })
}
