//! Minibatch gradient-descent training, evaluation metrics, shot-budget
//! sweeps and ensembles.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{hex_digest, Dataset};
use crate::error::{check_len, Error, Result};
use crate::gradients::GradientMethod;
use crate::model::{Model, ModelSpec};
use crate::rng::{child_rng, derive_seed, Rng};

const STREAM_INIT: u64 = 1;
const STREAM_SHUFFLE: u64 = 2;
const STREAM_SHOTS: u64 = 3;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    #[default]
    PlainGd,
    Adam,
}

impl FromStr for Optimizer {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain_gd" | "gd" => Ok(Optimizer::PlainGd),
            "adam" => Ok(Optimizer::Adam),
            other => Err(Error::config(format!("unknown optimizer '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batches_per_epoch: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
    /// `None` trains on exact expectation values.
    pub shots_in_training: Option<u64>,
    pub gradient_method: GradientMethod,
    /// Stop after this many epochs without validation improvement.
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batches_per_epoch: 1000,
            batch_size: 100,
            learning_rate: 0.01,
            optimizer: Optimizer::PlainGd,
            seed: 0,
            shots_in_training: None,
            gradient_method: GradientMethod::Adjoint,
            patience: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be positive"));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::config(format!("invalid learning rate {}", self.learning_rate)));
        }
        if self.shots_in_training == Some(0) {
            return Err(Error::config("shots_in_training must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mse: f64,
    /// `None` when the targets have zero variance.
    pub r2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: Option<f64>,
    pub val_r2: Option<f64>,
    pub param_hash: String,
    pub wall_clock_s: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn train_mse(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.train_mse).collect()
    }

    /// Records with the timing column dropped, for reproducibility checks.
    pub fn without_timing(&self) -> Vec<EpochRecord> {
        self.records
            .iter()
            .map(|r| EpochRecord {
                wall_clock_s: 0.0,
                ..r.clone()
            })
            .collect()
    }
}

/// Trailing moving average with the given window (shorter at the start).
pub fn trailing_mean(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    (0..values.len())
        .map(|i| {
            let start = (i + 1).saturating_sub(window);
            let slice = &values[start..=i];
            slice.iter().sum::<f64>() / slice.len() as f64
        })
        .collect()
}

pub fn param_hash(params: &[f64]) -> String {
    let bytes: Vec<u8> = params.iter().flat_map(|v| v.to_le_bytes()).collect();
    hex_digest(&bytes)[..16].to_string()
}

/// Coefficient of determination; `None` when the targets are constant.
pub fn r_squared(predictions: &[f64], targets: &[f64]) -> Option<f64> {
    let n = targets.len() as f64;
    let mean = targets.iter().sum::<f64>() / n;
    let ss_tot: f64 = targets.iter().map(|y| (y - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return None;
    }
    let ss_res: f64 = predictions.iter().zip(targets).map(|(f, y)| (f - y).powi(2)).sum();
    Some(1.0 - ss_res / ss_tot)
}

pub fn metrics_from(predictions: &[f64], targets: &[f64]) -> Metrics {
    let mse = predictions
        .iter()
        .zip(targets)
        .map(|(f, y)| (f - y).powi(2))
        .sum::<f64>()
        / targets.len() as f64;
    Metrics {
        mse,
        r2: r_squared(predictions, targets),
    }
}

/// Predictions for every row. With `shots`, row `i` draws its measurements
/// from a stream derived from `(seed, i)`.
pub fn predict_all(model: &Model, data: &Dataset, shots: Option<u64>, seed: u64) -> Result<Vec<f64>> {
    check_len("model input width", model.n_inputs(), data.n_features())?;
    (0..data.len())
        .into_par_iter()
        .map(|i| match shots {
            None => model.predict(&data.features[i]),
            Some(n) => model.predict_sampled(&data.features[i], n, &mut child_rng(seed, &[i as u64])),
        })
        .collect()
}

pub fn evaluate(model: &Model, data: &Dataset, shots: Option<u64>, seed: u64) -> Result<Metrics> {
    evaluate_with(model, data, shots, seed, false)
}

/// [`evaluate`] with optional clamping of predictions to `[0, 1]` before
/// scoring.
pub fn evaluate_with(model: &Model, data: &Dataset, shots: Option<u64>, seed: u64, clamp: bool) -> Result<Metrics> {
    if data.is_empty() {
        return Err(Error::validation(None, "cannot evaluate on an empty dataset"));
    }
    let mut preds = predict_all(model, data, shots, seed)?;
    if clamp {
        for p in &mut preds {
            *p = p.clamp(0.0, 1.0);
        }
    }
    Ok(metrics_from(&preds, &data.targets))
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

/// Index stream that walks a fresh permutation of the dataset and
/// reshuffles whenever it runs dry.
struct BatchStream {
    perm: Vec<usize>,
    cursor: usize,
    rng: Rng,
}

impl BatchStream {
    fn new(n: usize, rng: Rng) -> Self {
        Self {
            perm: (0..n).collect(),
            cursor: n,
            rng,
        }
    }

    fn start_epoch(&mut self) {
        self.perm.shuffle(&mut self.rng);
        self.cursor = 0;
    }

    fn next_batch(&mut self, size: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(size);
        while out.len() < size {
            if self.cursor == self.perm.len() {
                self.perm.shuffle(&mut self.rng);
                self.cursor = 0;
            }
            let take = (size - out.len()).min(self.perm.len() - self.cursor);
            out.extend_from_slice(&self.perm[self.cursor..self.cursor + take]);
            self.cursor += take;
        }
        out
    }
}

/// Builds a model from `spec` and trains it.
pub fn train(
    spec: &ModelSpec,
    config: &TrainConfig,
    train_set: &Dataset,
    val_set: Option<&Dataset>,
) -> Result<(Model, TrainHistory)> {
    let mut rng = child_rng(config.seed, &[STREAM_INIT]);
    let model = spec.init(train_set.target_mean(), &mut rng)?;
    train_model(model, config, train_set, val_set)
}

/// Trains an existing model in place of a fresh initialization.
pub fn train_model(
    mut model: Model,
    config: &TrainConfig,
    train_set: &Dataset,
    val_set: Option<&Dataset>,
) -> Result<(Model, TrainHistory)> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::validation(None, "training set is empty"));
    }
    check_len("model input width", model.n_inputs(), train_set.n_features())?;
    if let Some(v) = val_set {
        check_len("validation width", model.n_inputs(), v.n_features())?;
    }

    let mut params = model.flat_params();
    let mut adam = AdamState {
        m: vec![0.0; params.len()],
        v: vec![0.0; params.len()],
        t: 0,
    };
    let mut stream = BatchStream::new(train_set.len(), child_rng(config.seed, &[STREAM_SHUFFLE]));
    let mut history = TrainHistory::default();
    let mut best_val = f64::INFINITY;
    let mut since_best = 0;

    for epoch in 1..=config.epochs {
        let started = Instant::now();
        stream.start_epoch();
        for batch_no in 1..=config.batches_per_epoch {
            let rows = stream.next_batch(config.batch_size);
            let (grad, mse) = batch_gradient(&model, train_set, &rows, config, epoch, batch_no)?;
            if !mse.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_no,
                    value: mse,
                });
            }
            step(&mut params, &grad, config, &mut adam);
            model.set_flat_params(&params)?;
        }

        let train_metrics = evaluate(&model, train_set, None, 0)?;
        if !train_metrics.mse.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                batch: config.batches_per_epoch,
                value: train_metrics.mse,
            });
        }
        let val_metrics = match val_set {
            Some(v) if !v.is_empty() => Some(evaluate(&model, v, None, 0)?),
            _ => None,
        };
        history.records.push(EpochRecord {
            epoch,
            train_mse: train_metrics.mse,
            val_mse: val_metrics.map(|m| m.mse),
            val_r2: val_metrics.and_then(|m| m.r2),
            param_hash: param_hash(&params),
            wall_clock_s: started.elapsed().as_secs_f64(),
        });
        log::info!(
            "{} epoch {epoch}/{}: train_mse={:.6} val_mse={:?}",
            model.kind(),
            config.epochs,
            train_metrics.mse,
            val_metrics.map(|m| m.mse)
        );

        if let (Some(patience), Some(vm)) = (config.patience, val_metrics) {
            if vm.mse < best_val {
                best_val = vm.mse;
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= patience {
                    log::info!("early stop after epoch {epoch}");
                    break;
                }
            }
        }
    }
    Ok((model, history))
}

fn batch_gradient(
    model: &Model,
    data: &Dataset,
    rows: &[usize],
    config: &TrainConfig,
    epoch: usize,
    batch_no: usize,
) -> Result<(Vec<f64>, f64)> {
    let terms: Vec<(f64, Vec<f64>)> = rows
        .par_iter()
        .enumerate()
        .map(|(slot, &i)| {
            let x = &data.features[i];
            let (f, g) = match config.shots_in_training {
                None => model.value_and_gradient(x, config.gradient_method)?,
                Some(n) => {
                    let mut rng = child_rng(config.seed, &[STREAM_SHOTS, epoch as u64, batch_no as u64, slot as u64]);
                    model.value_and_gradient_sampled(x, n, &mut rng)?
                }
            };
            Ok((f - data.targets[i], g))
        })
        .collect::<Result<_>>()?;
    let b = terms.len() as f64;
    let mut grad = vec![0.0; model.param_count()];
    let mut mse = 0.0;
    for (r, g) in &terms {
        mse += r * r;
        for (acc, gi) in grad.iter_mut().zip(g) {
            *acc += r * gi;
        }
    }
    grad.iter_mut().for_each(|v| *v *= 2.0 / b);
    Ok((grad, mse / b))
}

fn step(params: &mut [f64], grad: &[f64], config: &TrainConfig, adam: &mut AdamState) {
    let lr = config.learning_rate;
    match config.optimizer {
        Optimizer::PlainGd => {
            for (p, g) in params.iter_mut().zip(grad) {
                *p -= lr * g;
            }
        }
        Optimizer::Adam => {
            adam.t += 1;
            let c1 = 1.0 - ADAM_BETA1.powi(adam.t);
            let c2 = 1.0 - ADAM_BETA2.powi(adam.t);
            for (i, (p, g)) in params.iter_mut().zip(grad).enumerate() {
                adam.m[i] = ADAM_BETA1 * adam.m[i] + (1.0 - ADAM_BETA1) * g;
                adam.v[i] = ADAM_BETA2 * adam.v[i] + (1.0 - ADAM_BETA2) * g * g;
                let m_hat = adam.m[i] / c1;
                let v_hat = adam.v[i] / c2;
                *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
            }
        }
    }
}

/// Inference shot budget: exact expectation values or a finite shot count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ShotBudget {
    Shots(u64),
    Exact,
}

impl fmt::Display for ShotBudget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShotBudget::Exact => write!(f, "inf"),
            ShotBudget::Shots(n) => write!(f, "{n}"),
        }
    }
}

impl FromStr for ShotBudget {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "exact" => Ok(ShotBudget::Exact),
            t => {
                let n: f64 = t.parse().map_err(|_| Error::config(format!("bad shot count '{t}'")))?;
                if n < 1.0 || n.fract() != 0.0 || n > u64::MAX as f64 {
                    return Err(Error::config(format!(
                        "shot count must be a positive integer, got '{t}'"
                    )));
                }
                Ok(ShotBudget::Shots(n as u64))
            }
        }
    }
}

impl From<ShotBudget> for String {
    fn from(b: ShotBudget) -> String {
        b.to_string()
    }
}

impl TryFrom<String> for ShotBudget {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl ShotBudget {
    pub fn shots(self) -> Option<u64> {
        match self {
            ShotBudget::Exact => None,
            ShotBudget::Shots(n) => Some(n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotSweepRow {
    pub n_shots: ShotBudget,
    pub mean_r2: f64,
    pub std_r2: f64,
    pub repeats: usize,
    /// R² of every repeat, in repeat order.
    #[serde(skip)]
    pub r2_values: Vec<f64>,
}

/// Evaluates `model` at each shot budget `repeats` times with independent
/// measurement streams.
pub fn shot_sweep(
    model: &Model,
    data: &Dataset,
    shots_list: &[ShotBudget],
    repeats: usize,
    seed: u64,
) -> Result<Vec<ShotSweepRow>> {
    if shots_list.is_empty() {
        return Err(Error::config("shot list is empty"));
    }
    if repeats == 0 {
        return Err(Error::config("repeats must be at least 1"));
    }
    let mut rows = Vec::with_capacity(shots_list.len());
    for &budget in shots_list {
        let r2_values = match budget {
            ShotBudget::Exact => {
                let r2 = evaluate(model, data, None, 0)?.r2.unwrap_or(f64::NAN);
                vec![r2; repeats]
            }
            ShotBudget::Shots(n) => (0..repeats)
                .map(|r| {
                    let s = derive_seed(seed, &[n, r as u64]);
                    evaluate(model, data, Some(n), s).map(|m| m.r2.unwrap_or(f64::NAN))
                })
                .collect::<Result<Vec<_>>>()?,
        };
        let (mean_r2, std_r2) = mean_std(&r2_values);
        rows.push(ShotSweepRow {
            n_shots: budget,
            mean_r2,
            std_r2,
            repeats,
            r2_values,
        });
    }
    Ok(rows)
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone)]
pub struct EnsembleMember {
    pub seed: u64,
    pub model: Model,
    pub history: TrainHistory,
    pub metrics: Metrics,
}

#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub members: Vec<EnsembleMember>,
    pub r2_min: f64,
    pub r2_mean: f64,
    pub r2_max: f64,
}

/// Trains `n_instances` models with seeds `base_seed + i` and evaluates each
/// on `eval_set`.
pub fn ensemble_train(
    n_instances: usize,
    base_seed: u64,
    spec: &ModelSpec,
    config: &TrainConfig,
    train_set: &Dataset,
    val_set: Option<&Dataset>,
    eval_set: &Dataset,
) -> Result<EnsembleResult> {
    if n_instances < 2 {
        return Err(Error::config("an ensemble needs at least 2 instances"));
    }
    let members = (0..n_instances)
        .into_par_iter()
        .map(|i| {
            let seed = base_seed + i as u64;
            let cfg = TrainConfig { seed, ..config.clone() };
            let (model, history) = train(spec, &cfg, train_set, val_set)?;
            let metrics = evaluate(&model, eval_set, None, 0)?;
            Ok(EnsembleMember {
                seed,
                model,
                history,
                metrics,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let r2: Vec<f64> = members.iter().map(|m| m.metrics.r2.unwrap_or(f64::NAN)).collect();
    Ok(EnsembleResult {
        r2_min: r2.iter().copied().fold(f64::INFINITY, f64::min),
        r2_mean: r2.iter().sum::<f64>() / r2.len() as f64,
        r2_max: r2.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        members,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "NaN".to_string())
}

/// CSV `epoch,train_mse,val_mse,val_r2`.
pub fn write_history_csv<W: Write>(history: &TrainHistory, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["epoch", "train_mse", "val_mse", "val_r2"])?;
    for r in &history.records {
        w.write_record([
            r.epoch.to_string(),
            r.train_mse.to_string(),
            fmt_opt(r.val_mse),
            fmt_opt(r.val_r2),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// CSV `n_shots,mean_r2,std_r2,repeats`; the exact budget is written `inf`.
pub fn write_shot_sweep_csv<W: Write>(rows: &[ShotSweepRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["n_shots", "mean_r2", "std_r2", "repeats"])?;
    for r in rows {
        w.write_record([
            r.n_shots.to_string(),
            r.mean_r2.to_string(),
            r.std_r2.to_string(),
            r.repeats.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}
