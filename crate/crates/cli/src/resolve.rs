//! Turns parsed arguments (and an optional experiment document) into jobs.

use std::path::Path;

use serde::Deserialize;

use cloudqnn::baselines::Activation;
use cloudqnn::training::TrainConfig;
use cloudqnn::{Error, Result};

use crate::args::{CompareArgs, EvalArgs, ModelKind, ShapArgs, ShotSweepArgs, SynthArgs, TrainArgs};
use crate::jobs::{
    CompareJob, EvalJob, Job, ModelChoice, ShapJob, ShotSweepJob, SynthJob, TrainJob, DEFAULT_ANGLE_RANGE,
    DEFAULT_SPLIT,
};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSection {
    kind: Option<ModelKind>,
    n_enc: Option<usize>,
    n_var: Option<usize>,
    activation: Option<Activation>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DataSection {
    features: Option<String>,
    split: Option<[f64; 3]>,
    split_seed: Option<u64>,
    angle_range: Option<[f64; 2]>,
}

/// Experiment document: training settings at top level, plus optional
/// `[model]` and `[data]` tables.
#[derive(Debug, Default)]
pub struct ExperimentDoc {
    model: ModelSection,
    data: DataSection,
    train: TrainConfig,
}

impl ExperimentDoc {
    pub fn parse(text: &str) -> Result<Self> {
        let bad = |e: toml::de::Error| Error::Config(format!("experiment document: {}", e.message()));
        let mut table: toml::Table = toml::from_str(text).map_err(bad)?;
        let model = match table.remove("model") {
            Some(v) => v.try_into().map_err(bad)?,
            None => ModelSection::default(),
        };
        let data = match table.remove("data") {
            Some(v) => v.try_into().map_err(bad)?,
            None => DataSection::default(),
        };
        let train = toml::Value::Table(table).try_into().map_err(bad)?;
        Ok(Self { model, data, train })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::parse(&text)
    }
}

pub fn synth(a: SynthArgs) -> Result<Job> {
    let xu_randall = a.xu_randall.constants();
    xu_randall.validate()?;
    Ok(Job::Synth(SynthJob {
        n: a.n,
        seed: a.seed,
        noise_sd: a.noise_sd,
        xu_randall,
        out: a.out,
    }))
}

pub fn train(a: TrainArgs) -> Result<Job> {
    let doc = match &a.config {
        Some(path) => ExperimentDoc::load(path)?,
        None => ExperimentDoc::default(),
    };
    let kind = a
        .model
        .or(doc.model.kind)
        .ok_or_else(|| Error::Config("--model (or [model] kind) is required".into()))?;
    let features = match (a.features, &doc.data.features) {
        (Some(f), _) => f,
        (None, Some(s)) => s.parse()?,
        (None, None) => Default::default(),
    };
    let mut cfg = doc.train;
    macro_rules! take {
        ($field:ident, $arg:expr) => {
            if let Some(v) = $arg {
                cfg.$field = v;
            }
        };
    }
    take!(epochs, a.epochs);
    take!(batches_per_epoch, a.batches_per_epoch);
    take!(batch_size, a.batch_size);
    take!(learning_rate, a.lr);
    take!(optimizer, a.optimizer);
    take!(gradient_method, a.gradient);
    take!(seed, a.seed);
    if a.shots_in_training.is_some() {
        cfg.shots_in_training = a.shots_in_training;
    }
    if a.patience.is_some() {
        cfg.patience = a.patience;
    }
    cfg.validate()?;
    if kind == ModelKind::Mlp && cfg.shots_in_training.is_some() {
        return Err(Error::Config("shots_in_training applies to the qnn model only".into()));
    }
    let split_seed = a.split_seed.or(doc.data.split_seed).unwrap_or(cfg.seed);
    Ok(Job::Train(TrainJob {
        data: a.data,
        out: a.out,
        model: ModelChoice {
            kind,
            n_enc: a.n_enc.or(doc.model.n_enc).unwrap_or(5),
            n_var: a.n_var.or(doc.model.n_var).unwrap_or(3),
            activation: a.activation.or(doc.model.activation).unwrap_or_default(),
        },
        features,
        split: a.split.or(doc.data.split).unwrap_or(DEFAULT_SPLIT),
        split_seed,
        angle_range: doc.data.angle_range.unwrap_or(DEFAULT_ANGLE_RANGE),
        train: cfg,
    }))
}

pub fn eval(a: EvalArgs) -> Job {
    Job::Eval(EvalJob {
        checkpoint: a.checkpoint,
        data: a.data,
        split: a.split,
        shots: a.shots,
        seed: a.seed,
        clamp: a.clamp,
        out: a.out,
    })
}

pub fn shot_sweep(a: ShotSweepArgs) -> Job {
    Job::ShotSweep(ShotSweepJob {
        checkpoint: a.checkpoint,
        data: a.data,
        split: a.split,
        shots: a.shots.0,
        repeats: a.repeats,
        seed: a.seed,
        out: a.out,
    })
}

pub fn shap(a: ShapArgs) -> Result<Job> {
    let xu_randall = a.xu_randall.constants();
    xu_randall.validate()?;
    Ok(Job::Shap(ShapJob {
        checkpoints: a.checkpoints,
        data: a.data,
        split: a.split,
        max_instances: a.max_instances,
        background_size: a.background_size,
        mode: a.mode,
        seed: a.seed,
        xu_randall,
        out: a.out,
    }))
}

pub fn compare(a: CompareArgs) -> Result<Job> {
    let xu_randall = a.xu_randall.constants();
    xu_randall.validate()?;
    Ok(Job::Compare(CompareJob {
        qnn: a.qnn,
        mlp: a.mlp,
        data: a.data,
        split: a.split,
        clamp: a.clamp,
        xu_randall,
        out: a.out,
    }))
}
