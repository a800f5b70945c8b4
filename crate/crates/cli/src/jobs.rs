//! Fully resolved experiment descriptions and their execution.
//!
//! A [`Job`] holds every setting a command depends on, so the copy stored in
//! a run manifest is enough to repeat the run.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use cloudqnn::baselines::{Activation, MlpConfig, XuRandallConstants, XuRandallModel};
use cloudqnn::checkpoint::{Checkpoint, SplitRecord};
use cloudqnn::data::{self, Dataset, FeatureScaling, FeatureSet, SynthMetadata, GENERATOR_VERSION};
use cloudqnn::explain::{self, ShapMode};
use cloudqnn::qnn::CircuitConfig;
use cloudqnn::training::{self, ShotBudget, TrainConfig};
use cloudqnn::{Error, ModelSpec, Predictor, Result, ScaledModel};

use crate::args::{ModelKind, SplitChoice};

pub const XU_RANDALL_ID: &str = "xu-randall";
pub const DEFAULT_SPLIT: [f64; 3] = [0.7, 0.1, 0.2];
pub const DEFAULT_ANGLE_RANGE: [f64; 2] = [0.0, std::f64::consts::PI];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Job {
    Synth(SynthJob),
    Train(TrainJob),
    Eval(EvalJob),
    ShotSweep(ShotSweepJob),
    Shap(ShapJob),
    Compare(CompareJob),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthJob {
    pub n: usize,
    pub seed: u64,
    pub noise_sd: f64,
    pub xu_randall: XuRandallConstants,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelChoice {
    pub kind: ModelKind,
    pub n_enc: usize,
    pub n_var: usize,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainJob {
    pub data: PathBuf,
    pub out: PathBuf,
    pub model: ModelChoice,
    pub features: FeatureSet,
    pub split: [f64; 3],
    pub split_seed: u64,
    pub angle_range: [f64; 2],
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalJob {
    pub checkpoint: PathBuf,
    pub data: PathBuf,
    pub split: SplitChoice,
    pub shots: Option<u64>,
    pub seed: u64,
    /// Clamp predictions to [0, 1] before scoring.
    #[serde(default)]
    pub clamp: bool,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotSweepJob {
    pub checkpoint: PathBuf,
    pub data: PathBuf,
    pub split: SplitChoice,
    pub shots: Vec<ShotBudget>,
    pub repeats: usize,
    pub seed: u64,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapJob {
    pub checkpoints: Vec<String>,
    pub data: PathBuf,
    pub split: SplitChoice,
    pub max_instances: Option<usize>,
    pub background_size: usize,
    pub mode: ShapMode,
    pub seed: u64,
    pub xu_randall: XuRandallConstants,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareJob {
    pub qnn: PathBuf,
    pub mlp: PathBuf,
    pub data: PathBuf,
    pub split: SplitChoice,
    #[serde(default)]
    pub clamp: bool,
    pub xu_randall: XuRandallConstants,
    pub out: PathBuf,
}

/// What a finished job produced.
pub struct Outcome {
    pub summary: Value,
    /// Printed to stdout after the run.
    pub report: Option<String>,
}

/// `dir/name.ext` → `dir/name.<suffix>`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    path.with_extension(suffix)
}

pub fn manifest_path(out: &Path) -> PathBuf {
    sibling(out, "manifest.json")
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| io_err(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

impl Job {
    pub fn name(&self) -> &'static str {
        match self {
            Job::Synth(_) => "synth",
            Job::Train(_) => "train",
            Job::Eval(_) => "eval",
            Job::ShotSweep(_) => "shot-sweep",
            Job::Shap(_) => "shap",
            Job::Compare(_) => "compare",
        }
    }

    pub fn out(&self) -> &Path {
        match self {
            Job::Synth(j) => &j.out,
            Job::Train(j) => &j.out,
            Job::Eval(j) => &j.out,
            Job::ShotSweep(j) => &j.out,
            Job::Shap(j) => &j.out,
            Job::Compare(j) => &j.out,
        }
    }

    pub fn set_out(&mut self, out: PathBuf) {
        match self {
            Job::Synth(j) => j.out = out,
            Job::Train(j) => j.out = out,
            Job::Eval(j) => j.out = out,
            Job::ShotSweep(j) => j.out = out,
            Job::Shap(j) => j.out = out,
            Job::Compare(j) => j.out = out,
        }
    }

    pub fn inputs(&self) -> Vec<PathBuf> {
        match self {
            Job::Synth(_) => vec![],
            Job::Train(j) => vec![j.data.clone()],
            Job::Eval(j) => vec![j.checkpoint.clone(), j.data.clone()],
            Job::ShotSweep(j) => vec![j.checkpoint.clone(), j.data.clone()],
            Job::Shap(j) => j
                .checkpoints
                .iter()
                .filter(|c| *c != XU_RANDALL_ID)
                .map(PathBuf::from)
                .chain([j.data.clone()])
                .collect(),
            Job::Compare(j) => vec![j.qnn.clone(), j.mlp.clone(), j.data.clone()],
        }
    }

    /// Every file the job writes, manifest included.
    pub fn outputs(&self) -> Vec<PathBuf> {
        let out = self.out().to_path_buf();
        let mut files = vec![out.clone()];
        match self {
            Job::Synth(_) => files.push(sibling(&out, "meta.json")),
            Job::Train(_) => files.push(sibling(&out, "history.csv")),
            Job::Shap(j) => {
                files.push(sibling(&out, "summary.csv"));
                if j.checkpoints.len() > 1 {
                    files.push(sibling(&out, "stability.csv"));
                }
            }
            _ => {}
        }
        files.push(manifest_path(&out));
        files
    }

    pub fn seeds(&self) -> BTreeMap<String, u64> {
        let mut s = BTreeMap::new();
        match self {
            Job::Synth(j) => {
                s.insert("data".into(), j.seed);
            }
            Job::Train(j) => {
                s.insert("train".into(), j.train.seed);
                s.insert("split".into(), j.split_seed);
            }
            Job::Eval(j) => {
                s.insert("shots".into(), j.seed);
            }
            Job::ShotSweep(j) => {
                s.insert("sweep".into(), j.seed);
            }
            Job::Shap(j) => {
                s.insert("shap".into(), j.seed);
            }
            Job::Compare(_) => {}
        }
        s
    }

    pub fn run(&self) -> Result<Outcome> {
        match self {
            Job::Synth(j) => run_synth(j),
            Job::Train(j) => run_train(j),
            Job::Eval(j) => run_eval(j),
            Job::ShotSweep(j) => run_shot_sweep(j),
            Job::Shap(j) => run_shap(j),
            Job::Compare(j) => run_compare(j),
        }
    }
}

fn run_synth(job: &SynthJob) -> Result<Outcome> {
    let dataset = data::synthesize_with_constants(job.n, job.seed, job.noise_sd, &job.xu_randall)?;
    data::write_csv(&dataset, create(&job.out)?)?;
    let meta = SynthMetadata {
        generator_version: GENERATOR_VERSION.to_string(),
        n: job.n,
        seed: job.seed,
        noise_sd: job.noise_sd,
        xu_randall: job.xu_randall,
    };
    write_json(&sibling(&job.out, "meta.json"), &meta)?;
    Ok(Outcome {
        summary: json!({ "rows": dataset.len(), "target_mean": dataset.target_mean() }),
        report: None,
    })
}

/// Rows of `split` under a recorded split policy.
fn select_split(dataset: &Dataset, split: SplitChoice, record: &SplitRecord) -> Result<Dataset> {
    if split == SplitChoice::All {
        return Ok(dataset.clone());
    }
    let [train, val, test] = data::split_indices(dataset.len(), record.fractions, record.seed)?;
    Ok(dataset.subset(match split {
        SplitChoice::Train => &train,
        SplitChoice::Val => &val,
        _ => &test,
    }))
}

fn run_train(job: &TrainJob) -> Result<Outcome> {
    let raw = data::load_csv(&job.data, &job.features)?;
    let record = SplitRecord {
        fractions: job.split,
        seed: job.split_seed,
    };
    let train_raw = select_split(&raw, SplitChoice::Train, &record)?;
    let val_raw = select_split(&raw, SplitChoice::Val, &record)?;
    let test_raw = select_split(&raw, SplitChoice::Test, &record)?;
    let scaling = FeatureScaling::fit(&train_raw, job.angle_range[0], job.angle_range[1])?;
    let train_set = scaling.transform(&train_raw)?;
    let val_set = scaling.transform(&val_raw)?;
    let test_set = scaling.transform(&test_raw)?;
    log::info!(
        "split {} rows into {}/{}/{} (scaling {})",
        raw.len(),
        train_set.len(),
        val_set.len(),
        test_set.len(),
        &scaling.checksum()[..16]
    );

    let n_inputs = raw.n_features();
    let spec = match job.model.kind {
        ModelKind::Qnn => ModelSpec::Qnn(CircuitConfig::new(n_inputs, job.model.n_enc, job.model.n_var)?),
        ModelKind::Mlp => ModelSpec::Mlp(MlpConfig {
            n_inputs,
            activation: job.model.activation,
        }),
    };
    log::info!(
        "training {} with {} parameters",
        job.model.kind.as_str(),
        spec.param_count()
    );
    let (model, history) = training::train(&spec, &job.train, &train_set, Some(&val_set))?;

    let test_metrics = if test_set.is_empty() {
        None
    } else {
        Some(training::evaluate(&model, &test_set, None, 0)?)
    };
    let mut checkpoint = Checkpoint::from_model(&model, &scaling)?;
    checkpoint.split = Some(record);
    checkpoint.train_config = Some(job.train.clone());
    checkpoint.metadata.insert("data".into(), json!(job.data));
    checkpoint
        .metadata
        .insert("toolkit_version".into(), json!(cloudqnn::VERSION));
    checkpoint.save(&job.out)?;
    training::write_history_csv(&history, create(&sibling(&job.out, "history.csv"))?)?;

    let last = history.records.last();
    Ok(Outcome {
        summary: json!({
            "model_kind": model.kind(),
            "param_count": model.param_count(),
            "epochs_completed": history.records.len(),
            "final_train_mse": last.map(|r| r.train_mse),
            "final_val_mse": last.and_then(|r| r.val_mse),
            "test_mse": test_metrics.map(|m| m.mse),
            "test_r2": test_metrics.and_then(|m| m.r2),
            "scaling_checksum": scaling.checksum(),
        }),
        report: None,
    })
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Qnn => "qnn",
            ModelKind::Mlp => "mlp",
        }
    }
}

impl SplitChoice {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitChoice::Train => "train",
            SplitChoice::Val => "val",
            SplitChoice::Test => "test",
            SplitChoice::All => "all",
        }
    }
}

struct LoadedCheckpoint {
    checkpoint: Checkpoint,
    model: cloudqnn::Model,
}

fn load_checkpoint(path: &Path) -> Result<LoadedCheckpoint> {
    let checkpoint = Checkpoint::load(path)?;
    let model = checkpoint.to_model()?;
    Ok(LoadedCheckpoint { checkpoint, model })
}

fn split_record(checkpoint: &Checkpoint, split: SplitChoice) -> Result<SplitRecord> {
    match (&checkpoint.split, split) {
        (Some(r), _) => Ok(r.clone()),
        (None, SplitChoice::All) => Ok(SplitRecord {
            fractions: [1.0, 0.0, 0.0],
            seed: 0,
        }),
        (None, _) => Err(Error::Schema("checkpoint records no split; use --split all".into())),
    }
}

/// Raw rows of the requested split, restricted to the checkpoint's features.
fn checkpoint_rows(loaded: &LoadedCheckpoint, data_path: &Path, split: SplitChoice) -> Result<Dataset> {
    let features = FeatureSet::Custom(loaded.checkpoint.scaling.feature_names.clone());
    let raw = data::load_csv(data_path, &features)?;
    select_split(&raw, split, &split_record(&loaded.checkpoint, split)?)
}

fn metrics_json(m: &training::Metrics) -> Value {
    json!({ "mse": m.mse, "r2": m.r2, "r2_defined": m.r2.is_some() })
}

fn run_eval(job: &EvalJob) -> Result<Outcome> {
    let loaded = load_checkpoint(&job.checkpoint)?;
    let rows = checkpoint_rows(&loaded, &job.data, job.split)?;
    let scaled = loaded.checkpoint.scaling.transform(&rows)?;
    let metrics = training::evaluate_with(&loaded.model, &scaled, job.shots, job.seed, job.clamp)?;
    let mut report = json!({
        "model_kind": loaded.model.kind(),
        "split": job.split.as_str(),
        "rows": rows.len(),
        "shots": job.shots,
        "seed": job.seed,
        "clamp": job.clamp,
    });
    if let (Value::Object(r), Value::Object(m)) = (&mut report, metrics_json(&metrics)) {
        r.extend(m);
    }
    write_json(&job.out, &report)?;
    Ok(Outcome {
        report: Some(serde_json::to_string_pretty(&report)?),
        summary: report,
    })
}

fn run_shot_sweep(job: &ShotSweepJob) -> Result<Outcome> {
    let loaded = load_checkpoint(&job.checkpoint)?;
    let rows = checkpoint_rows(&loaded, &job.data, job.split)?;
    let scaled = loaded.checkpoint.scaling.transform(&rows)?;
    let sweep = training::shot_sweep(&loaded.model, &scaled, &job.shots, job.repeats, job.seed)?;
    training::write_shot_sweep_csv(&sweep, create(&job.out)?)?;
    Ok(Outcome {
        summary: json!({ "rows": rows.len(), "budgets": sweep.len() }),
        report: None,
    })
}

/// Distinct identifiers for the models in a SHAP run.
fn model_ids(specs: &[String]) -> Vec<String> {
    let stems: Vec<String> = specs
        .iter()
        .map(|s| {
            if s == XU_RANDALL_ID {
                XU_RANDALL_ID.to_string()
            } else {
                Path::new(s)
                    .file_stem()
                    .map_or_else(|| s.clone(), |f| f.to_string_lossy().into_owned())
            }
        })
        .collect();
    stems
        .iter()
        .enumerate()
        .map(|(i, stem)| {
            if stems.iter().filter(|s| *s == stem).count() > 1 {
                format!("{stem}#{i}")
            } else {
                stem.clone()
            }
        })
        .collect()
}

fn run_shap(job: &ShapJob) -> Result<Outcome> {
    let mut loaded = Vec::new();
    for spec in job.checkpoints.iter().filter(|c| *c != XU_RANDALL_ID) {
        loaded.push(load_checkpoint(Path::new(spec))?);
    }
    let (feature_names, record) = match loaded.first() {
        Some(first) => {
            let names = first.checkpoint.scaling.feature_names.clone();
            let record = split_record(&first.checkpoint, job.split)?;
            for other in &loaded[1..] {
                if other.checkpoint.scaling.feature_names != names {
                    return Err(Error::Validation {
                        row: None,
                        message: "checkpoints use different feature sets".into(),
                    });
                }
                if split_record(&other.checkpoint, job.split)? != record {
                    return Err(Error::Validation {
                        row: None,
                        message: "checkpoints were trained on different splits".into(),
                    });
                }
            }
            (names, record)
        }
        None => (
            FeatureSet::Full.names(),
            SplitRecord {
                fractions: DEFAULT_SPLIT,
                seed: job.seed,
            },
        ),
    };

    let raw = data::load_csv(&job.data, &FeatureSet::Custom(feature_names.clone()))?;
    let background = explain::stratified_background(
        &select_split(&raw, SplitChoice::Train, &record)?,
        job.background_size,
        job.seed,
    )?;
    let mut test = select_split(&raw, job.split, &record)?;
    if let Some(k) = job.max_instances {
        let keep: Vec<usize> = (0..k.min(test.len())).collect();
        test = test.subset(&keep);
    }
    if test.is_empty() {
        return Err(Error::Validation {
            row: None,
            message: format!("split '{}' has no rows to explain", job.split.as_str()),
        });
    }

    let mut predictors: Vec<Box<dyn Predictor>> = Vec::new();
    let mut loaded = loaded.into_iter();
    for spec in &job.checkpoints {
        if spec == XU_RANDALL_ID {
            predictors.push(Box::new(XuRandallModel::new(&feature_names, job.xu_randall)?));
        } else {
            let l = loaded.next().expect("one loaded checkpoint per path");
            predictors.push(Box::new(ScaledModel::new(l.model, l.checkpoint.scaling)?));
        }
    }
    let ids = model_ids(&job.checkpoints);
    log::info!(
        "explaining {} rows with {} background rows for {} model(s)",
        test.len(),
        background.len(),
        predictors.len()
    );

    let refs: Vec<&dyn Predictor> = predictors.iter().map(|p| p.as_ref()).collect();
    let (results, stability) = if refs.len() > 1 {
        let (r, s) = explain::ensemble_importance_stability(&refs, &background, &test, job.mode, job.seed)?;
        (r, Some(s))
    } else {
        (
            vec![explain::explain_dataset(
                refs[0],
                &background,
                &test,
                job.mode,
                job.seed,
            )?],
            None,
        )
    };
    let summaries = results
        .iter()
        .map(explain::importance_summary)
        .collect::<Result<Vec<_>>>()?;

    let tagged: Vec<(String, &explain::AttributionResult)> = ids.iter().cloned().zip(&results).collect();
    explain::write_attributions_csv(&tagged, create(&job.out)?)?;
    let tagged: Vec<(String, &explain::ImportanceSummary)> = ids.iter().cloned().zip(&summaries).collect();
    explain::write_summary_csv(&tagged, create(&sibling(&job.out, "summary.csv"))?)?;
    if let Some(s) = &stability {
        explain::write_stability_csv(s, create(&sibling(&job.out, "stability.csv"))?)?;
    }

    let degenerate: usize = results.iter().map(|r| r.degenerate_rows.len()).sum();
    if degenerate > 0 {
        log::warn!("{degenerate} attribution(s) needed the pseudo-inverse fallback");
    }
    Ok(Outcome {
        summary: json!({
            "models": ids,
            "instances": test.len(),
            "background_rows": background.len(),
            "max_efficiency_gap": results.iter().map(|r| r.max_efficiency_gap()).fold(0.0, f64::max),
            "degenerate_rows": degenerate,
        }),
        report: None,
    })
}

fn run_compare(job: &CompareJob) -> Result<Outcome> {
    let qnn = load_checkpoint(&job.qnn)?;
    let mlp = load_checkpoint(&job.mlp)?;
    if qnn.model.kind() != "qnn" || mlp.model.kind() != "mlp" {
        return Err(Error::Validation {
            row: None,
            message: "compare needs a qnn checkpoint for --qnn and an mlp checkpoint for --mlp".into(),
        });
    }
    let record = split_record(&qnn.checkpoint, job.split)?;
    if split_record(&mlp.checkpoint, job.split)? != record {
        return Err(Error::Validation {
            row: None,
            message: "qnn and mlp checkpoints were trained on different splits".into(),
        });
    }

    let mut rows = Vec::new();
    for (name, l) in [("qnn", &qnn), ("mlp", &mlp)] {
        let raw = data::load_csv(
            &job.data,
            &FeatureSet::Custom(l.checkpoint.scaling.feature_names.clone()),
        )?;
        let scaled = l
            .checkpoint
            .scaling
            .transform(&select_split(&raw, job.split, &record)?)?;
        let m = training::evaluate_with(&l.model, &scaled, None, 0, job.clamp)?;
        rows.push((name, scaled.len(), m));
    }
    let full = data::load_csv(&job.data, &FeatureSet::Full)?;
    let subset = select_split(&full, job.split, &record)?;
    let xr = XuRandallModel::new(&full.feature_names, job.xu_randall)?;
    let predictions = subset
        .features
        .iter()
        .map(|x| xr.predict(x))
        .collect::<Result<Vec<_>>>()?;
    rows.push((
        "xu_randall",
        subset.len(),
        training::metrics_from(&predictions, &subset.targets),
    ));

    let mut w = csv::Writer::from_writer(create(&job.out)?);
    w.write_record(["model", "rows", "mse", "r2"])?;
    for (name, n, m) in &rows {
        let r2 = m.r2.map_or_else(|| "NaN".to_string(), |r| r.to_string());
        w.write_record([name.to_string(), n.to_string(), m.mse.to_string(), r2])?;
    }
    w.flush().map_err(|e| io_err(&job.out, e))?;

    let table: Vec<String> = rows
        .iter()
        .map(|(name, n, m)| {
            format!(
                "{name:<11} rows={n:<6} mse={:.6} r2={}",
                m.mse,
                m.r2.map_or_else(|| "undefined".into(), |r| format!("{r:.4}"))
            )
        })
        .collect();
    Ok(Outcome {
        summary: json!(rows
            .iter()
            .map(|(name, n, m)| json!({ "model": name, "rows": n, "mse": m.mse, "r2": m.r2 }))
            .collect::<Vec<_>>()),
        report: Some(table.join("\n")),
    })
}
