//! Self-describing JSON checkpoints for trained models.
//!
//! Parameters are stored flat. Circuit order: encoding blocks in re-upload
//! order (each block in gate-index order), trailing blocks, readout weights,
//! bias. MLP order: per layer, row-major weights then biases.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::mlp::{Activation, MlpModel};
use crate::data::FeatureScaling;
use crate::error::{Error, Result};
use crate::model::{Model, ScaledModel};
use crate::qnn::{CircuitConfig, ParameterSet, QnnModel};
use crate::training::TrainConfig;

pub const CHECKPOINT_FORMAT: &str = "cloudqnn-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Architecture {
    Qnn(CircuitConfig),
    Mlp {
        layer_sizes: Vec<usize>,
        activation: Activation,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub fractions: [f64; 3],
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub model_kind: String,
    pub architecture: Architecture,
    pub param_count: usize,
    pub parameters: Vec<f64>,
    pub scaling: FeatureScaling,
    pub scaling_checksum: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_config: Option<TrainConfig>,
    #[serde(default)]
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl Checkpoint {
    pub fn from_model(model: &Model, scaling: &FeatureScaling) -> Result<Self> {
        crate::error::check_len("scaling width", model.n_inputs(), scaling.n_features())?;
        let architecture = match model {
            Model::Qnn(m) => Architecture::Qnn(m.config),
            Model::Mlp(m) => Architecture::Mlp {
                layer_sizes: m.layer_sizes(),
                activation: m.activation,
            },
        };
        let parameters = model.flat_params();
        Ok(Self {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            model_kind: model.kind().to_string(),
            architecture,
            param_count: parameters.len(),
            parameters,
            scaling: scaling.clone(),
            scaling_checksum: scaling.checksum(),
            split: None,
            train_config: None,
            metadata: BTreeMap::new(),
        })
    }

    pub fn to_model(&self) -> Result<Model> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::Schema(format!("not a checkpoint (format '{}')", self.format)));
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Schema(format!(
                "unsupported checkpoint version {}",
                self.version
            )));
        }
        if self.parameters.len() != self.param_count {
            return Err(Error::Schema(format!(
                "checkpoint declares {} parameters but stores {}",
                self.param_count,
                self.parameters.len()
            )));
        }
        let mut model = match &self.architecture {
            Architecture::Qnn(config) => {
                config.validate()?;
                Model::Qnn(QnnModel::new(*config, ParameterSet::zeros(config))?)
            }
            Architecture::Mlp {
                layer_sizes,
                activation,
            } => Model::Mlp(MlpModel::zeros(layer_sizes, *activation)?),
        };
        if model.kind() != self.model_kind {
            return Err(Error::Schema(format!(
                "model kind '{}' does not match architecture '{}'",
                self.model_kind,
                model.kind()
            )));
        }
        model.set_flat_params(&self.parameters)?;
        if self.scaling.checksum() != self.scaling_checksum {
            return Err(Error::Schema("scaling record does not match its checksum".into()));
        }
        crate::error::check_len("scaling width", model.n_inputs(), self.scaling.n_features())?;
        Ok(model)
    }

    /// Model plus scaling, ready to predict on raw feature rows.
    pub fn to_scaled_model(&self) -> Result<ScaledModel> {
        ScaledModel::new(self.to_model()?, self.scaling.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_json(&text)
    }
}
