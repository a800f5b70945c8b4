//! Shared prediction interface over the circuit model, the MLP and the
//! Xu-Randall scheme.

use serde::{Deserialize, Serialize};

use crate::baselines::mlp::{MlpConfig, MlpModel};
use crate::baselines::xu_randall::XuRandallModel;
use crate::data::FeatureScaling;
use crate::error::{Error, Result};
use crate::gradients::{adjoint_gradient, parameter_shift_gradient, parameter_shift_gradient_sampled, GradientMethod};
use crate::qnn::{CircuitConfig, ParameterSet, QnnModel};

/// Anything that maps a feature row to a cloud-cover prediction.
///
/// Implementations are pure and may be called from several threads.
pub trait Predictor: Sync {
    fn n_features(&self) -> usize;
    fn predict(&self, features: &[f64]) -> Result<f64>;
}

/// Architecture to build before training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Qnn(CircuitConfig),
    Mlp(MlpConfig),
}

impl ModelSpec {
    pub fn n_inputs(&self) -> usize {
        match self {
            ModelSpec::Qnn(c) => c.n_qubits,
            ModelSpec::Mlp(c) => c.n_inputs,
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            ModelSpec::Qnn(c) => c.param_count(),
            ModelSpec::Mlp(c) => c.param_count(),
        }
    }

    /// Random initial parameters. The circuit model starts with its bias at
    /// `mean_target`; the MLP uses zero biases.
    pub fn init<R: rand::Rng + ?Sized>(&self, mean_target: f64, rng: &mut R) -> Result<Model> {
        match *self {
            ModelSpec::Qnn(c) => Ok(Model::Qnn(QnnModel::init(c, mean_target, rng)?)),
            ModelSpec::Mlp(c) => Ok(Model::Mlp(MlpModel::init(c, rng)?)),
        }
    }
}

/// A trainable model operating on scaled inputs.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Qnn(QnnModel),
    Mlp(MlpModel),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Qnn(_) => "qnn",
            Model::Mlp(_) => "mlp",
        }
    }

    pub fn n_inputs(&self) -> usize {
        match self {
            Model::Qnn(m) => m.config.n_qubits,
            Model::Mlp(m) => m.n_inputs(),
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Model::Qnn(m) => m.config.param_count(),
            Model::Mlp(m) => m.param_count(),
        }
    }

    pub fn flat_params(&self) -> Vec<f64> {
        match self {
            Model::Qnn(m) => m.params.flatten(),
            Model::Mlp(m) => m.flatten(),
        }
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        match self {
            Model::Qnn(m) => {
                m.params = ParameterSet::unflatten(&m.config, flat)?;
                Ok(())
            }
            Model::Mlp(m) => m.set_flat(flat),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        match self {
            Model::Qnn(m) => m.forward(x),
            Model::Mlp(m) => m.forward(x),
        }
    }

    /// Shot-based prediction; only the circuit model has a notion of shots.
    pub fn predict_sampled<R: rand::Rng + ?Sized>(&self, x: &[f64], n_shots: u64, rng: &mut R) -> Result<f64> {
        match self {
            Model::Qnn(m) => m.forward_sampled(x, n_shots, rng),
            Model::Mlp(_) => Err(Error::config("shot-based evaluation applies to the circuit model only")),
        }
    }

    pub fn value_and_gradient(&self, x: &[f64], method: GradientMethod) -> Result<(f64, Vec<f64>)> {
        match self {
            Model::Qnn(m) => match method {
                GradientMethod::Adjoint => adjoint_gradient(&m.config, &m.params, x).map(|(f, g)| (f, g.0)),
                GradientMethod::ParameterShift => {
                    let g = parameter_shift_gradient(&m.config, &m.params, x)?;
                    Ok((m.forward(x)?, g.0))
                }
            },
            Model::Mlp(m) => m.value_and_gradient(x),
        }
    }

    pub fn value_and_gradient_sampled<R: rand::Rng + ?Sized>(
        &self,
        x: &[f64],
        n_shots: u64,
        rng: &mut R,
    ) -> Result<(f64, Vec<f64>)> {
        match self {
            Model::Qnn(m) => {
                parameter_shift_gradient_sampled(&m.config, &m.params, x, n_shots, rng).map(|(f, g)| (f, g.0))
            }
            Model::Mlp(_) => Err(Error::config("shot-based training applies to the circuit model only")),
        }
    }
}

impl Predictor for Model {
    fn n_features(&self) -> usize {
        self.n_inputs()
    }

    fn predict(&self, features: &[f64]) -> Result<f64> {
        Model::predict(self, features)
    }
}

/// A model together with the scaling that maps raw physical features to
/// its inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledModel {
    pub model: Model,
    pub scaling: FeatureScaling,
}

impl ScaledModel {
    pub fn new(model: Model, scaling: FeatureScaling) -> Result<Self> {
        crate::error::check_len("scaling width", model.n_inputs(), scaling.n_features())?;
        Ok(Self { model, scaling })
    }
}

impl Predictor for ScaledModel {
    fn n_features(&self) -> usize {
        self.scaling.n_features()
    }

    fn predict(&self, features: &[f64]) -> Result<f64> {
        self.model.predict(&self.scaling.apply(features)?)
    }
}

impl Predictor for XuRandallModel {
    fn n_features(&self) -> usize {
        XuRandallModel::n_features(self)
    }

    fn predict(&self, features: &[f64]) -> Result<f64> {
        XuRandallModel::predict(self, features)
    }
}

/// Wraps a closure as a [`Predictor`].
pub struct FnPredictor<F> {
    n_features: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnPredictor<F> {
    pub fn new(n_features: usize, f: F) -> Self {
        Self { n_features, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> Predictor for FnPredictor<F> {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict(&self, features: &[f64]) -> Result<f64> {
        crate::error::check_len("predictor input", self.n_features, features.len())?;
        Ok((self.f)(features))
    }
}
