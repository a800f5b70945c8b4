//! Feed-forward network `N_in → 12 → 6 → 2 → 1` with hand-written
//! reverse-mode gradients.
//!
//! Weights are stored row-major with shape `(out, in)`. The flattened
//! parameter order is, layer by layer, the weight matrix followed by the
//! bias vector.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

pub const HIDDEN_LAYERS: [usize; 3] = [12, 6, 2];
pub const LEAKY_SLOPE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    LeakyRelu,
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::LeakyRelu => {
                if x > 0.0 {
                    x
                } else {
                    LEAKY_SLOPE * x
                }
            }
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation `x`.
    fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::LeakyRelu => {
                if x > 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "leaky_relu" | "leaky-relu" => Ok(Activation::LeakyRelu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::config(format!("unknown activation '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub n_inputs: usize,
    pub activation: Activation,
}

impl MlpConfig {
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.n_inputs];
        sizes.extend_from_slice(&HIDDEN_LAYERS);
        sizes.push(1);
        sizes
    }

    pub fn param_count(&self) -> usize {
        count_for_sizes(&self.layer_sizes())
    }
}

fn count_for_sizes(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub n_in: usize,
    pub n_out: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl DenseLayer {
    fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_out,
            weights: vec![0.0; n_in * n_out],
            biases: vec![0.0; n_out],
        }
    }

    fn affine(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.weights
                .chunks_exact(self.n_in)
                .zip(&self.biases)
                .map(|(row, b)| row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + b),
        );
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub activation: Activation,
    pub layers: Vec<DenseLayer>,
}

impl MlpModel {
    /// The fixed `N_in → 12 → 6 → 2 → 1` network with Glorot-uniform
    /// weights and zero biases.
    pub fn init<R: rand::Rng + ?Sized>(config: MlpConfig, rng: &mut R) -> Result<Self> {
        if config.n_inputs == 0 {
            return Err(Error::config("MLP needs at least one input"));
        }
        Self::init_with_sizes(&config.layer_sizes(), config.activation, rng)
    }

    /// Arbitrary layer sizes; hidden layers use `activation`, the last layer
    /// is linear.
    pub fn init_with_sizes<R: rand::Rng + ?Sized>(
        sizes: &[usize],
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let mut model = Self::zeros(sizes, activation)?;
        for layer in &mut model.layers {
            let limit = (6.0 / (layer.n_in + layer.n_out) as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.random_range(-limit..limit);
            }
        }
        Ok(model)
    }

    pub fn zeros(sizes: &[usize], activation: Activation) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) || sizes[sizes.len() - 1] != 1 {
            return Err(Error::config(format!("invalid layer sizes {sizes:?}")));
        }
        Ok(Self {
            activation,
            layers: sizes.windows(2).map(|w| DenseLayer::zeros(w[0], w[1])).collect(),
        })
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.layers[0].n_in];
        sizes.extend(self.layers.iter().map(|l| l.n_out));
        sizes
    }

    pub fn n_inputs(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn param_count(&self) -> usize {
        count_for_sizes(&self.layer_sizes())
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        check_len("MLP parameter vector", self.param_count(), flat.len())?;
        let mut rest = flat;
        for l in &mut self.layers {
            let (w, tail) = rest.split_at(l.weights.len());
            let (b, tail) = tail.split_at(l.biases.len());
            l.weights.copy_from_slice(w);
            l.biases.copy_from_slice(b);
            rest = tail;
        }
        Ok(())
    }

    pub fn forward(&self, features: &[f64]) -> Result<f64> {
        check_len("MLP input", self.n_inputs(), features.len())?;
        let mut current = features.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.affine(&current, &mut next);
            if i != last {
                next.iter_mut().for_each(|v| *v = self.activation.apply(*v));
            }
            std::mem::swap(&mut current, &mut next);
        }
        Ok(current[0])
    }

    /// Output and `∂f/∂θ` for one input, by backpropagation.
    pub fn value_and_gradient(&self, features: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_len("MLP input", self.n_inputs(), features.len())?;
        let last = self.layers.len() - 1;
        // activations[i] is the input to layer i; pre[i] its affine output.
        let mut activations = vec![features.to_vec()];
        let mut pre = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::new();
            layer.affine(&activations[i], &mut z);
            let a = if i == last {
                z.clone()
            } else {
                z.iter().map(|v| self.activation.apply(*v)).collect()
            };
            pre.push(z);
            activations.push(a);
        }
        let value = activations[self.layers.len()][0];

        let mut grads: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(self.layers.len());
        // delta = ∂f/∂(pre-activation) of the current layer
        let mut delta = vec![1.0];
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let input = &activations[i];
            let mut gw = vec![0.0; layer.weights.len()];
            for (o, d) in delta.iter().enumerate() {
                for (k, x) in input.iter().enumerate() {
                    gw[o * layer.n_in + k] = d * x;
                }
            }
            let gb = delta.clone();
            if i > 0 {
                let mut back = vec![0.0; layer.n_in];
                for (o, d) in delta.iter().enumerate() {
                    for (k, b) in back.iter_mut().enumerate() {
                        *b += layer.weights[o * layer.n_in + k] * d;
                    }
                }
                for (b, z) in back.iter_mut().zip(&pre[i - 1]) {
                    *b *= self.activation.derivative(*z);
                }
                delta = back;
            }
            grads.push((gw, gb));
        }
        let mut flat = Vec::with_capacity(self.param_count());
        for (gw, gb) in grads.into_iter().rev() {
            flat.extend(gw);
            flat.extend(gb);
        }
        Ok((value, flat))
    }
}

pub fn mlp_forward(model: &MlpModel, features: &[f64]) -> Result<f64> {
    model.forward(features)
}

/// Gradient of the batch MSE with respect to every weight and bias, plus
/// the MSE.
pub fn mlp_gradient(model: &MlpModel, batch: &[(&[f64], f64)]) -> Result<(Vec<f64>, f64)> {
    if batch.is_empty() {
        return Err(Error::config("MLP gradient needs a non-empty batch"));
    }
    let b = batch.len() as f64;
    let mut grad = vec![0.0; model.param_count()];
    let mut mse = 0.0;
    for &(x, y) in batch {
        let (f, g) = model.value_and_gradient(x)?;
        let r = f - y;
        mse += r * r;
        for (acc, gi) in grad.iter_mut().zip(&g) {
            *acc += 2.0 * r * gi / b;
        }
    }
    Ok((grad, mse / b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn parameter_counts() {
        let c8 = MlpConfig {
            n_inputs: 8,
            activation: Activation::LeakyRelu,
        };
        assert_eq!(c8.param_count(), 203);
        let m = MlpModel::init(c8, &mut rng_from_seed(0)).unwrap();
        assert_eq!(m.flatten().len(), 203);
        let c6 = MlpConfig {
            n_inputs: 6,
            activation: Activation::Tanh,
        };
        assert_eq!(c6.param_count(), 179);
        assert_eq!(MlpModel::init(c6, &mut rng_from_seed(0)).unwrap().flatten().len(), 179);
    }

    #[test]
    fn zero_network_outputs_zero() {
        let m = MlpModel::zeros(&[8, 12, 6, 2, 1], Activation::LeakyRelu).unwrap();
        assert_eq!(m.forward(&[1.0; 8]).unwrap(), 0.0);
    }

    #[test]
    fn output_bias_only() {
        let mut m = MlpModel::zeros(&[8, 12, 6, 2, 1], Activation::Tanh).unwrap();
        m.layers[3].biases[0] = 0.7;
        assert_eq!(m.forward(&[0.3, -2.0, 5.0, 1.0, 0.0, 0.0, 9.0, 1.0]).unwrap(), 0.7);
    }

    #[test]
    fn arity_is_checked() {
        let m = MlpModel::zeros(&[8, 12, 6, 2, 1], Activation::Tanh).unwrap();
        assert!(m.forward(&[0.0; 7]).is_err());
        assert!(MlpModel::zeros(&[8, 0, 1], Activation::Tanh).is_err());
        assert!(MlpModel::zeros(&[8, 2], Activation::Tanh).is_err());
    }

    #[test]
    fn leaky_slope_is_one_percent() {
        // 1 → 1 → 1 network: out = w2·act(w1·x)
        let mut m = MlpModel::zeros(&[1, 1, 1], Activation::LeakyRelu).unwrap();
        m.set_flat(&[1.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(m.forward(&[3.0]).unwrap(), 3.0);
        let neg = m.forward(&[-3.0]).unwrap();
        assert!((neg + 0.03).abs() < 1e-15);
        // piecewise linear: scaling a negative input scales the output
        assert!((m.forward(&[-6.0]).unwrap() - 2.0 * neg).abs() < 1e-15);
    }

    #[test]
    fn zero_error_batch_zero_gradient() {
        let m = MlpModel::init(
            MlpConfig {
                n_inputs: 3,
                activation: Activation::Tanh,
            },
            &mut rng_from_seed(3),
        )
        .unwrap();
        let x = [0.2, 0.5, -0.1];
        let y = m.forward(&x).unwrap();
        let (g, mse) = mlp_gradient(&m, &[(&x[..], y)]).unwrap();
        assert_eq!(mse, 0.0);
        assert!(g.iter().all(|v| *v == 0.0));
        assert!(mlp_gradient(&m, &[]).is_err());
    }

    #[test]
    fn linear_layer_matches_least_squares_gradient() {
        // f = a·x + c; ∂MSE/∂a = (2/B) Σ r_i x_i, ∂MSE/∂c = (2/B) Σ r_i
        let mut m = MlpModel::zeros(&[2, 1], Activation::LeakyRelu).unwrap();
        m.set_flat(&[0.5, -1.0, 0.25]).unwrap();
        let xs = [[1.0, 2.0], [0.0, -1.0], [3.0, 0.5]];
        let ys = [0.1, 0.9, -0.4];
        let batch: Vec<(&[f64], f64)> = xs.iter().map(|x| &x[..]).zip(ys).collect();
        let (g, _) = mlp_gradient(&m, &batch).unwrap();
        let mut expected = [0.0; 3];
        for (x, y) in xs.iter().zip(ys) {
            let r = 0.5 * x[0] - x[1] + 0.25 - y;
            expected[0] += 2.0 * r * x[0] / 3.0;
            expected[1] += 2.0 * r * x[1] / 3.0;
            expected[2] += 2.0 * r / 3.0;
        }
        for (a, b) in g.iter().zip(expected) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn flat_round_trip() {
        let m = MlpModel::init(
            MlpConfig {
                n_inputs: 8,
                activation: Activation::LeakyRelu,
            },
            &mut rng_from_seed(4),
        )
        .unwrap();
        let mut other = MlpModel::zeros(&m.layer_sizes(), m.activation).unwrap();
        other.set_flat(&m.flatten()).unwrap();
        assert_eq!(other, m);
    }
}
