#![allow(dead_code)]

pub mod dense;

use cloudqnn::baselines::MlpModel;

/// Central finite differences of a scalar function of a flat vector.
pub fn central_differences(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|j| {
            probe[j] = x[j] + h;
            let plus = f(&probe);
            probe[j] = x[j] - h;
            let minus = f(&probe);
            probe[j] = x[j];
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// Layer-by-layer matrix-vector evaluation of an MLP, written without the
/// library's forward pass.
pub fn naive_mlp(model: &MlpModel, x: &[f64]) -> f64 {
    let mut a = x.to_vec();
    let last = model.layers.len() - 1;
    for (l, layer) in model.layers.iter().enumerate() {
        let mut z = vec![0.0; layer.n_out];
        for (o, zo) in z.iter_mut().enumerate() {
            *zo = layer.biases[o];
            for (i, ai) in a.iter().enumerate() {
                *zo += layer.weights[o * layer.n_in + i] * ai;
            }
        }
        if l < last {
            for v in &mut z {
                *v = match model.activation {
                    cloudqnn::baselines::Activation::LeakyRelu => {
                        if *v > 0.0 {
                            *v
                        } else {
                            0.01 * *v
                        }
                    }
                    cloudqnn::baselines::Activation::Tanh => v.tanh(),
                };
            }
        }
        a = z;
    }
    a[0]
}
