//! Library results against independent reference implementations.

mod common;

use common::dense;
use num_complex::Complex64;
use rand::Rng;

use cloudqnn::baselines::{Activation, MlpModel};
use cloudqnn::explain::{kernel_shap, ShapMode};
use cloudqnn::gradients::{adjoint_gradient, loss_gradient, parameter_shift_gradient, GradientMethod};
use cloudqnn::model::FnPredictor;
use cloudqnn::qnn::{self, CircuitConfig, ParameterSet};
use cloudqnn::rng::rng_from_seed;
use cloudqnn::statevector::{Gate, PauliAxis, QuantumState};

fn random_state(n: usize, rng: &mut impl Rng) -> Vec<Complex64> {
    let mut v: Vec<Complex64> = (0..1 << n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for a in &mut v {
        *a /= norm;
    }
    v
}

fn random_gate(n: usize, rng: &mut impl Rng) -> Gate {
    let angle = rng.random_range(-2.0 * std::f64::consts::PI..2.0 * std::f64::consts::PI);
    if n == 1 || rng.random_bool(0.3) {
        return Gate::Rx {
            qubit: rng.random_range(0..n),
            angle,
        };
    }
    let a = rng.random_range(0..n);
    let b = (a + rng.random_range(1..n)) % n;
    let axis = [PauliAxis::X, PauliAxis::Y, PauliAxis::Z][rng.random_range(0..3)];
    Gate::PauliPair { axis, a, b, angle }
}

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn random_params(config: &CircuitConfig, scale: f64, rng: &mut impl Rng) -> ParameterSet {
    let flat: Vec<f64> = (0..config.param_count())
        .map(|_| rng.random_range(-scale..scale))
        .collect();
    ParameterSet::unflatten(config, &flat).unwrap()
}

#[test]
fn random_circuits_match_dense_evaluator() {
    let mut rng = rng_from_seed(11);
    for trial in 0..100 {
        let n = 1 + trial % 3;
        let gates: Vec<Gate> = (0..rng.random_range(1..=20))
            .map(|_| random_gate(n, &mut rng))
            .collect();
        let start = if trial % 2 == 0 {
            dense::zero_state(n)
        } else {
            random_state(n, &mut rng)
        };
        let mut state = QuantumState::from_amplitudes(start.clone()).unwrap();
        for g in &gates {
            state.apply(g).unwrap();
        }
        let expected = dense::run(n, &gates, &start);
        assert!(
            max_diff(state.amplitudes(), &expected) < 1e-10,
            "trial {trial}: {gates:?}"
        );
    }
}

#[test]
fn blocks_match_dense_evaluator() {
    let mut rng = rng_from_seed(12);
    for n in 2..=3 {
        let config = CircuitConfig::new(n, 1, 1).unwrap();
        for _ in 0..10 {
            let start = random_state(n, &mut rng);
            let theta: Vec<f64> = (0..config.v_block_len()).map(|_| rng.random_range(-3.0..3.0)).collect();
            let phi: Vec<f64> = (0..config.w_block_len()).map(|_| rng.random_range(-3.0..3.0)).collect();

            let mut s = QuantumState::from_amplitudes(start.clone()).unwrap();
            qnn::apply_v_block(&mut s, &theta).unwrap();
            assert!(max_diff(s.amplitudes(), &dense::run(n, &dense::v_block(n, &theta), &start)) < 1e-10);

            let mut s = QuantumState::from_amplitudes(start.clone()).unwrap();
            qnn::apply_w_block(&mut s, &phi).unwrap();
            assert!(max_diff(s.amplitudes(), &dense::run(n, &dense::w_block(n, &phi), &start)) < 1e-10);
        }
    }
}

#[test]
fn forward_matches_dense_evaluator() {
    let mut rng = rng_from_seed(13);
    for (n, n_enc, n_var) in [(2, 1, 0), (2, 3, 2), (3, 2, 1), (3, 5, 3)] {
        let config = CircuitConfig::new(n, n_enc, n_var).unwrap();
        for _ in 0..5 {
            let params = random_params(&config, 2.0, &mut rng);
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..std::f64::consts::PI)).collect();
            let lib = qnn::forward(&config, &params, &x).unwrap();
            let reference = dense::forward(&config, &params, &x);
            assert!((lib - reference).abs() < 1e-10, "{lib} vs {reference}");
            let state = qnn::prepare_state(&config, &params, &x).unwrap();
            assert!(max_diff(state.amplitudes(), &dense::circuit_state(&config, &params, &x)) < 1e-10);
        }
    }
}

#[test]
fn circuit_gradients_match_finite_differences() {
    let mut rng = rng_from_seed(14);
    for n in [3, 6, 8] {
        let config = CircuitConfig::default_for(n).unwrap();
        for _ in 0..3 {
            let params = random_params(&config, 1.0, &mut rng);
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..std::f64::consts::PI)).collect();
            let shift = parameter_shift_gradient(&config, &params, &x).unwrap();
            let fd = common::central_differences(&params.flatten(), 1e-5, |flat| {
                qnn::forward(&config, &ParameterSet::unflatten(&config, flat).unwrap(), &x).unwrap()
            });
            let dev = shift.iter().zip(&fd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(dev <= 1e-6, "N={n}: {dev}");
            let (_, adj) = adjoint_gradient(&config, &params, &x).unwrap();
            assert!(adj.max_abs_diff(&shift) < 1e-10);
        }
    }
}

#[test]
fn dense_gradient_agrees_on_small_circuit() {
    // Differentiate the dense evaluator itself, so the shift rule is checked
    // against a forward pass that shares no kernels with the library.
    let mut rng = rng_from_seed(15);
    let config = CircuitConfig::new(3, 2, 1).unwrap();
    let params = random_params(&config, 1.5, &mut rng);
    let x = [0.4, 1.9, 2.8];
    let fd = common::central_differences(&params.flatten(), 1e-5, |flat| {
        dense::forward(&config, &ParameterSet::unflatten(&config, flat).unwrap(), &x)
    });
    let shift = parameter_shift_gradient(&config, &params, &x).unwrap();
    let dev = shift.iter().zip(&fd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(dev <= 1e-6, "{dev}");
}

#[test]
fn batch_loss_gradient_matches_finite_differences() {
    let mut rng = rng_from_seed(16);
    let config = CircuitConfig::default_for(4).unwrap();
    let params = random_params(&config, 1.0, &mut rng);
    let rows: Vec<(Vec<f64>, f64)> = (0..4)
        .map(|_| {
            (
                (0..4).map(|_| rng.random_range(0.0..3.0)).collect(),
                rng.random_range(0.0..1.0),
            )
        })
        .collect();
    let batch: Vec<(&[f64], f64)> = rows.iter().map(|(x, y)| (x.as_slice(), *y)).collect();
    let mse_of = |flat: &[f64]| {
        let p = ParameterSet::unflatten(&config, flat).unwrap();
        rows.iter()
            .map(|(x, y)| (qnn::forward(&config, &p, x).unwrap() - y).powi(2))
            .sum::<f64>()
            / rows.len() as f64
    };
    let fd = common::central_differences(&params.flatten(), 1e-5, mse_of);
    for method in [GradientMethod::Adjoint, GradientMethod::ParameterShift] {
        let (grad, mse) = loss_gradient(&config, &params, &batch, method).unwrap();
        assert!((mse - mse_of(&params.flatten())).abs() < 1e-14);
        let dev = grad.iter().zip(&fd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(dev <= 1e-6, "{method:?}: {dev}");
    }
}

#[test]
fn mlp_matches_naive_evaluation_and_finite_differences() {
    let mut rng = rng_from_seed(17);
    for activation in [Activation::LeakyRelu, Activation::Tanh] {
        for n in [6, 8] {
            let model = MlpModel::init_with_sizes(&[n, 12, 6, 2, 1], activation, &mut rng).unwrap();
            // Non-zero biases so every layer's bias gradient is exercised.
            let mut flat = model.flatten();
            for v in &mut flat {
                *v += rng.random_range(-0.2..0.2);
            }
            let mut model = model;
            model.set_flat(&flat).unwrap();
            for _ in 0..5 {
                let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..3.0)).collect();
                let (value, grad) = model.value_and_gradient(&x).unwrap();
                assert!((value - common::naive_mlp(&model, &x)).abs() < 1e-12);
                assert!((model.forward(&x).unwrap() - value).abs() < 1e-15);
                let fd = common::central_differences(&flat, 1e-5, |p| {
                    let mut m = model.clone();
                    m.set_flat(p).unwrap();
                    common::naive_mlp(&m, &x)
                });
                let dev = grad.iter().zip(&fd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                assert!(dev <= 1e-6, "{activation:?} N={n}: {dev}");
            }
        }
    }
}

/// Shapley values by direct enumeration of the permutation-weighted
/// marginal contributions, with interventional coalition values.
fn brute_force_shapley(f: &dyn Fn(&[f64]) -> f64, background: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    let m = x.len();
    let value = |mask: usize| {
        background
            .iter()
            .map(|b| {
                let z: Vec<f64> = (0..m).map(|j| if mask >> j & 1 == 1 { x[j] } else { b[j] }).collect();
                f(&z)
            })
            .sum::<f64>()
            / background.len() as f64
    };
    let values: Vec<f64> = (0..1usize << m).map(value).collect();
    let fact = |k: usize| (1..=k).map(|v| v as f64).product::<f64>();
    (0..m)
        .map(|j| {
            (0..1usize << m)
                .filter(|s| s >> j & 1 == 0)
                .map(|s| {
                    let size = s.count_ones() as usize;
                    fact(size) * fact(m - size - 1) / fact(m) * (values[s | 1 << j] - values[s])
                })
                .sum()
        })
        .collect()
}

#[test]
fn exact_kernel_shap_equals_enumerated_shapley_values() {
    let mut rng = rng_from_seed(18);
    for m in [2, 4, 6] {
        let f = move |x: &[f64]| x[0] * x[1].sin() + x.iter().skip(1).map(|v| v * v).sum::<f64>() - x[m - 1].exp();
        let model = FnPredictor::new(m, f);
        let bg: Vec<Vec<f64>> = (0..7)
            .map(|_| (0..m).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        for _ in 0..3 {
            let x: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
            let row = kernel_shap(&model, &bg, &x, ShapMode::Exact, 0).unwrap();
            let reference = brute_force_shapley(&f, &bg, &x);
            for (a, b) in row.values.iter().zip(&reference) {
                assert!((a - b).abs() < 1e-9, "M={m}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn linear_model_closed_form() {
    let mut rng = rng_from_seed(19);
    let a = [0.7, -1.3, 0.0, 2.2, 0.4];
    let model = FnPredictor::new(5, move |x: &[f64]| {
        0.3 + a.iter().zip(x).map(|(ai, xi)| ai * xi).sum::<f64>()
    });
    let bg: Vec<Vec<f64>> = (0..20)
        .map(|_| (0..5).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let means: Vec<f64> = (0..5).map(|j| bg.iter().map(|b| b[j]).sum::<f64>() / 20.0).collect();
    let x = [1.0, 0.5, -0.7, 0.2, -1.5];
    let row = kernel_shap(&model, &bg, &x, ShapMode::Exact, 0).unwrap();
    for j in 0..5 {
        assert!((row.values[j] - a[j] * (x[j] - means[j])).abs() < 1e-10);
    }
}

#[test]
fn sampled_mode_converges_to_exact() {
    let mut rng = rng_from_seed(20);
    let f = |x: &[f64]| x[0] * x[1] + (x[2] - x[3]).tanh() + 0.5 * x[4] * x[5] * x[0];
    let model = FnPredictor::new(6, f);
    let bg: Vec<Vec<f64>> = (0..10)
        .map(|_| (0..6).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let x = [0.9, -0.6, 0.3, -0.8, 0.7, 0.5];
    let exact = kernel_shap(&model, &bg, &x, ShapMode::Exact, 0).unwrap();
    let error = |n: usize| {
        // Average over seeds so the comparison is about the estimator, not one draw.
        (0..20)
            .map(|s| {
                let r = kernel_shap(&model, &bg, &x, ShapMode::Sampled(n), s).unwrap();
                r.values
                    .iter()
                    .zip(&exact.values)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
            })
            .sum::<f64>()
            / 20.0
    };
    let coarse = error(16);
    let fine = error(256);
    assert!(fine < coarse, "{fine} !< {coarse}");
    assert!(fine < 0.01, "{fine}");
}
