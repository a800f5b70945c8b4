//! Gradients of the circuit model.
//!
//! Three independent routes are provided:
//! - the parameter-shift rule, using two shifted circuit evaluations per
//!   rotation angle (the hardware-compatible method);
//! - adjoint differentiation through the statevector, one forward and one
//!   backward sweep, used by the training loop for speed;
//! - central finite differences, kept as a test oracle.
//!
//! All three return vectors in the flattened [`ParameterSet`] order.

use std::f64::consts::FRAC_PI_2;
use std::ops::{Deref, DerefMut};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qnn::{circuit_tape, forward, forward_sampled, prepare_state, CircuitConfig, ParameterSet};
use crate::statevector::{apply_weighted_z_sum, generator_overlap, QuantumState};

/// Flat gradient aligned with [`ParameterSet::flatten`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientVector(pub Vec<f64>);

impl Deref for GradientVector {
    type Target = Vec<f64>;
    fn deref(&self) -> &Vec<f64> {
        &self.0
    }
}

impl DerefMut for GradientVector {
    fn deref_mut(&mut self) -> &mut Vec<f64> {
        &mut self.0
    }
}

impl GradientVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn max_abs_diff(&self, other: &GradientVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// How per-sample gradients are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GradientMethod {
    ParameterShift,
    #[default]
    Adjoint,
}

impl std::str::FromStr for GradientMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adjoint" => Ok(GradientMethod::Adjoint),
            "parameter_shift" | "parameter-shift" | "shift" => Ok(GradientMethod::ParameterShift),
            other => Err(Error::config(format!("unknown gradient method '{other}'"))),
        }
    }
}

pub fn parameter_shift_gradient(
    config: &CircuitConfig,
    params: &ParameterSet,
    angles: &[f64],
) -> Result<GradientVector> {
    parameter_shift_gradient_counted(config, params, angles).map(|(g, _)| g)
}

/// Parameter-shift gradient together with the number of circuit
/// evaluations it used (two per rotation angle plus one for the readout).
pub fn parameter_shift_gradient_counted(
    config: &CircuitConfig,
    params: &ParameterSet,
    angles: &[f64],
) -> Result<(GradientVector, usize)> {
    config.validate()?;
    params.validate(config)?;
    let mut evaluations = 0;
    let mut flat = params.flatten();
    let mut grad = GradientVector::zeros(flat.len());
    for j in 0..config.n_circuit_params() {
        let original = flat[j];
        flat[j] = original + FRAC_PI_2;
        let plus = forward(config, &ParameterSet::unflatten(config, &flat)?, angles)?;
        flat[j] = original - FRAC_PI_2;
        let minus = forward(config, &ParameterSet::unflatten(config, &flat)?, angles)?;
        flat[j] = original;
        evaluations += 2;
        grad[j] = 0.5 * (plus - minus);
    }
    let z = prepare_state(config, params, angles)?.expectations_z();
    evaluations += 1;
    for (n, zn) in z.into_iter().enumerate() {
        grad[config.weight_index(n)] = zn;
    }
    grad[config.bias_index()] = 1.0;
    Ok((grad, evaluations))
}

/// Parameter-shift gradient with every expectation value estimated from
/// `n_shots` measurements. Returns the sampled output alongside.
pub fn parameter_shift_gradient_sampled<R: rand::Rng + ?Sized>(
    config: &CircuitConfig,
    params: &ParameterSet,
    angles: &[f64],
    n_shots: u64,
    rng: &mut R,
) -> Result<(f64, GradientVector)> {
    config.validate()?;
    params.validate(config)?;
    let mut flat = params.flatten();
    let mut grad = GradientVector::zeros(flat.len());
    for j in 0..config.n_circuit_params() {
        let original = flat[j];
        flat[j] = original + FRAC_PI_2;
        let plus = forward_sampled(config, &ParameterSet::unflatten(config, &flat)?, angles, n_shots, rng)?;
        flat[j] = original - FRAC_PI_2;
        let minus = forward_sampled(config, &ParameterSet::unflatten(config, &flat)?, angles, n_shots, rng)?;
        flat[j] = original;
        grad[j] = 0.5 * (plus - minus);
    }
    let state = prepare_state(config, params, angles)?;
    let z = state
        .sample_bitstrings(n_shots, rng)?
        .estimate_expectations_z(config.n_qubits)?;
    let value = params.weights.iter().zip(&z).map(|(w, z)| w * z).sum::<f64>() + params.bias;
    for (n, zn) in z.into_iter().enumerate() {
        grad[config.weight_index(n)] = zn;
    }
    grad[config.bias_index()] = 1.0;
    Ok((value, grad))
}

/// Output and gradient from a forward sweep plus one reverse sweep that
/// un-computes each gate on the state and on `O|ψ⟩`.
pub fn adjoint_gradient(
    config: &CircuitConfig,
    params: &ParameterSet,
    angles: &[f64],
) -> Result<(f64, GradientVector)> {
    let tape = circuit_tape(config, params, angles)?;
    let mut state = QuantumState::new(config.n_qubits)?;
    for g in &tape {
        state.apply_unchecked(&g.gate);
    }
    let z = state.expectations_z();
    let value = params.weights.iter().zip(&z).map(|(w, z)| w * z).sum::<f64>() + params.bias;

    let mut grad = GradientVector::zeros(config.param_count());
    let mut lambda = state.clone();
    apply_weighted_z_sum(lambda.amplitudes_mut(), &params.weights);
    for g in tape.iter().rev() {
        if let Some(p) = g.param {
            grad[p] = generator_overlap(lambda.amplitudes(), state.amplitudes(), &g.gate).im;
        }
        let inverse = g.gate.with_angle(-g.gate.angle());
        state.apply_unchecked(&inverse);
        lambda.apply_unchecked(&inverse);
    }
    for (n, zn) in z.into_iter().enumerate() {
        grad[config.weight_index(n)] = zn;
    }
    grad[config.bias_index()] = 1.0;
    Ok((value, grad))
}

/// Central differences `[f(θ+h e_j) − f(θ−h e_j)] / 2h` over every
/// parameter, readout included.
pub fn finite_difference_gradient(
    config: &CircuitConfig,
    params: &ParameterSet,
    angles: &[f64],
    h: f64,
) -> Result<GradientVector> {
    if !(h > 0.0) {
        return Err(Error::config(format!(
            "finite-difference step must be positive, got {h}"
        )));
    }
    config.validate()?;
    params.validate(config)?;
    let mut flat = params.flatten();
    let mut grad = GradientVector::zeros(flat.len());
    for j in 0..flat.len() {
        let original = flat[j];
        flat[j] = original + h;
        let plus = forward(config, &ParameterSet::unflatten(config, &flat)?, angles)?;
        flat[j] = original - h;
        let minus = forward(config, &ParameterSet::unflatten(config, &flat)?, angles)?;
        flat[j] = original;
        grad[j] = (plus - minus) / (2.0 * h);
    }
    Ok(grad)
}

fn sample_gradient(
    config: &CircuitConfig,
    params: &ParameterSet,
    angles: &[f64],
    method: GradientMethod,
) -> Result<(f64, GradientVector)> {
    match method {
        GradientMethod::Adjoint => adjoint_gradient(config, params, angles),
        GradientMethod::ParameterShift => {
            let g = parameter_shift_gradient(config, params, angles)?;
            Ok((forward(config, params, angles)?, g))
        }
    }
}

/// Gradient of the batch MSE `(1/B) Σ (f(x_i) − y_i)²` and the MSE itself.
///
/// Per-sample terms are computed in parallel and reduced in index order.
pub fn loss_gradient(
    config: &CircuitConfig,
    params: &ParameterSet,
    batch: &[(&[f64], f64)],
    method: GradientMethod,
) -> Result<(GradientVector, f64)> {
    if batch.is_empty() {
        return Err(Error::config("loss gradient needs a non-empty batch"));
    }
    let terms: Vec<(f64, GradientVector)> = batch
        .par_iter()
        .map(|&(x, y)| sample_gradient(config, params, x, method).map(|(f, g)| (f - y, g)))
        .collect::<Result<_>>()?;
    Ok(reduce_mse_terms(config.param_count(), &terms))
}

/// Combines per-sample `(residual, ∇f)` pairs into `(∇MSE, MSE)`.
pub(crate) fn reduce_mse_terms(len: usize, terms: &[(f64, GradientVector)]) -> (GradientVector, f64) {
    let b = terms.len() as f64;
    let mut grad = GradientVector::zeros(len);
    let mut mse = 0.0;
    for (r, g) in terms {
        mse += r * r;
        for (acc, gi) in grad.iter_mut().zip(g.iter()) {
            *acc += r * gi;
        }
    }
    for v in grad.iter_mut() {
        *v *= 2.0 / b;
    }
    (grad, mse / b)
}
