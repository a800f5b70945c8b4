//! The data re-uploading circuit and its weighted-average readout.
//!
//! Starting from `|0…0⟩` the circuit applies, for `k = 1..n_enc`, the
//! encoding layer `S(x) = ⊗_n Rx(x_n)` followed by the variational block
//! `V(ϑ⁽ᵏ⁾) = Ryy · Rxx · Rzz`, then `n_var` trailing blocks
//! `W(φ⁽ˡ⁾) = Rx · Ryy · Rxx · Rzz`. Products act right to left, so every
//! block applies its Rzz chain first. Each `Rαα` chain couples the nearest
//! neighbours `(n, n+1)` of an open line of qubits. The model output is
//! `f(x) = Σ_n w_n ⟨σ^z_n⟩ + b`.
//!
//! Flattened parameter order: encoding blocks in `k` order, each block in
//! index order, then trailing blocks in `ℓ` order, then `w`, then `b`.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::statevector::{Gate, PauliAxis, QuantumState, MAX_QUBITS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitConfig {
    pub n_qubits: usize,
    pub n_enc: usize,
    pub n_var: usize,
}

impl CircuitConfig {
    pub fn new(n_qubits: usize, n_enc: usize, n_var: usize) -> Result<Self> {
        let config = Self { n_qubits, n_enc, n_var };
        config.validate()?;
        Ok(config)
    }

    /// Eight features, five re-uploading layers, three trailing blocks:
    /// 201 trainable parameters.
    pub fn default_for(n_qubits: usize) -> Result<Self> {
        Self::new(n_qubits, 5, 3)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits < 2 || self.n_qubits > MAX_QUBITS {
            return Err(Error::config(format!(
                "circuit needs 2..={MAX_QUBITS} qubits for its entangling chains, got {}",
                self.n_qubits
            )));
        }
        if self.n_enc == 0 {
            return Err(Error::config("n_enc must be at least 1"));
        }
        Ok(())
    }

    /// Length of one `V` block: three chains of `N−1` pair rotations.
    pub fn v_block_len(&self) -> usize {
        3 * (self.n_qubits - 1)
    }

    /// Length of one `W` block: three chains plus one Rx per qubit.
    pub fn w_block_len(&self) -> usize {
        4 * self.n_qubits - 3
    }

    /// Number of rotation angles (everything except `w` and `b`).
    pub fn n_circuit_params(&self) -> usize {
        self.v_block_len() * self.n_enc + self.w_block_len() * self.n_var
    }

    pub fn param_count(&self) -> usize {
        self.n_circuit_params() + self.n_qubits + 1
    }

    /// Flat index of readout weight `n`.
    pub fn weight_index(&self, n: usize) -> usize {
        self.n_circuit_params() + n
    }

    pub fn bias_index(&self) -> usize {
        self.param_count() - 1
    }
}

pub fn param_count(config: &CircuitConfig) -> usize {
    config.param_count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    pub encoding_blocks: Vec<Vec<f64>>,
    pub trailing_blocks: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl ParameterSet {
    pub fn zeros(config: &CircuitConfig) -> Self {
        Self {
            encoding_blocks: vec![vec![0.0; config.v_block_len()]; config.n_enc],
            trailing_blocks: vec![vec![0.0; config.w_block_len()]; config.n_var],
            weights: vec![0.0; config.n_qubits],
            bias: 0.0,
        }
    }

    /// Circuit angles uniform in (−0.1, 0.1), readout weights uniform in
    /// (−1/N, 1/N), bias set to `bias`.
    pub fn random_init<R: rand::Rng + ?Sized>(config: &CircuitConfig, bias: f64, rng: &mut R) -> Self {
        let mut p = Self::zeros(config);
        for block in p.encoding_blocks.iter_mut().chain(p.trailing_blocks.iter_mut()) {
            for v in block.iter_mut() {
                *v = rng.random_range(-0.1..0.1);
            }
        }
        let scale = 1.0 / config.n_qubits as f64;
        for w in p.weights.iter_mut() {
            *w = rng.random_range(-scale..scale);
        }
        p.bias = bias;
        p
    }

    pub fn validate(&self, config: &CircuitConfig) -> Result<()> {
        check_len("encoding block count", config.n_enc, self.encoding_blocks.len())?;
        check_len("trailing block count", config.n_var, self.trailing_blocks.len())?;
        for b in &self.encoding_blocks {
            check_len("encoding block length", config.v_block_len(), b.len())?;
        }
        for b in &self.trailing_blocks {
            check_len("trailing block length", config.w_block_len(), b.len())?;
        }
        check_len("readout weights", config.n_qubits, self.weights.len())
    }

    pub fn len(&self) -> usize {
        self.encoding_blocks.iter().map(Vec::len).sum::<usize>()
            + self.trailing_blocks.iter().map(Vec::len).sum::<usize>()
            + self.weights.len()
            + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for b in self.encoding_blocks.iter().chain(&self.trailing_blocks) {
            out.extend_from_slice(b);
        }
        out.extend_from_slice(&self.weights);
        out.push(self.bias);
        out
    }

    pub fn unflatten(config: &CircuitConfig, flat: &[f64]) -> Result<Self> {
        config.validate()?;
        check_len("flat parameter vector", config.param_count(), flat.len())?;
        let mut rest = flat;
        let mut take = |n: usize| {
            let (head, tail) = rest.split_at(n);
            rest = tail;
            head.to_vec()
        };
        let encoding_blocks = (0..config.n_enc).map(|_| take(config.v_block_len())).collect();
        let trailing_blocks = (0..config.n_var).map(|_| take(config.w_block_len())).collect();
        let weights = take(config.n_qubits);
        let bias = take(1)[0];
        Ok(Self {
            encoding_blocks,
            trailing_blocks,
            weights,
            bias,
        })
    }
}

/// A gate in the unrolled circuit, tagged with the flat index of the
/// trainable angle that drives it (`None` for data-encoding rotations).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TapeGate {
    pub gate: Gate,
    pub param: Option<usize>,
}

fn push_chain(tape: &mut Vec<TapeGate>, axis: PauliAxis, angles: &[f64], offset: usize) {
    for (n, &angle) in angles.iter().enumerate() {
        tape.push(TapeGate {
            gate: Gate::PauliPair {
                axis,
                a: n,
                b: n + 1,
                angle,
            },
            param: Some(offset + n),
        });
    }
}

/// Rzz, Rxx, Ryy chains of one variational block, in application order.
fn push_entangling(tape: &mut Vec<TapeGate>, n: usize, block: &[f64], offset: usize) {
    let m = n - 1;
    push_chain(tape, PauliAxis::Z, &block[..m], offset);
    push_chain(tape, PauliAxis::X, &block[m..2 * m], offset + m);
    push_chain(tape, PauliAxis::Y, &block[2 * m..3 * m], offset + 2 * m);
}

/// Unrolls the full circuit into application order.
pub fn circuit_tape(config: &CircuitConfig, params: &ParameterSet, angles: &[f64]) -> Result<Vec<TapeGate>> {
    config.validate()?;
    params.validate(config)?;
    check_len("input angles", config.n_qubits, angles.len())?;
    let n = config.n_qubits;
    let mut tape = Vec::with_capacity(config.n_enc * (n + 3 * (n - 1)) + config.n_var * (4 * n - 3));
    let mut offset = 0;
    for block in &params.encoding_blocks {
        for (q, &x) in angles.iter().enumerate() {
            tape.push(TapeGate {
                gate: Gate::Rx { qubit: q, angle: x },
                param: None,
            });
        }
        push_entangling(&mut tape, n, block, offset);
        offset += block.len();
    }
    for block in &params.trailing_blocks {
        push_entangling(&mut tape, n, block, offset);
        let base = 3 * (n - 1);
        for q in 0..n {
            tape.push(TapeGate {
                gate: Gate::Rx {
                    qubit: q,
                    angle: block[base + q],
                },
                param: Some(offset + base + q),
            });
        }
        offset += block.len();
    }
    Ok(tape)
}

/// `S(x)`: Rx(x_n) on every qubit `n`.
pub fn apply_encoding_layer(state: &mut QuantumState, angles: &[f64]) -> Result<()> {
    check_len("encoding angles", state.n_qubits(), angles.len())?;
    for (q, &x) in angles.iter().enumerate() {
        state.apply_rx(q, x)?;
    }
    Ok(())
}

pub fn apply_v_block(state: &mut QuantumState, theta: &[f64]) -> Result<()> {
    let n = state.n_qubits();
    if n < 2 {
        return Err(Error::config("variational blocks need at least 2 qubits"));
    }
    check_len("V block parameters", 3 * (n - 1), theta.len())?;
    let mut tape = Vec::new();
    push_entangling(&mut tape, n, theta, 0);
    for g in &tape {
        state.apply_unchecked(&g.gate);
    }
    Ok(())
}

pub fn apply_w_block(state: &mut QuantumState, phi: &[f64]) -> Result<()> {
    let n = state.n_qubits();
    if n < 2 {
        return Err(Error::config("variational blocks need at least 2 qubits"));
    }
    check_len("W block parameters", 4 * n - 3, phi.len())?;
    let m = 3 * (n - 1);
    apply_v_block(state, &phi[..m])?;
    apply_encoding_layer(state, &phi[m..])
}

/// Final state of the circuit for the given inputs.
pub fn prepare_state(config: &CircuitConfig, params: &ParameterSet, angles: &[f64]) -> Result<QuantumState> {
    let tape = circuit_tape(config, params, angles)?;
    let mut state = QuantumState::new(config.n_qubits)?;
    for g in &tape {
        state.apply_unchecked(&g.gate);
    }
    Ok(state)
}

fn readout(params: &ParameterSet, z: &[f64]) -> f64 {
    params.weights.iter().zip(z).map(|(w, z)| w * z).sum::<f64>() + params.bias
}

/// Exact model output `Σ w_n ⟨σ^z_n⟩ + b`.
pub fn forward(config: &CircuitConfig, params: &ParameterSet, angles: &[f64]) -> Result<f64> {
    let state = prepare_state(config, params, angles)?;
    Ok(readout(params, &state.expectations_z()))
}

/// Model output with every `⟨σ^z_n⟩` estimated from one shared batch of
/// `n_shots` measurements.
pub fn forward_sampled<R: rand::Rng + ?Sized>(
    config: &CircuitConfig,
    params: &ParameterSet,
    angles: &[f64],
    n_shots: u64,
    rng: &mut R,
) -> Result<f64> {
    let state = prepare_state(config, params, angles)?;
    let counts = state.sample_bitstrings(n_shots, rng)?;
    let z = counts.estimate_expectations_z(config.n_qubits)?;
    Ok(readout(params, &z))
}

/// A circuit architecture bound to a parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QnnModel {
    pub config: CircuitConfig,
    pub params: ParameterSet,
}

impl QnnModel {
    pub fn new(config: CircuitConfig, params: ParameterSet) -> Result<Self> {
        config.validate()?;
        params.validate(&config)?;
        Ok(Self { config, params })
    }

    pub fn init<R: rand::Rng + ?Sized>(config: CircuitConfig, mean_target: f64, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let params = ParameterSet::random_init(&config, mean_target, rng);
        Ok(Self { config, params })
    }

    pub fn forward(&self, angles: &[f64]) -> Result<f64> {
        forward(&self.config, &self.params, angles)
    }

    pub fn forward_sampled<R: rand::Rng + ?Sized>(&self, angles: &[f64], n_shots: u64, rng: &mut R) -> Result<f64> {
        forward_sampled(&self.config, &self.params, angles, n_shots, rng)
    }

    pub fn expectations_z(&self, angles: &[f64]) -> Result<Vec<f64>> {
        Ok(prepare_state(&self.config, &self.params, angles)?.expectations_z())
    }
}
