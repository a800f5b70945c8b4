//! Dense-matrix reference evaluator for small circuits.
//!
//! Every gate is built as a full `2^N × 2^N` matrix from Kronecker products
//! of Pauli matrices and exponentiated by a scaled Taylor series, so it
//! shares no code with the strided statevector kernels.

use num_complex::Complex64;

use cloudqnn::qnn::{CircuitConfig, ParameterSet};
use cloudqnn::statevector::{Gate, PauliAxis};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Clone, Debug)]
pub struct Matrix {
    pub dim: usize,
    pub data: Vec<Complex64>,
}

impl Matrix {
    pub fn identity(dim: usize) -> Self {
        let mut data = vec![ZERO; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = ONE;
        }
        Self { dim, data }
    }

    fn from_rows(rows: [[Complex64; 2]; 2]) -> Self {
        Self {
            dim: 2,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.dim + c]
    }

    pub fn kron(&self, other: &Matrix) -> Matrix {
        let dim = self.dim * other.dim;
        let mut data = vec![ZERO; dim * dim];
        for r1 in 0..self.dim {
            for c1 in 0..self.dim {
                let a = self.get(r1, c1);
                for r2 in 0..other.dim {
                    for c2 in 0..other.dim {
                        data[(r1 * other.dim + r2) * dim + c1 * other.dim + c2] = a * other.get(r2, c2);
                    }
                }
            }
        }
        Matrix { dim, data }
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        let n = self.dim;
        let mut data = vec![ZERO; n * n];
        for r in 0..n {
            for k in 0..n {
                let a = self.get(r, k);
                for c in 0..n {
                    data[r * n + c] += a * other.get(k, c);
                }
            }
        }
        Matrix { dim: n, data }
    }

    pub fn scale(&self, s: Complex64) -> Matrix {
        Matrix {
            dim: self.dim,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    fn add(&self, other: &Matrix) -> Matrix {
        Matrix {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        (0..self.dim)
            .map(|r| (0..self.dim).map(|c| self.get(r, c) * v[c]).sum())
            .collect()
    }

    /// `exp(A)` by scaling and squaring with a 30-term Taylor series.
    pub fn expm(&self) -> Matrix {
        let norm: f64 = self.data.iter().map(|v| v.norm()).sum();
        let mut squarings = 0;
        while norm / f64::from(1u32 << squarings) > 0.5 {
            squarings += 1;
        }
        let a = self.scale(Complex64::new(1.0 / f64::from(1u32 << squarings), 0.0));
        let mut term = Matrix::identity(self.dim);
        let mut sum = Matrix::identity(self.dim);
        for k in 1..30 {
            term = term.mul(&a).scale(Complex64::new(1.0 / k as f64, 0.0));
            sum = sum.add(&term);
        }
        for _ in 0..squarings {
            sum = sum.mul(&sum);
        }
        sum
    }
}

pub fn pauli(axis: char) -> Matrix {
    match axis {
        'I' => Matrix::identity(2),
        'X' => Matrix::from_rows([[ZERO, ONE], [ONE, ZERO]]),
        'Y' => Matrix::from_rows([[ZERO, -I], [I, ZERO]]),
        'Z' => Matrix::from_rows([[ONE, ZERO], [ZERO, -ONE]]),
        _ => unreachable!(),
    }
}

/// Pauli string on `n` qubits; `ops` lists `(qubit, axis)`. Qubit `q` is bit
/// `q` of the basis index, so the highest qubit is the leftmost factor.
pub fn pauli_string(n: usize, ops: &[(usize, char)]) -> Matrix {
    let mut m = Matrix::identity(1);
    for q in (0..n).rev() {
        let axis = ops.iter().find(|(qq, _)| *qq == q).map_or('I', |(_, a)| *a);
        m = m.kron(&pauli(axis));
    }
    m
}

/// `exp(−iθ/2 · P)`.
pub fn rotation(p: &Matrix, theta: f64) -> Matrix {
    p.scale(Complex64::new(0.0, -theta / 2.0)).expm()
}

pub fn gate_matrix(n: usize, gate: &Gate) -> Matrix {
    match *gate {
        Gate::Rx { qubit, angle } => rotation(&pauli_string(n, &[(qubit, 'X')]), angle),
        Gate::PauliPair { axis, a, b, angle } => {
            let c = match axis {
                PauliAxis::X => 'X',
                PauliAxis::Y => 'Y',
                PauliAxis::Z => 'Z',
            };
            rotation(&pauli_string(n, &[(a, c), (b, c)]), angle)
        }
    }
}

pub fn zero_state(n: usize) -> Vec<Complex64> {
    let mut v = vec![ZERO; 1 << n];
    v[0] = ONE;
    v
}

pub fn run(n: usize, gates: &[Gate], state: &[Complex64]) -> Vec<Complex64> {
    gates
        .iter()
        .fold(state.to_vec(), |psi, g| gate_matrix(n, g).apply(&psi))
}

pub fn expectation(op: &Matrix, psi: &[Complex64]) -> f64 {
    let o = op.apply(psi);
    psi.iter().zip(&o).map(|(a, b)| a.conj() * b).sum::<Complex64>().re
}

fn chains(n: usize, params: &[f64]) -> Vec<Gate> {
    let mut gates = Vec::new();
    let mut k = 0;
    for axis in [PauliAxis::Z, PauliAxis::X, PauliAxis::Y] {
        for a in 0..n - 1 {
            gates.push(Gate::PauliPair {
                axis,
                a,
                b: a + 1,
                angle: params[k],
            });
            k += 1;
        }
    }
    gates
}

/// Gates of the variational block V: ZZ, XX then YY nearest-neighbour chains.
pub fn v_block(n: usize, theta: &[f64]) -> Vec<Gate> {
    chains(n, theta)
}

/// Gates of the trailing block W: the V chains followed by one Rx per qubit.
pub fn w_block(n: usize, phi: &[f64]) -> Vec<Gate> {
    let mut gates = chains(n, phi);
    let offset = 3 * (n - 1);
    gates.extend((0..n).map(|q| Gate::Rx {
        qubit: q,
        angle: phi[offset + q],
    }));
    gates
}

pub fn encoding(angles: &[f64]) -> Vec<Gate> {
    angles
        .iter()
        .enumerate()
        .map(|(q, &angle)| Gate::Rx { qubit: q, angle })
        .collect()
}

pub fn circuit_state(config: &CircuitConfig, params: &ParameterSet, angles: &[f64]) -> Vec<Complex64> {
    let n = config.n_qubits;
    let mut gates = Vec::new();
    for theta in &params.encoding_blocks {
        gates.extend(encoding(angles));
        gates.extend(v_block(n, theta));
    }
    for phi in &params.trailing_blocks {
        gates.extend(w_block(n, phi));
    }
    run(n, &gates, &zero_state(n))
}

/// `Σ_n w_n ⟨Z_n⟩ + b` from dense matrices.
pub fn forward(config: &CircuitConfig, params: &ParameterSet, angles: &[f64]) -> f64 {
    let n = config.n_qubits;
    let psi = circuit_state(config, params, angles);
    let mut f = params.bias;
    for q in 0..n {
        f += params.weights[q] * expectation(&pauli_string(n, &[(q, 'Z')]), &psi);
    }
    f
}
