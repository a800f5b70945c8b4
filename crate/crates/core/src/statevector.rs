//! Dense statevector simulation restricted to the gates the re-uploading
//! circuit needs: single-qubit X rotations and two-qubit Pauli-pair
//! rotations `exp(-i θ/2 σ^α_a σ^α_b)`.
//!
//! Qubit `n` is bit `n` of the basis index (little-endian). Gates act in
//! place with stride arithmetic; no gate matrix is ever materialized.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};

pub const MAX_QUBITS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

/// One primitive rotation. Angles are in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    /// `exp(-i angle/2 σ^x_qubit)`
    Rx { qubit: usize, angle: f64 },
    /// `exp(-i angle/2 σ^α_a σ^α_b)`
    PauliPair {
        axis: PauliAxis,
        a: usize,
        b: usize,
        angle: f64,
    },
}

impl Gate {
    pub fn angle(&self) -> f64 {
        match *self {
            Gate::Rx { angle, .. } | Gate::PauliPair { angle, .. } => angle,
        }
    }

    pub fn with_angle(self, angle: f64) -> Gate {
        match self {
            Gate::Rx { qubit, .. } => Gate::Rx { qubit, angle },
            Gate::PauliPair { axis, a, b, .. } => Gate::PauliPair { axis, a, b, angle },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl QuantumState {
    /// `|0…0⟩` on `n_qubits` qubits.
    pub fn new(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::config(format!(
                "n_qubits must be in 1..={MAX_QUBITS}, got {n_qubits}"
            )));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amplitudes })
    }

    /// Wraps an arbitrary amplitude vector. The length must be a power of two
    /// and the vector must be normalized within 1e-10.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() || len > 1 << MAX_QUBITS {
            return Err(Error::config(format!(
                "amplitude vector length {len} is not 2^n with 1 <= n <= {MAX_QUBITS}"
            )));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::validation(None, format!("state norm² is {norm}, not 1")));
        }
        Ok(Self {
            n_qubits: len.trailing_zeros() as usize,
            amplitudes,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Resets to `|0…0⟩` without reallocating.
    pub fn reset(&mut self) {
        self.amplitudes.fill(Complex64::new(0.0, 0.0));
        self.amplitudes[0] = Complex64::new(1.0, 0.0);
    }

    fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit < self.n_qubits {
            Ok(())
        } else {
            Err(Error::config(format!(
                "qubit {qubit} out of range for {} qubits",
                self.n_qubits
            )))
        }
    }

    pub fn apply_rx(&mut self, qubit: usize, angle: f64) -> Result<()> {
        self.check_qubit(qubit)?;
        rx_in_place(&mut self.amplitudes, qubit, angle);
        Ok(())
    }

    pub fn apply_two_qubit_rotation(
        &mut self,
        axis: PauliAxis,
        qubit_a: usize,
        qubit_b: usize,
        angle: f64,
    ) -> Result<()> {
        self.check_qubit(qubit_a)?;
        self.check_qubit(qubit_b)?;
        if qubit_a == qubit_b {
            return Err(Error::config(format!(
                "two-qubit rotation needs distinct qubits, got {qubit_a} twice"
            )));
        }
        pauli_pair_in_place(&mut self.amplitudes, axis, qubit_a, qubit_b, angle);
        Ok(())
    }

    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        match *gate {
            Gate::Rx { qubit, angle } => self.apply_rx(qubit, angle),
            Gate::PauliPair { axis, a, b, angle } => self.apply_two_qubit_rotation(axis, a, b, angle),
        }
    }

    /// Applies a gate whose indices were already validated.
    pub(crate) fn apply_unchecked(&mut self, gate: &Gate) {
        apply_gate_slice(&mut self.amplitudes, gate);
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    /// Exact `⟨σ^z_qubit⟩`.
    pub fn expectation_z(&self, qubit: usize) -> Result<f64> {
        self.check_qubit(qubit)?;
        Ok(expectation_z_slice(&self.amplitudes, qubit))
    }

    /// Exact `⟨σ^z_n⟩` for every qubit in one sweep.
    pub fn expectations_z(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_qubits];
        for (i, a) in self.amplitudes.iter().enumerate() {
            let p = a.norm_sqr();
            for (q, o) in out.iter_mut().enumerate() {
                if i >> q & 1 == 0 {
                    *o += p;
                } else {
                    *o -= p;
                }
            }
        }
        out
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Draws `n_shots` computational-basis measurements.
    ///
    /// Counts follow the multinomial Born distribution; they are generated
    /// as a chain of conditional binomials, which costs O(2^n) per call
    /// regardless of the shot count.
    pub fn sample_bitstrings<R: rand::Rng + ?Sized>(&self, n_shots: u64, rng: &mut R) -> Result<BitstringCounts> {
        if n_shots == 0 {
            return Err(Error::config("n_shots must be at least 1"));
        }
        let probs = self.probabilities();
        let last_nonzero = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        let mut counts = BTreeMap::new();
        let mut remaining = n_shots;
        let mut mass_left = 1.0_f64;
        for (i, &p) in probs.iter().enumerate() {
            if remaining == 0 {
                break;
            }
            if p <= 0.0 {
                continue;
            }
            let k = if i == last_nonzero {
                remaining
            } else {
                let ratio = (p / mass_left).clamp(0.0, 1.0);
                let draw =
                    Binomial::new(remaining, ratio).map_err(|e| Error::Numerical(format!("binomial draw: {e}")))?;
                draw.sample(rng)
            };
            if k > 0 {
                counts.insert(i, k);
            }
            remaining -= k;
            mass_left -= p;
        }
        Ok(BitstringCounts { n_shots, counts })
    }
}

/// Measurement histogram keyed by basis-state index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitstringCounts {
    pub n_shots: u64,
    pub counts: BTreeMap<usize, u64>,
}

impl BitstringCounts {
    /// Per-qubit estimator `(n_plus − n_minus) / n_shots` of `⟨σ^z⟩`.
    pub fn estimate_expectations_z(&self, n_qubits: usize) -> Result<Vec<f64>> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::config(format!("n_qubits {n_qubits} out of range")));
        }
        if self.n_shots == 0 {
            return Err(Error::validation(None, "counts carry zero shots"));
        }
        let total: u64 = self.counts.values().sum();
        if total != self.n_shots {
            return Err(Error::validation(
                None,
                format!("counts sum to {total} but n_shots is {}", self.n_shots),
            ));
        }
        let mut signed = vec![0i64; n_qubits];
        for (&idx, &c) in &self.counts {
            if idx >> n_qubits != 0 {
                return Err(Error::validation(
                    None,
                    format!("basis index {idx} does not fit in {n_qubits} qubits"),
                ));
            }
            for (q, s) in signed.iter_mut().enumerate() {
                if idx >> q & 1 == 0 {
                    *s += c as i64;
                } else {
                    *s -= c as i64;
                }
            }
        }
        let n = self.n_shots as f64;
        Ok(signed.into_iter().map(|s| s as f64 / n).collect())
    }
}

pub(crate) fn apply_gate_slice(amps: &mut [Complex64], gate: &Gate) {
    match *gate {
        Gate::Rx { qubit, angle } => rx_in_place(amps, qubit, angle),
        Gate::PauliPair { axis, a, b, angle } => pauli_pair_in_place(amps, axis, a, b, angle),
    }
}

fn rx_in_place(amps: &mut [Complex64], qubit: usize, angle: f64) {
    let (s, c) = (angle / 2.0).sin_cos();
    let mis = Complex64::new(0.0, -s);
    let stride = 1usize << qubit;
    for block in amps.chunks_exact_mut(2 * stride) {
        let (lo, hi) = block.split_at_mut(stride);
        for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
            let (x0, x1) = (*a0, *a1);
            *a0 = x0 * c + mis * x1;
            *a1 = mis * x0 + x1 * c;
        }
    }
}

fn pauli_pair_in_place(amps: &mut [Complex64], axis: PauliAxis, a: usize, b: usize, angle: f64) {
    let (s, c) = (angle / 2.0).sin_cos();
    let (ma, mb) = (1usize << a, 1usize << b);
    match axis {
        PauliAxis::Z => {
            // σzσz = +1 on equal bits, −1 on different bits.
            let even = Complex64::new(c, -s);
            let odd = Complex64::new(c, s);
            for (i, amp) in amps.iter_mut().enumerate() {
                let parity = ((i & ma) != 0) ^ ((i & mb) != 0);
                *amp *= if parity { odd } else { even };
            }
        }
        PauliAxis::X | PauliAxis::Y => {
            let flip = ma | mb;
            let mis = Complex64::new(0.0, -s);
            for i in 0..amps.len() {
                // Visit each (i, i^flip) pair once: the member with bit a clear.
                if i & ma != 0 {
                    continue;
                }
                let j = i ^ flip;
                // ⟨i|YY|j⟩ = −1 when the two bits of i agree, +1 otherwise.
                let coef = match axis {
                    PauliAxis::Y if (i & mb == 0) => -1.0,
                    _ => 1.0,
                };
                let (xi, xj) = (amps[i], amps[j]);
                amps[i] = xi * c + mis * coef * xj;
                amps[j] = xj * c + mis * coef * xi;
            }
        }
    }
}

fn expectation_z_slice(amps: &[Complex64], qubit: usize) -> f64 {
    amps.iter()
        .enumerate()
        .map(|(i, a)| {
            if i >> qubit & 1 == 0 {
                a.norm_sqr()
            } else {
                -a.norm_sqr()
            }
        })
        .sum()
}

/// `⟨bra| P |ket⟩` where `P` is the Pauli generator of `gate`
/// (`σ^x_q` or `σ^α_a σ^α_b`). Used by adjoint differentiation.
pub(crate) fn generator_overlap(bra: &[Complex64], ket: &[Complex64], gate: &Gate) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    match *gate {
        Gate::Rx { qubit, .. } => {
            let m = 1usize << qubit;
            for (i, b) in bra.iter().enumerate() {
                acc += b.conj() * ket[i ^ m];
            }
        }
        Gate::PauliPair { axis, a, b, .. } => {
            let (ma, mb) = (1usize << a, 1usize << b);
            let flip = ma | mb;
            for (i, br) in bra.iter().enumerate() {
                let equal = ((i & ma) != 0) == ((i & mb) != 0);
                acc += match axis {
                    PauliAxis::Z => {
                        if equal {
                            br.conj() * ket[i]
                        } else {
                            -br.conj() * ket[i]
                        }
                    }
                    PauliAxis::X => br.conj() * ket[i ^ flip],
                    PauliAxis::Y => {
                        if equal {
                            -br.conj() * ket[i ^ flip]
                        } else {
                            br.conj() * ket[i ^ flip]
                        }
                    }
                };
            }
        }
    }
    acc
}

/// Multiplies `amps` in place by `Σ_n weights[n] σ^z_n`.
pub(crate) fn apply_weighted_z_sum(amps: &mut [Complex64], weights: &[f64]) {
    for (i, a) in amps.iter_mut().enumerate() {
        let factor: f64 = weights
            .iter()
            .enumerate()
            .map(|(q, w)| if i >> q & 1 == 0 { *w } else { -*w })
            .sum();
        *a *= factor;
    }
}
