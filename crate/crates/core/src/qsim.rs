//! Statevector simulation of the inner-product circuits.
//!
//! Qubit 0 is the most significant bit of a basis-state index, so for the
//! Hadamard test (ancilla = qubit 0) the `ancilla = 1` half of the state is
//! the upper half of the amplitude array and the controlled unitary acts on
//! that contiguous slice directly.
//!
//! Data states are loaded as amplitudes. The controlled `U_phi U_psi^dagger`
//! needs an explicit unitary whose first column is the data vector; we use a
//! Householder reflection (see [`UnitaryCompletion`]). Any completion gives
//! the same observable because `U_psi^dagger` only ever acts on `|psi>`.

use num_complex::Complex64 as C64;
use rand::Rng;
use thiserror::Error;

use crate::ansatz::{self, AnsatzParams};
use crate::rng;

/// Largest register the simulator accepts.
pub const MAX_QUBITS: usize = 12;

const NORM_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QsimError {
    #[error("vector is not normalized (norm {0})")]
    NotNormalized(f64),
    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("input vector is all zeros")]
    ZeroVector,
    #[error("sampled mode needs at least one shot")]
    InvalidShots,
    #[error("{0} qubits exceeds the simulator limit of {MAX_QUBITS}")]
    TooManyQubits(usize),
}

pub type Result<T> = std::result::Result<T, QsimError>;

/// A single-qubit gate.
pub type Gate2 = [[C64; 2]; 2];

/// Dense square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![C64::new(0.0, 0.0); dim * dim],
        }
    }

    /// Builds a matrix from its columns.
    pub fn from_columns(columns: &[Vec<C64>]) -> Self {
        let dim = columns.len();
        let mut m = Self::zeros(dim);
        for (j, col) in columns.iter().enumerate() {
            assert_eq!(col.len(), dim, "column {j} has wrong length");
            for (i, &v) in col.iter().enumerate() {
                m.data[i * dim + j] = v;
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[row * self.dim + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: C64) {
        self.data[row * self.dim + col] = v;
    }

    pub fn column(&self, col: usize) -> Vec<C64> {
        (0..self.dim).map(|r| self.get(r, col)).collect()
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.dim);
        for r in 0..self.dim {
            for c in 0..self.dim {
                out.set(c, r, self.get(r, c).conj());
            }
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let n = self.dim;
        let mut out = Self::zeros(n);
        for r in 0..n {
            for k in 0..n {
                let a = self.data[r * n + k];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for c in 0..n {
                    out.data[r * n + c] += a * other.data[k * n + c];
                }
            }
        }
        out
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.dim);
        (0..self.dim)
            .map(|r| {
                self.data[r * self.dim..(r + 1) * self.dim]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// `max |(M^dagger M - I)_ij|`.
    pub fn unitarity_error(&self) -> f64 {
        let prod = self.adjoint().matmul(self);
        let mut worst: f64 = 0.0;
        for r in 0..self.dim {
            for c in 0..self.dim {
                let target = if r == c { 1.0 } else { 0.0 };
                worst = worst.max((prod.get(r, c) - C64::new(target, 0.0)).norm());
            }
        }
        worst
    }
}

/// `2^q` complex amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: Vec<C64>,
    qubits: usize,
}

impl StateVector {
    /// `|0...0>` on `qubits` qubits.
    pub fn zero(qubits: usize) -> Result<Self> {
        check_qubits(qubits)?;
        let mut amps = vec![C64::new(0.0, 0.0); 1 << qubits];
        amps[0] = C64::new(1.0, 0.0);
        Ok(Self { amps, qubits })
    }

    /// Basis state `|index>`.
    pub fn basis(qubits: usize, index: usize) -> Result<Self> {
        check_qubits(qubits)?;
        let dim = 1usize << qubits;
        if index >= dim {
            return Err(QsimError::Dimension {
                expected: dim,
                got: index,
            });
        }
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[index] = C64::new(1.0, 0.0);
        Ok(Self { amps, qubits })
    }

    /// Loads amplitudes that must already be unit-norm.
    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let qubits = qubits_for_len(amps.len())?;
        check_qubits(qubits)?;
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(QsimError::NotNormalized(norm));
        }
        Ok(Self { amps, qubits })
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn bit(&self, qubit: usize) -> usize {
        assert!(qubit < self.qubits, "qubit {qubit} out of range");
        1 << (self.qubits - 1 - qubit)
    }

    fn debug_check_norm(&self) {
        debug_assert!(
            (self.norm_sqr() - 1.0).abs() <= 1e-12,
            "norm drifted to {}",
            self.norm_sqr()
        );
    }

    pub fn apply_single(&mut self, qubit: usize, gate: &Gate2) {
        let mask = self.bit(qubit);
        for i in 0..self.amps.len() {
            if i & mask != 0 {
                continue;
            }
            let j = i | mask;
            let (a0, a1) = (self.amps[i], self.amps[j]);
            self.amps[i] = gate[0][0] * a0 + gate[0][1] * a1;
            self.amps[j] = gate[1][0] * a0 + gate[1][1] * a1;
        }
        self.debug_check_norm();
    }

    pub fn apply_h(&mut self, qubit: usize) {
        self.apply_single(qubit, &hadamard_gate());
    }

    pub fn apply_sdg(&mut self, qubit: usize) {
        let z = C64::new(0.0, 0.0);
        let gate = [[C64::new(1.0, 0.0), z], [z, C64::new(0.0, -1.0)]];
        self.apply_single(qubit, &gate);
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) {
        assert_ne!(control, target);
        let (cm, tm) = (self.bit(control), self.bit(target));
        for i in 0..self.amps.len() {
            if i & cm != 0 && i & tm == 0 {
                self.amps.swap(i, i | tm);
            }
        }
        self.debug_check_norm();
    }

    /// Controlled-SWAP of qubits `a` and `b`.
    pub fn apply_cswap(&mut self, control: usize, a: usize, b: usize) {
        assert!(control != a && control != b && a != b);
        let (cm, am, bm) = (self.bit(control), self.bit(a), self.bit(b));
        for i in 0..self.amps.len() {
            if i & cm != 0 && i & am != 0 && i & bm == 0 {
                self.amps.swap(i, (i & !am) | bm);
            }
        }
        self.debug_check_norm();
    }

    /// Applies `matrix` to qubits `1..q` on the branch where qubit 0 is `|1>`.
    pub fn apply_controlled_register(&mut self, matrix: &CMatrix) -> Result<()> {
        let half = self.amps.len() / 2;
        if matrix.dim() != half {
            return Err(QsimError::Dimension {
                expected: half,
                got: matrix.dim(),
            });
        }
        let upper = matrix.apply(&self.amps[half..]);
        self.amps[half..].copy_from_slice(&upper);
        self.debug_check_norm();
        Ok(())
    }

    /// Probability of measuring `qubit` in `|0>`.
    pub fn prob_zero(&self, qubit: usize) -> f64 {
        let mask = self.bit(qubit);
        self.amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & mask == 0)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }
}

fn qubits_for_len(len: usize) -> Result<usize> {
    if len < 2 || !len.is_power_of_two() {
        return Err(QsimError::NotPowerOfTwo(len));
    }
    Ok(len.trailing_zeros() as usize)
}

fn check_qubits(qubits: usize) -> Result<()> {
    if qubits == 0 {
        return Err(QsimError::Dimension {
            expected: 1,
            got: 0,
        });
    }
    if qubits > MAX_QUBITS {
        return Err(QsimError::TooManyQubits(qubits));
    }
    Ok(())
}

pub fn hadamard_gate() -> Gate2 {
    let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    [[h, h], [h, -h]]
}

/// Scales `x` to unit L2 norm. All-zero input is an error.
pub fn normalize(x: &[f64]) -> Result<Vec<f64>> {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(QsimError::ZeroVector);
    }
    if norm == 1.0 {
        return Ok(x.to_vec());
    }
    Ok(x.iter().map(|v| v / norm).collect())
}

/// A unitary whose first column is a given real unit vector.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryCompletion {
    matrix: CMatrix,
    source: Vec<f64>,
}

impl UnitaryCompletion {
    /// Householder reflection `I - 2 v v^T / (v^T v)` with `v = e0 - x`, which
    /// maps `e0` to `x`. Returns the identity when `x == e0`.
    pub fn householder(x: &[f64]) -> Result<Self> {
        check_unit(x)?;
        let dim = x.len();
        let v: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(i, &xi)| if i == 0 { 1.0 - xi } else { -xi })
            .collect();
        let vv: f64 = v.iter().map(|a| a * a).sum();
        let mut matrix = CMatrix::identity(dim);
        if vv > 0.0 {
            for r in 0..dim {
                for c in 0..dim {
                    let delta = if r == c { 1.0 } else { 0.0 };
                    matrix.set(r, c, C64::new(delta - 2.0 * v[r] * v[c] / vv, 0.0));
                }
            }
            // Pin the first column to the source so it is exact, not just
            // exact up to rounding in the reflection.
            for (r, &xr) in x.iter().enumerate() {
                matrix.set(r, 0, C64::new(xr, 0.0));
            }
        }
        Ok(Self {
            matrix,
            source: x.to_vec(),
        })
    }

    /// Modified Gram-Schmidt over `x, e0, e1, ...`. A second, independent
    /// completion used to check that observables do not depend on the choice.
    pub fn gram_schmidt(x: &[f64]) -> Result<Self> {
        check_unit(x)?;
        let dim = x.len();
        let mut basis: Vec<Vec<f64>> = vec![x.to_vec()];
        for k in 0..dim {
            if basis.len() == dim {
                break;
            }
            let mut cand = vec![0.0; dim];
            cand[k] = 1.0;
            for _ in 0..2 {
                for b in &basis {
                    let proj: f64 = b.iter().zip(&cand).map(|(p, q)| p * q).sum();
                    for (c, bi) in cand.iter_mut().zip(b) {
                        *c -= proj * bi;
                    }
                }
            }
            let norm = cand.iter().map(|c| c * c).sum::<f64>().sqrt();
            if norm > 1e-8 {
                basis.push(cand.iter().map(|c| c / norm).collect());
            }
        }
        let columns: Vec<Vec<C64>> = basis
            .iter()
            .map(|col| col.iter().map(|&v| C64::new(v, 0.0)).collect())
            .collect();
        Ok(Self {
            matrix: CMatrix::from_columns(&columns),
            source: x.to_vec(),
        })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn source_vector(&self) -> &[f64] {
        &self.source
    }
}

/// Free-function form of [`UnitaryCompletion::householder`].
pub fn unitary_completion(x: &[f64]) -> Result<UnitaryCompletion> {
    UnitaryCompletion::householder(x)
}

fn check_unit(x: &[f64]) -> Result<()> {
    qubits_for_len(x.len())?;
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > NORM_TOL {
        return Err(QsimError::NotNormalized(norm));
    }
    Ok(())
}

/// How the ancilla expectation is read out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ShotConfig {
    /// `<Z>` computed from the final amplitudes.
    #[default]
    Exact,
    /// `shots` single-shot measurements drawn from [`rng::seeded`] with
    /// `seed` on the shot stream.
    Sampled { shots: u64, seed: u64 },
}

impl ShotConfig {
    pub fn sampled(shots: u64, seed: u64) -> Result<Self> {
        if shots == 0 {
            return Err(QsimError::InvalidShots);
        }
        Ok(Self::Sampled { shots, seed })
    }

    /// Turns `P(ancilla = 0)` into `<Z>`, exactly or from counts.
    fn readout(&self, p0: f64) -> Result<f64> {
        match *self {
            ShotConfig::Exact => Ok(2.0 * p0 - 1.0),
            ShotConfig::Sampled { shots, seed } => {
                if shots == 0 {
                    return Err(QsimError::InvalidShots);
                }
                let mut rng = rng::seeded(seed, rng::stream::SHOTS);
                let zeros = (0..shots).filter(|_| rng.gen::<f64>() < p0).count() as f64;
                Ok(2.0 * zeros / shots as f64 - 1.0)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Part {
    Real,
    Imag,
}

/// Hadamard-test circuit with a fixed weight unitary `U_phi`.
///
/// Building `U_phi` costs one ansatz simulation per basis column, so callers
/// that evaluate many inputs against the same parameters should build this
/// once and call [`HadamardTest::real`] repeatedly.
#[derive(Debug, Clone)]
pub struct HadamardTest {
    weights: CMatrix,
}

impl HadamardTest {
    pub fn new(theta: &AnsatzParams) -> Self {
        Self {
            weights: ansatz::unitary(theta),
        }
    }

    pub fn from_unitary(weights: CMatrix) -> Self {
        Self { weights }
    }

    pub fn qubits(&self) -> usize {
        self.weights.dim().trailing_zeros() as usize
    }

    pub fn weight_unitary(&self) -> &CMatrix {
        &self.weights
    }

    /// `Re<x_n|phi>`.
    pub fn real(&self, x: &[f64], cfg: &ShotConfig) -> Result<f64> {
        let completion = self.completion_for(x)?;
        self.run(&completion, Part::Real, cfg)
    }

    /// `Im<x_n|phi>`: same circuit with S-dagger on the ancilla after the
    /// first Hadamard.
    pub fn imag(&self, x: &[f64], cfg: &ShotConfig) -> Result<f64> {
        let completion = self.completion_for(x)?;
        self.run(&completion, Part::Imag, cfg)
    }

    /// Real part with a caller-supplied state-preparation unitary.
    pub fn real_with_completion(
        &self,
        completion: &UnitaryCompletion,
        cfg: &ShotConfig,
    ) -> Result<f64> {
        self.check_dim(completion.source_vector().len())?;
        self.run(completion, Part::Real, cfg)
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.weights.dim() {
            return Err(QsimError::Dimension {
                expected: self.weights.dim(),
                got: len,
            });
        }
        Ok(())
    }

    fn completion_for(&self, x: &[f64]) -> Result<UnitaryCompletion> {
        self.check_dim(x.len())?;
        UnitaryCompletion::householder(&normalize(x)?)
    }

    fn run(&self, completion: &UnitaryCompletion, part: Part, cfg: &ShotConfig) -> Result<f64> {
        let n = self.qubits();
        // Ancilla |0> tensor |psi>: the lower half holds the data amplitudes.
        let mut amps = vec![C64::new(0.0, 0.0); 1 << (n + 1)];
        for (a, &x) in amps.iter_mut().zip(completion.source_vector()) {
            *a = C64::new(x, 0.0);
        }
        let mut state = StateVector::from_amplitudes(amps)?;
        let controlled = self.weights.matmul(&completion.matrix().adjoint());

        state.apply_h(0);
        if part == Part::Imag {
            state.apply_sdg(0);
        }
        state.apply_controlled_register(&controlled)?;
        state.apply_h(0);
        cfg.readout(state.prob_zero(0))
    }
}

/// `Re<x_n|phi(theta)>` via the Hadamard test.
pub fn hadamard_test_real(x: &[f64], theta: &AnsatzParams, cfg: &ShotConfig) -> Result<f64> {
    check_theta_dim(x, theta)?;
    HadamardTest::new(theta).real(x, cfg)
}

/// `Im<x_n|phi(theta)>` via the Hadamard test with S-dagger.
pub fn hadamard_test_imag(x: &[f64], theta: &AnsatzParams, cfg: &ShotConfig) -> Result<f64> {
    check_theta_dim(x, theta)?;
    HadamardTest::new(theta).imag(x, cfg)
}

fn check_theta_dim(x: &[f64], theta: &AnsatzParams) -> Result<()> {
    let expected = 1usize << theta.qubits();
    if x.len() != expected {
        return Err(QsimError::Dimension {
            expected,
            got: x.len(),
        });
    }
    Ok(())
}

/// `|<x_n|y_n>|^2` from the swap test on `2n + 1` qubits.
pub fn swap_test(x: &[f64], y: &[f64], cfg: &ShotConfig) -> Result<f64> {
    let lift = |v: &[f64]| -> Vec<C64> { v.iter().map(|&a| C64::new(a, 0.0)).collect() };
    swap_test_states(&lift(x), &lift(y), cfg)
}

/// Swap test for complex amplitude vectors; both are normalized first.
pub fn swap_test_states(x: &[C64], y: &[C64], cfg: &ShotConfig) -> Result<f64> {
    if x.len() != y.len() {
        return Err(QsimError::Dimension {
            expected: x.len(),
            got: y.len(),
        });
    }
    let n = qubits_for_len(x.len())?;
    check_qubits(2 * n + 1)?;
    let (xn, yn) = (normalize_complex(x)?, normalize_complex(y)?);

    // |0>_anc |x>_A |y>_B, with A on qubits 1..=n and B on n+1..=2n.
    let dim = x.len();
    let mut amps = vec![C64::new(0.0, 0.0); 1 << (2 * n + 1)];
    for (i, xi) in xn.iter().enumerate() {
        for (j, yj) in yn.iter().enumerate() {
            amps[i * dim + j] = xi * yj;
        }
    }
    let mut state = StateVector::from_amplitudes(amps)?;
    state.apply_h(0);
    for k in 1..=n {
        state.apply_cswap(0, k, k + n);
    }
    state.apply_h(0);
    cfg.readout(state.prob_zero(0))
}

fn normalize_complex(x: &[C64]) -> Result<Vec<C64>> {
    let norm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(QsimError::ZeroVector);
    }
    Ok(x.iter().map(|z| z / norm).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    /// Hadamard test with an ansatz of `layers` strongly entangling layers.
    Hadamard { layers: usize },
    Swap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct ResourceCount {
    pub qubits: usize,
    /// Swap test: controlled-SWAPs. Hadamard test: the composite
    /// controlled-unitary plus the ansatz CNOTs inside it.
    pub two_qubit_gate_count: usize,
}

pub fn resource_count(n: usize, algorithm: Algorithm) -> ResourceCount {
    assert!(n >= 1, "data register needs at least one qubit");
    match algorithm {
        Algorithm::Swap => ResourceCount {
            qubits: 2 * n + 1,
            two_qubit_gate_count: n,
        },
        Algorithm::Hadamard { layers } => ResourceCount {
            qubits: n + 1,
            two_qubit_gate_count: 1 + layers * ansatz::cnot_pairs(n).len(),
        },
    }
}
