//! Strongly entangling variational layers.
//!
//! Each layer applies `Rot(alpha, beta, gamma) = RZ(gamma) RY(beta) RZ(alpha)`
//! to every qubit and then a ring of CNOTs `q -> (q + 1) mod n`. With two
//! qubits the ring degenerates to a single `CNOT(0 -> 1)`: the offset-1 and
//! offset-(n-1) CNOTs coincide and applying both would cancel.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64 as C64;
use rand::Rng;
use thiserror::Error;

use crate::qsim::{self, CMatrix, Gate2, HadamardTest, ShotConfig, StateVector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnsatzError {
    #[error("ansatz needs at least one layer and one qubit (got {layers} x {qubits})")]
    Shape { layers: usize, qubits: usize },
    #[error("expected {expected} angles, got {got}")]
    AngleCount { expected: usize, got: usize },
    #[error("non-finite angle at index {0}")]
    NonFinite(usize),
    #[error("state has {got} qubits, ansatz expects {expected}")]
    QubitMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Sim(#[from] qsim::QsimError),
}

/// `layers x qubits x 3` rotation angles in radians, stored flat in that
/// order. Angles are not wrapped into `[0, 2pi)`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AnsatzParams {
    layers: usize,
    qubits: usize,
    angles: Vec<f64>,
}

impl AnsatzParams {
    pub fn new(layers: usize, qubits: usize, angles: Vec<f64>) -> Result<Self, AnsatzError> {
        if layers == 0 || qubits == 0 {
            return Err(AnsatzError::Shape { layers, qubits });
        }
        let expected = layers * qubits * 3;
        if angles.len() != expected {
            return Err(AnsatzError::AngleCount {
                expected,
                got: angles.len(),
            });
        }
        if let Some(i) = angles.iter().position(|a| !a.is_finite()) {
            return Err(AnsatzError::NonFinite(i));
        }
        Ok(Self {
            layers,
            qubits,
            angles,
        })
    }

    pub fn zeros(layers: usize, qubits: usize) -> Self {
        Self::new(layers, qubits, vec![0.0; layers * qubits * 3]).expect("valid shape")
    }

    /// Uniform draws from `[0, 2pi)`.
    pub fn random<R: Rng + ?Sized>(layers: usize, qubits: usize, rng: &mut R) -> Self {
        let angles = (0..layers * qubits * 3)
            .map(|_| rng.gen_range(0.0..2.0 * PI))
            .collect();
        Self::new(layers, qubits, angles).expect("valid shape")
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn angles_mut(&mut self) -> &mut [f64] {
        &mut self.angles
    }

    pub fn index(&self, layer: usize, qubit: usize, k: usize) -> usize {
        (layer * self.qubits + qubit) * 3 + k
    }

    /// `(alpha, beta, gamma)` for one Rot gate.
    pub fn rot(&self, layer: usize, qubit: usize) -> (f64, f64, f64) {
        let i = self.index(layer, qubit, 0);
        (self.angles[i], self.angles[i + 1], self.angles[i + 2])
    }

    /// Copy with one angle moved by `delta`.
    pub fn shifted(&self, index: usize, delta: f64) -> Self {
        let mut out = self.clone();
        out.angles[index] += delta;
        out
    }
}

pub fn rz(angle: f64) -> Gate2 {
    let z = C64::new(0.0, 0.0);
    [
        [C64::from_polar(1.0, -angle / 2.0), z],
        [z, C64::from_polar(1.0, angle / 2.0)],
    ]
}

pub fn ry(angle: f64) -> Gate2 {
    let (s, c) = (angle / 2.0).sin_cos();
    [
        [C64::new(c, 0.0), C64::new(-s, 0.0)],
        [C64::new(s, 0.0), C64::new(c, 0.0)],
    ]
}

fn mul2(a: &Gate2, b: &Gate2) -> Gate2 {
    let mut out = [[C64::new(0.0, 0.0); 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            out[r][c] = a[r][0] * b[0][c] + a[r][1] * b[1][c];
        }
    }
    out
}

/// `RZ(gamma) RY(beta) RZ(alpha)`; `RZ(alpha)` acts first.
pub fn rot_matrix(alpha: f64, beta: f64, gamma: f64) -> Gate2 {
    mul2(&rz(gamma), &mul2(&ry(beta), &rz(alpha)))
}

/// Control/target pairs of one entangling ring.
pub fn cnot_pairs(qubits: usize) -> Vec<(usize, usize)> {
    match qubits {
        0 | 1 => Vec::new(),
        2 => vec![(0, 1)],
        n => (0..n).map(|q| (q, (q + 1) % n)).collect(),
    }
}

/// Applies every layer of the ansatz to `state` in place.
pub fn apply_ansatz_in_place(
    theta: &AnsatzParams,
    state: &mut StateVector,
) -> Result<(), AnsatzError> {
    if state.qubits() != theta.qubits() {
        return Err(AnsatzError::QubitMismatch {
            expected: theta.qubits(),
            got: state.qubits(),
        });
    }
    let ring = cnot_pairs(theta.qubits());
    for layer in 0..theta.layers() {
        for q in 0..theta.qubits() {
            let (a, b, g) = theta.rot(layer, q);
            state.apply_single(q, &rot_matrix(a, b, g));
        }
        for &(c, t) in &ring {
            state.apply_cnot(c, t);
        }
    }
    Ok(())
}

pub fn apply_ansatz(theta: &AnsatzParams, state: StateVector) -> Result<StateVector, AnsatzError> {
    let mut state = state;
    apply_ansatz_in_place(theta, &mut state)?;
    Ok(state)
}

/// `U_phi |0...0>`, i.e. the learned state `|phi>`. Its real parts are the
/// classical filter weights.
pub fn first_column(theta: &AnsatzParams) -> Vec<C64> {
    let state = StateVector::zero(theta.qubits()).expect("qubit count checked at construction");
    apply_ansatz(theta, state)
        .expect("matching qubit count")
        .into_amplitudes()
}

/// The full `2^n x 2^n` unitary, one column per basis state.
pub fn unitary(theta: &AnsatzParams) -> CMatrix {
    let dim = 1usize << theta.qubits();
    let columns: Vec<Vec<C64>> = (0..dim)
        .map(|j| {
            let basis = StateVector::basis(theta.qubits(), j).expect("index in range");
            apply_ansatz(theta, basis)
                .expect("matching qubit count")
                .into_amplitudes()
        })
        .collect();
    CMatrix::from_columns(&columns)
}

/// `1 / (4 sin(pi/4))`.
const SHIFT_SCALE: f64 = std::f64::consts::FRAC_1_SQRT_2 / 2.0;

/// Circuits for every `+pi/2` / `-pi/2` single-angle shift of `theta`.
///
/// Every angle drives exactly one single-axis rotation with generator
/// `sigma / 2`. The Hadamard-test output is linear in the ansatz unitary, so
/// as a function of one angle it is `a cos(t/2) + b sin(t/2)` and a shift of
/// `s` gives `f' = (f(t+s) - f(t-s)) / (4 sin(s/2))`, i.e. `2 sqrt 2` for
/// `s = pi/2`.
#[derive(Debug, Clone)]
pub struct ShiftedCircuits {
    plus: Vec<HadamardTest>,
    minus: Vec<HadamardTest>,
}

impl ShiftedCircuits {
    pub fn new(theta: &AnsatzParams) -> Self {
        let build = |delta: f64| {
            (0..theta.len())
                .map(|i| HadamardTest::new(&theta.shifted(i, delta)))
                .collect::<Vec<_>>()
        };
        Self {
            plus: build(FRAC_PI_2),
            minus: build(-FRAC_PI_2),
        }
    }

    pub fn len(&self) -> usize {
        self.plus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plus.is_empty()
    }

    /// `d Re<x|phi> / d theta_i` for every angle, in angle order.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, AnsatzError> {
        self.plus
            .iter()
            .zip(&self.minus)
            .map(|(p, m)| {
                let fp = p.real(x, &ShotConfig::Exact)?;
                let fm = m.real(x, &ShotConfig::Exact)?;
                Ok((fp - fm) * SHIFT_SCALE)
            })
            .collect()
    }
}

/// Parameter-shift gradient of `hadamard_test_real(x, theta)` with respect to
/// every angle.
pub fn param_gradient(x: &[f64], theta: &AnsatzParams) -> Result<Vec<f64>, AnsatzError> {
    let expected = 1usize << theta.qubits();
    if x.len() != expected {
        return Err(qsim::QsimError::Dimension {
            expected,
            got: x.len(),
        }
        .into());
    }
    ShiftedCircuits::new(theta).gradient(x)
}
