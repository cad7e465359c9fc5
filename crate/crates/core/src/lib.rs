//! Hybrid quantum-classical convolutional network for binary toxicity
//! prediction.
//!
//! The first convolutional filter is a Hadamard-test circuit whose ancilla
//! expectation equals `Re<x|phi(theta)>` for the L2-normalized input patch
//! `x`. Because the input grids are binary, a 2x2 filter only ever sees 16
//! distinct patches, so each molecule needs at most 15 circuit evaluations.
//! The learned state amplitudes can be read off as the weights of a
//! normalized classical convolution, which reproduces the quantum layer
//! exactly and can take over training mid-run.
//!
//! Module map:
//!
//! - [`qsim`]: statevector simulation of the Hadamard and swap tests.
//! - [`ansatz`]: strongly entangling Rot/CNOT layers and parameter-shift gradients.
//! - [`smiles`]: SMILES tokenizer, atom perception and the 400x57 binary grid.
//! - [`nn`]: convolutions, pooling, dense layer, BCE and Adam.
//! - [`qconv`]: deduplicated quantum convolution.
//! - [`model`]: the full network, parameter blocks and checkpoints.
//! - [`transfer`]: quantum-to-classical weight transfer and the ablation control.
//! - [`data`]: Tox21 ingestion, filtering and splitting.
//! - [`metrics`]: ROC-AUC and per-epoch curve logging.
//! - [`train`]: the training loop.
//! - [`verify`]: runtime oracle suite used by `qcnn verify`.

pub mod ansatz;
pub mod config;
pub mod data;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod qconv;
pub mod qsim;
pub mod rng;
pub mod smiles;
pub mod train;
pub mod transfer;
pub mod verify;

pub use num_complex::Complex64 as C64;
