//! Quantum-to-classical weight transfer.
//!
//! The Hadamard test outputs `Re<x|phi>` and `x` is real, so the quantum
//! layer equals a normalized convolution whose weights are the real parts of
//! the ansatz state `U_phi |0>`.

use crate::ansatz::{first_column, AnsatzParams};
use crate::model::{
    classical_filter_init, Checkpoint, Model, ModelError, ModelSpec, ParamBlock, Variant,
    BLOCK_CONV1,
};
use crate::nn::AdamMoments;
use crate::rng::stream;

/// `Re(first_column(theta))`, row-major over the 2x2 window.
pub fn extract_weights(theta: &AnsatzParams) -> Result<[f64; 4], ModelError> {
    if theta.qubits() != 2 {
        return Err(ModelError::Spec(format!(
            "weight extraction needs a 2-qubit ansatz, got {}",
            theta.qubits()
        )));
    }
    let col = first_column(theta);
    Ok([col[0].re, col[1].re, col[2].re, col[3].re])
}

/// Replaces the quantum filter of a quantum checkpoint with `filter`. Every
/// other block and its Adam moments are copied; the new filter starts with
/// zero moments and the step counter carries over.
pub fn replace_filter(ck: &Checkpoint, filter: &[f64; 4]) -> Result<Checkpoint, ModelError> {
    let spec = ck.model.spec();
    if spec.variant != Variant::Qnn {
        return Err(ModelError::Variant {
            expected: Variant::Qnn,
            got: spec.variant,
        });
    }
    let new_spec: ModelSpec = spec.with_variant(Variant::Cnn);
    let mut blocks = ck.model.blocks().to_vec();
    blocks[BLOCK_CONV1] = ParamBlock {
        name: new_spec.conv1_name().to_string(),
        values: filter.to_vec(),
    };
    let model = Model::from_blocks(new_spec, blocks)?;
    let mut optimizer = ck.optimizer.clone();
    optimizer.moments[BLOCK_CONV1] = AdamMoments::zeros(filter.len());
    Ok(Checkpoint {
        model,
        optimizer,
        epoch: ck.epoch,
        seed: ck.seed,
    })
}

pub fn transfer_checkpoint(ck: &Checkpoint) -> Result<Checkpoint, ModelError> {
    let filter = extract_weights(&ck.model.theta()?)?;
    replace_filter(ck, &filter)
}

/// Control run: as [`transfer_checkpoint`] but with a freshly initialized
/// filter drawn from `seed`.
pub fn ablate_checkpoint(ck: &Checkpoint, seed: u64) -> Result<Checkpoint, ModelError> {
    let w = classical_filter_init(seed, stream::ABLATION);
    replace_filter(ck, &[w[0], w[1], w[2], w[3]])
}
