//! The full network and its checkpoint format.
//!
//! Layout for a 400x57 input:
//!
//! ```text
//! conv1  2x2 quantum (18 angles) or normalized classical (4 weights), + bias
//!        -> ReLU -> maxpool 2x2          399x56 -> 199x28
//! conv2  F filters kxk, stride 1, + bias -> ReLU -> maxpool 2x2
//!                                        199x28 -> 198x27 -> 99x13 (k = 2)
//! dense  F*99*13 -> 1, sigmoid
//! ```
//!
//! With F = 4 and k = 2 this is 5188 parameters for the quantum variant and
//! 5174 for the classical one.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ansatz::{AnsatzError, AnsatzParams};
use crate::nn::{self, AdamConfig, AdamMoments, NnError, Tensor2D};
use crate::qconv::{self, KeyTable, QconvError, FILTER, OUT_COLS, OUT_ROWS};
use crate::rng::{self, stream};
use crate::smiles::{BesGrid, GRID_COLS, GRID_ROWS};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"QCNNCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("i/o")]
    Io(#[from] io::Error),
    #[error("checkpoint: {0}")]
    Format(String),
    #[error("invalid model spec: {0}")]
    Spec(String),
    #[error("expected a {expected:?} model, got {got:?}")]
    Variant { expected: Variant, got: Variant },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Qconv(#[from] QconvError),
    #[error(transparent)]
    Ansatz(#[from] AnsatzError),
}

type Result<T> = std::result::Result<T, ModelError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Qnn,
    Cnn,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Qnn => "qnn",
            Variant::Cnn => "cnn",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "qnn" | "quantum" => Ok(Variant::Qnn),
            "cnn" | "classical" => Ok(Variant::Cnn),
            other => Err(format!("unknown variant '{other}' (expected qnn or cnn)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub variant: Variant,
    pub ansatz_layers: usize,
    pub qubits: usize,
    pub conv2_filters: usize,
    pub conv2_size: usize,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self::new(Variant::Qnn)
    }
}

/// Spatial shapes through the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shapes {
    pub conv1: (usize, usize),
    pub pool1: (usize, usize),
    pub conv2: (usize, usize),
    pub pool2: (usize, usize),
    pub flat: usize,
}

pub const BLOCK_CONV1: usize = 0;
pub const BLOCK_CONV1_BIAS: usize = 1;
pub const BLOCK_CONV2_FILTER: usize = 2;
pub const BLOCK_CONV2_BIAS: usize = 3;
pub const BLOCK_DENSE_WEIGHT: usize = 4;
pub const BLOCK_DENSE_BIAS: usize = 5;

impl ModelSpec {
    pub fn new(variant: Variant) -> Self {
        Self {
            variant,
            ansatz_layers: 3,
            qubits: 2,
            conv2_filters: 4,
            conv2_size: 2,
        }
    }

    pub fn with_variant(&self, variant: Variant) -> Self {
        Self {
            variant,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.qubits != 2 {
            return Err(ModelError::Spec("the 2x2 filter needs exactly 2 qubits".into()));
        }
        if self.ansatz_layers == 0 || self.conv2_filters == 0 || self.conv2_size == 0 {
            return Err(ModelError::Spec("layer counts and sizes must be positive".into()));
        }
        let pool1 = (OUT_ROWS / 2, OUT_COLS / 2);
        if self.conv2_size > pool1.1 / 2 {
            return Err(ModelError::Spec(format!("conv2 size {} too large", self.conv2_size)));
        }
        Ok(())
    }

    pub fn shapes(&self) -> Shapes {
        let conv1 = (GRID_ROWS - FILTER + 1, GRID_COLS - FILTER + 1);
        let pool1 = (conv1.0 / 2, conv1.1 / 2);
        let conv2 = (pool1.0 - self.conv2_size + 1, pool1.1 - self.conv2_size + 1);
        let pool2 = (conv2.0 / 2, conv2.1 / 2);
        Shapes {
            conv1,
            pool1,
            conv2,
            pool2,
            flat: self.conv2_filters * pool2.0 * pool2.1,
        }
    }

    pub fn conv1_len(&self) -> usize {
        match self.variant {
            Variant::Qnn => self.ansatz_layers * self.qubits * 3,
            Variant::Cnn => FILTER * FILTER,
        }
    }

    pub fn conv1_name(&self) -> &'static str {
        match self.variant {
            Variant::Qnn => "conv1.theta",
            Variant::Cnn => "conv1.filter",
        }
    }

    /// `(name, length)` of every parameter block, in storage order.
    pub fn block_layout(&self) -> Vec<(&'static str, usize)> {
        let k2 = self.conv2_size * self.conv2_size;
        let flat = self.shapes().flat;
        vec![
            (self.conv1_name(), self.conv1_len()),
            ("conv1.bias", 1),
            ("conv2.filter", self.conv2_filters * k2),
            ("conv2.bias", self.conv2_filters),
            ("dense.weight", flat),
            ("dense.bias", 1),
        ]
    }

    pub fn param_count(&self) -> usize {
        self.block_layout().iter().map(|(_, n)| n).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("spec serializes")
    }

    /// First 8 bytes of SHA-256 over the model-spec JSON, as hex.
    pub fn hash(&self) -> String {
        spec_hash(self.to_json().as_bytes())
    }
}

fn spec_hash(json: &[u8]) -> String {
    Sha256::digest(json)[..8].iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamBlock {
    pub name: String,
    pub values: Vec<f64>,
}

/// Per-block gradients, aligned with [`Model::blocks`].
pub type Grads = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    spec: ModelSpec,
    blocks: Vec<ParamBlock>,
}

fn uniform_fan_in<R: Rng>(rng: &mut R, fan_in: usize, n: usize) -> Vec<f64> {
    let bound = (1.0 / fan_in as f64).sqrt();
    (0..n).map(|_| rng.gen_range(-bound..=bound)).collect()
}

/// Draws a classical 2x2 filter with the fan-in initializer.
pub fn classical_filter_init(seed: u64, stream_id: u64) -> Vec<f64> {
    let mut r = rng::seeded(seed, stream_id);
    uniform_fan_in(&mut r, FILTER * FILTER, FILTER * FILTER)
}

/// Intermediate activations kept for the backward pass.
struct Trace {
    keys: Vec<u8>,
    a1: Tensor2D,
    arg1: Vec<usize>,
    p1: Tensor2D,
    a2: Vec<Tensor2D>,
    arg2: Vec<Vec<usize>>,
    flat: Vec<f64>,
    prob: f64,
}

impl Model {
    /// Fresh parameters. The layers after the first filter are drawn from a
    /// stream that does not depend on the variant, so both variants started
    /// from one seed share them exactly.
    pub fn init(spec: ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let layout = spec.block_layout();
        let shapes = spec.shapes();
        let k2 = spec.conv2_size * spec.conv2_size;
        let mut shared = rng::seeded(seed, stream::INIT_SHARED);
        let conv1_bias = uniform_fan_in(&mut shared, FILTER * FILTER, 1);
        let conv2_filter = uniform_fan_in(&mut shared, k2, spec.conv2_filters * k2);
        let conv2_bias = uniform_fan_in(&mut shared, k2, spec.conv2_filters);
        let dense_weight = uniform_fan_in(&mut shared, shapes.flat, shapes.flat);
        let dense_bias = uniform_fan_in(&mut shared, shapes.flat, 1);
        let conv1 = match spec.variant {
            Variant::Qnn => {
                let mut q = rng::seeded(seed, stream::INIT_QUANTUM);
                AnsatzParams::random(spec.ansatz_layers, spec.qubits, &mut q)
                    .angles()
                    .to_vec()
            }
            Variant::Cnn => classical_filter_init(seed, stream::INIT_CLASSICAL_FILTER),
        };
        let values = [conv1, conv1_bias, conv2_filter, conv2_bias, dense_weight, dense_bias];
        let blocks = layout
            .iter()
            .zip(values)
            .map(|((name, _), values)| ParamBlock {
                name: name.to_string(),
                values,
            })
            .collect();
        Self::from_blocks(spec, blocks)
    }

    pub fn from_blocks(spec: ModelSpec, blocks: Vec<ParamBlock>) -> Result<Self> {
        spec.validate()?;
        let layout = spec.block_layout();
        if blocks.len() != layout.len() {
            return Err(ModelError::Format(format!(
                "expected {} parameter blocks, got {}",
                layout.len(),
                blocks.len()
            )));
        }
        for (b, (name, n)) in blocks.iter().zip(&layout) {
            if b.name != *name || b.values.len() != *n {
                return Err(ModelError::Format(format!(
                    "block '{}' with {} values where '{name}' with {n} was expected",
                    b.name,
                    b.values.len()
                )));
            }
            if let Some(i) = b.values.iter().position(|v| !v.is_finite()) {
                return Err(ModelError::Format(format!("block '{}' value {i} is not finite", b.name)));
            }
        }
        Ok(Self { spec, blocks })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn blocks(&self) -> &[ParamBlock] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &[f64] {
        &self.blocks[i].values
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.blocks[i].values
    }

    pub fn param_count(&self) -> usize {
        self.blocks.iter().map(|b| b.values.len()).sum()
    }

    /// Ansatz angles of a quantum model.
    pub fn theta(&self) -> Result<AnsatzParams> {
        if self.spec.variant != Variant::Qnn {
            return Err(ModelError::Variant {
                expected: Variant::Qnn,
                got: self.spec.variant,
            });
        }
        Ok(AnsatzParams::new(
            self.spec.ansatz_layers,
            self.spec.qubits,
            self.block(BLOCK_CONV1).to_vec(),
        )?)
    }

    /// Per-key first-layer values for the current parameters; gradients are
    /// included when `with_grads` is set.
    pub fn key_table(&self, with_grads: bool) -> Result<KeyTable> {
        Ok(match self.spec.variant {
            Variant::Qnn if with_grads => KeyTable::quantum_with_grads(&self.theta()?)?,
            Variant::Qnn => KeyTable::quantum(&self.theta()?)?,
            Variant::Cnn => KeyTable::classical(self.block(BLOCK_CONV1))?,
        })
    }

    fn conv2_filter(&self, f: usize) -> Tensor2D {
        let k = self.spec.conv2_size;
        let w = &self.block(BLOCK_CONV2_FILTER)[f * k * k..(f + 1) * k * k];
        Tensor2D::from_vec(k, k, w.to_vec()).expect("filter block size")
    }

    fn trace(&self, table: &KeyTable, grid: &BesGrid) -> Result<Trace> {
        let keys = qconv::patch_keys(grid);
        let mut a1 = table.forward(&keys, self.block(BLOCK_CONV1_BIAS)[0]);
        nn::relu_inplace(&mut a1);
        let (p1, arg1) = nn::maxpool_forward(&a1);
        let mut a2 = Vec::with_capacity(self.spec.conv2_filters);
        let mut arg2 = Vec::with_capacity(self.spec.conv2_filters);
        let mut flat = Vec::with_capacity(self.spec.shapes().flat);
        for f in 0..self.spec.conv2_filters {
            let mut c = nn::conv_forward(&p1, &self.conv2_filter(f), self.block(BLOCK_CONV2_BIAS)[f])?;
            nn::relu_inplace(&mut c);
            let (p, arg) = nn::maxpool_forward(&c);
            flat.extend_from_slice(p.data());
            a2.push(c);
            arg2.push(arg);
        }
        let z = nn::dense_forward(self.block(BLOCK_DENSE_WEIGHT), self.block(BLOCK_DENSE_BIAS), &flat)?[0];
        Ok(Trace {
            keys,
            a1,
            arg1,
            p1,
            a2,
            arg2,
            flat,
            prob: nn::sigmoid(z),
        })
    }

    /// Predicted probability for one grid.
    pub fn forward(&self, table: &KeyTable, grid: &BesGrid) -> Result<f64> {
        Ok(self.trace(table, grid)?.prob)
    }

    /// Predictions for many grids, computed in parallel.
    pub fn predict(&self, grids: &[&BesGrid]) -> Result<Vec<f64>> {
        let table = self.key_table(false)?;
        grids.par_iter().map(|g| self.forward(&table, g)).collect()
    }

    /// Loss, prediction and parameter gradients for one labeled grid. The
    /// output gradient is `p - y`, the derivative of BCE through the sigmoid
    /// before clamping.
    pub fn sample_gradient(&self, table: &KeyTable, grid: &BesGrid, label: f64) -> Result<(f64, f64, Grads)> {
        let t = self.trace(table, grid)?;
        let shapes = self.spec.shapes();
        let dz = t.prob - label;
        let dense = nn::dense_backward(self.block(BLOCK_DENSE_WEIGHT), &t.flat, &[dz])?;

        let k2 = self.spec.conv2_size * self.spec.conv2_size;
        let pool2_len = shapes.pool2.0 * shapes.pool2.1;
        let mut d_filter = vec![0.0; self.spec.conv2_filters * k2];
        let mut d_bias2 = vec![0.0; self.spec.conv2_filters];
        let mut d_p1 = Tensor2D::zeros(shapes.pool1.0, shapes.pool1.1);
        for f in 0..self.spec.conv2_filters {
            let up = Tensor2D::from_vec(
                shapes.pool2.0,
                shapes.pool2.1,
                dense.input[f * pool2_len..(f + 1) * pool2_len].to_vec(),
            )?;
            let mut d_a2 = nn::maxpool_backward(&up, &t.arg2[f], shapes.conv2)?;
            nn::relu_backward_inplace(&mut d_a2, &t.a2[f]);
            let g = nn::conv_backward(&t.p1, &self.conv2_filter(f), &d_a2)?;
            d_filter[f * k2..(f + 1) * k2].copy_from_slice(g.filter.data());
            d_bias2[f] = g.bias;
            for (acc, v) in d_p1.data_mut().iter_mut().zip(g.input.data()) {
                *acc += v;
            }
        }
        let mut d_a1 = nn::maxpool_backward(&d_p1, &t.arg1, shapes.conv1)?;
        nn::relu_backward_inplace(&mut d_a1, &t.a1);
        let (d_conv1, d_bias1) = table.backward(&t.keys, d_a1.data());

        let grads = vec![d_conv1, vec![d_bias1], d_filter, d_bias2, dense.weights, dense.bias];
        Ok((nn::bce_loss(t.prob, label), t.prob, grads))
    }

    /// Mean loss and mean gradient over a batch. Samples run in parallel;
    /// the reduction is in sample order, so results do not depend on the
    /// thread count.
    pub fn batch_gradient(
        &self,
        table: &KeyTable,
        grids: &[&BesGrid],
        labels: &[f64],
    ) -> Result<BatchResult> {
        assert_eq!(grids.len(), labels.len());
        let per_sample: Vec<(f64, f64, Grads)> = grids
            .par_iter()
            .zip(labels.par_iter())
            .map(|(g, &y)| self.sample_gradient(table, g, y))
            .collect::<Result<_>>()?;
        let n = per_sample.len() as f64;
        let mut grads: Grads = self.blocks.iter().map(|b| vec![0.0; b.values.len()]).collect();
        let mut losses = Vec::with_capacity(per_sample.len());
        let mut predictions = Vec::with_capacity(per_sample.len());
        for (loss, p, g) in per_sample {
            losses.push(loss);
            predictions.push(p);
            for (acc, gb) in grads.iter_mut().zip(g) {
                for (a, v) in acc.iter_mut().zip(gb) {
                    *a += v;
                }
            }
        }
        grads.iter_mut().flatten().for_each(|g| *g /= n);
        Ok(BatchResult {
            losses,
            predictions,
            grads,
        })
    }
}

#[derive(Debug, Clone)]
pub struct BatchResult {
    pub losses: Vec<f64>,
    pub predictions: Vec<f64>,
    pub grads: Grads,
}

/// Adam over every parameter block with one shared step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    pub config: AdamConfig,
    pub t: u64,
    pub moments: Vec<AdamMoments>,
}

impl Optimizer {
    pub fn new(model: &Model, config: AdamConfig) -> Self {
        Self {
            config,
            t: 0,
            moments: model
                .blocks
                .iter()
                .map(|b| AdamMoments::zeros(b.values.len()))
                .collect(),
        }
    }

    pub fn step(&mut self, model: &mut Model, grads: &Grads) -> Result<()> {
        if grads.len() != model.blocks.len() || self.moments.len() != model.blocks.len() {
            return Err(NnError::Shape("gradient blocks do not match the model".into()).into());
        }
        self.t += 1;
        for ((block, g), m) in model.blocks.iter_mut().zip(grads).zip(&mut self.moments) {
            nn::adam_update(&self.config, self.t, &mut block.values, g, m)?;
        }
        Ok(())
    }
}

/// Everything needed to resume training.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub optimizer: Optimizer,
    /// Number of completed epochs.
    pub epoch: u64,
    pub seed: u64,
}

fn put_u16<W: Write>(w: &mut W, v: u16) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}
fn put_u32<W: Write>(w: &mut W, v: u32) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}
fn put_u64<W: Write>(w: &mut W, v: u64) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}
fn put_f64s<W: Write>(w: &mut W, vs: &[f64]) -> io::Result<()> {
    vs.iter().try_for_each(|v| w.write_all(&v.to_le_bytes()))
}

fn get<const N: usize, R: Read>(r: &mut R) -> io::Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}
fn get_u16<R: Read>(r: &mut R) -> io::Result<u16> {
    Ok(u16::from_le_bytes(get(r)?))
}
fn get_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    Ok(u32::from_le_bytes(get(r)?))
}
fn get_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    Ok(u64::from_le_bytes(get(r)?))
}
fn get_f64<R: Read>(r: &mut R) -> io::Result<f64> {
    Ok(f64::from_le_bytes(get(r)?))
}
fn get_f64s<R: Read>(r: &mut R, n: usize) -> io::Result<Vec<f64>> {
    (0..n).map(|_| get_f64(r)).collect()
}

impl Checkpoint {
    pub fn new(model: Model, seed: u64) -> Self {
        let optimizer = Optimizer::new(&model, AdamConfig::default());
        Self {
            model,
            optimizer,
            epoch: 0,
            seed,
        }
    }

    /// Binary layout, little-endian:
    ///
    /// ```text
    /// "QCNNCKPT" | version u32 | spec_json_len u32 | spec_json | spec_hash [8]
    /// epoch u64 | seed u64 | adam_t u64 | lr f64 | beta1 f64 | beta2 f64 | eps f64
    /// block_count u32, then per block:
    ///   name_len u16 | name | len u64 | values f64[len] | m f64[len] | v f64[len]
    /// ```
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let json = self.model.spec.to_json();
        w.write_all(CHECKPOINT_MAGIC)?;
        put_u32(&mut w, CHECKPOINT_VERSION)?;
        put_u32(&mut w, json.len() as u32)?;
        w.write_all(json.as_bytes())?;
        w.write_all(&Sha256::digest(json.as_bytes())[..8])?;
        put_u64(&mut w, self.epoch)?;
        put_u64(&mut w, self.seed)?;
        put_u64(&mut w, self.optimizer.t)?;
        let c = &self.optimizer.config;
        put_f64s(&mut w, &[c.lr, c.beta1, c.beta2, c.eps])?;
        put_u32(&mut w, self.model.blocks.len() as u32)?;
        for (b, m) in self.model.blocks.iter().zip(&self.optimizer.moments) {
            put_u16(&mut w, b.name.len() as u16)?;
            w.write_all(b.name.as_bytes())?;
            put_u64(&mut w, b.values.len() as u64)?;
            put_f64s(&mut w, &b.values)?;
            put_f64s(&mut w, &m.m)?;
            put_f64s(&mut w, &m.v)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let bad = |m: &str| ModelError::Format(m.to_string());
        if &get::<8, _>(&mut r)? != CHECKPOINT_MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let version = get_u32(&mut r)?;
        if version != CHECKPOINT_VERSION {
            return Err(ModelError::Format(format!("unsupported checkpoint version {version}")));
        }
        let json_len = get_u32(&mut r)? as usize;
        if json_len > 1 << 16 {
            return Err(bad("spec header too large"));
        }
        let mut json = vec![0u8; json_len];
        r.read_exact(&mut json)?;
        let hash = get::<8, _>(&mut r)?;
        if Sha256::digest(&json)[..8] != hash {
            return Err(bad("spec hash mismatch"));
        }
        let spec: ModelSpec =
            serde_json::from_slice(&json).map_err(|e| ModelError::Format(format!("spec: {e}")))?;
        let epoch = get_u64(&mut r)?;
        let seed = get_u64(&mut r)?;
        let t = get_u64(&mut r)?;
        let config = AdamConfig {
            lr: get_f64(&mut r)?,
            beta1: get_f64(&mut r)?,
            beta2: get_f64(&mut r)?,
            eps: get_f64(&mut r)?,
        };
        let count = get_u32(&mut r)? as usize;
        let layout = spec.block_layout();
        if count != layout.len() {
            return Err(bad("block count does not match the model spec"));
        }
        let mut blocks = Vec::with_capacity(count);
        let mut moments = Vec::with_capacity(count);
        for (_, expected_len) in &layout {
            let name_len = get_u16(&mut r)? as usize;
            let mut name = vec![0u8; name_len];
            r.read_exact(&mut name)?;
            let name = String::from_utf8(name).map_err(|_| bad("block name is not UTF-8"))?;
            let len = get_u64(&mut r)? as usize;
            if len != *expected_len {
                return Err(ModelError::Format(format!("block '{name}' has {len} values")));
            }
            let values = get_f64s(&mut r, len)?;
            let m = get_f64s(&mut r, len)?;
            let v = get_f64s(&mut r, len)?;
            blocks.push(ParamBlock { name, values });
            moments.push(AdamMoments { m, v });
        }
        let model = Model::from_blocks(spec, blocks)?;
        Ok(Self {
            model,
            optimizer: Optimizer { config, t, moments },
            epoch,
            seed,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        self.write_to(BufWriter::new(File::create(&tmp)?))?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}
