//! Classical layers with hand-written backward passes, BCE loss and Adam.
//!
//! Convolutions are single-channel valid cross-correlations with stride 1.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
}

type Result<T> = std::result::Result<T, NnError>;

fn shape_err(msg: impl Into<String>) -> NnError {
    NnError::Shape(msg.into())
}

/// Row-major 2-D array.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor2D {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor2D {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(shape_err(format!(
                "{rows}x{cols} tensor needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    /// Values of the `fh x fw` window whose top-left corner is `(r, c)`, row-major.
    fn patch_into(&self, r: usize, c: usize, fh: usize, fw: usize, out: &mut [f64]) {
        for i in 0..fh {
            let row = &self.data[(r + i) * self.cols + c..(r + i) * self.cols + c + fw];
            out[i * fw..(i + 1) * fw].copy_from_slice(row);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

fn conv_out_shape(input: &Tensor2D, filter: &Tensor2D) -> Result<(usize, usize)> {
    if filter.rows == 0 || filter.cols == 0 || filter.rows > input.rows || filter.cols > input.cols
    {
        return Err(shape_err(format!(
            "{}x{} filter does not fit a {}x{} input",
            filter.rows, filter.cols, input.rows, input.cols
        )));
    }
    Ok((input.rows - filter.rows + 1, input.cols - filter.cols + 1))
}

fn check_upstream(upstream: &Tensor2D, shape: (usize, usize)) -> Result<()> {
    if upstream.shape() != shape {
        return Err(shape_err(format!(
            "upstream is {:?}, layer output is {:?}",
            upstream.shape(),
            shape
        )));
    }
    Ok(())
}

/// Gradients of a convolution with respect to its input, filter and bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub input: Tensor2D,
    pub filter: Tensor2D,
    pub bias: f64,
}

pub fn conv_forward(input: &Tensor2D, filter: &Tensor2D, bias: f64) -> Result<Tensor2D> {
    let (oh, ow) = conv_out_shape(input, filter)?;
    let (fh, fw) = filter.shape();
    let mut out = Tensor2D::zeros(oh, ow);
    for r in 0..oh {
        for c in 0..ow {
            let mut acc = bias;
            for i in 0..fh {
                for j in 0..fw {
                    acc += input.get(r + i, c + j) * filter.get(i, j);
                }
            }
            out.set(r, c, acc);
        }
    }
    Ok(out)
}

pub fn conv_backward(input: &Tensor2D, filter: &Tensor2D, upstream: &Tensor2D) -> Result<ConvGrads> {
    let (oh, ow) = conv_out_shape(input, filter)?;
    check_upstream(upstream, (oh, ow))?;
    let (fh, fw) = filter.shape();
    let mut d_in = Tensor2D::zeros(input.rows, input.cols);
    let mut d_f = Tensor2D::zeros(fh, fw);
    let mut d_b = 0.0;
    for r in 0..oh {
        for c in 0..ow {
            let g = upstream.get(r, c);
            if g == 0.0 {
                continue;
            }
            d_b += g;
            for i in 0..fh {
                for j in 0..fw {
                    d_f.data[i * fw + j] += g * input.get(r + i, c + j);
                    d_in.data[(r + i) * input.cols + c + j] += g * filter.get(i, j);
                }
            }
        }
    }
    Ok(ConvGrads {
        input: d_in,
        filter: d_f,
        bias: d_b,
    })
}

/// Convolution of each L2-normalized patch with `filter`. All-zero patches
/// contribute only the bias.
pub fn normalized_conv_forward(input: &Tensor2D, filter: &Tensor2D, bias: f64) -> Result<Tensor2D> {
    let (oh, ow) = conv_out_shape(input, filter)?;
    let (fh, fw) = filter.shape();
    let mut patch = vec![0.0; fh * fw];
    let mut out = Tensor2D::zeros(oh, ow);
    for r in 0..oh {
        for c in 0..ow {
            input.patch_into(r, c, fh, fw, &mut patch);
            let norm = patch.iter().map(|v| v * v).sum::<f64>().sqrt();
            let dot = if norm == 0.0 {
                0.0
            } else {
                patch.iter().zip(&filter.data).map(|(p, w)| p * w).sum::<f64>() / norm
            };
            out.set(r, c, dot + bias);
        }
    }
    Ok(out)
}

/// Backward pass through the per-patch normalization. The Jacobian of
/// `p / |p|` is `(I - p_hat p_hat^T) / |p|`.
pub fn normalized_conv_backward(
    input: &Tensor2D,
    filter: &Tensor2D,
    upstream: &Tensor2D,
) -> Result<ConvGrads> {
    let (oh, ow) = conv_out_shape(input, filter)?;
    check_upstream(upstream, (oh, ow))?;
    let (fh, fw) = filter.shape();
    let k = fh * fw;
    let mut patch = vec![0.0; k];
    let mut d_in = Tensor2D::zeros(input.rows, input.cols);
    let mut d_f = Tensor2D::zeros(fh, fw);
    let mut d_b = 0.0;
    for r in 0..oh {
        for c in 0..ow {
            let g = upstream.get(r, c);
            d_b += g;
            input.patch_into(r, c, fh, fw, &mut patch);
            let norm = patch.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 || g == 0.0 {
                continue;
            }
            let dot_hat = patch.iter().zip(&filter.data).map(|(p, w)| p * w).sum::<f64>() / norm;
            for idx in 0..k {
                let p_hat = patch[idx] / norm;
                d_f.data[idx] += g * p_hat;
                let (i, j) = (idx / fw, idx % fw);
                d_in.data[(r + i) * input.cols + c + j] +=
                    g * (filter.data[idx] - p_hat * dot_hat) / norm;
            }
        }
    }
    Ok(ConvGrads {
        input: d_in,
        filter: d_f,
        bias: d_b,
    })
}

/// 2x2 max pooling with stride 2; odd trailing rows/columns are dropped.
/// Returns the pooled tensor and, per output cell, the flat input index of
/// the maximum (first one on ties).
pub fn maxpool_forward(input: &Tensor2D) -> (Tensor2D, Vec<usize>) {
    let (oh, ow) = (input.rows / 2, input.cols / 2);
    let mut out = Tensor2D::zeros(oh, ow);
    let mut argmax = Vec::with_capacity(oh * ow);
    for r in 0..oh {
        for c in 0..ow {
            let mut best = (2 * r) * input.cols + 2 * c;
            for (i, j) in [(0, 1), (1, 0), (1, 1)] {
                let idx = (2 * r + i) * input.cols + 2 * c + j;
                if input.data[idx] > input.data[best] {
                    best = idx;
                }
            }
            out.set(r, c, input.data[best]);
            argmax.push(best);
        }
    }
    (out, argmax)
}

pub fn maxpool_backward(
    upstream: &Tensor2D,
    argmax: &[usize],
    input_shape: (usize, usize),
) -> Result<Tensor2D> {
    if upstream.data.len() != argmax.len() {
        return Err(shape_err("upstream does not match pooled output"));
    }
    let mut d_in = Tensor2D::zeros(input_shape.0, input_shape.1);
    for (&idx, &g) in argmax.iter().zip(&upstream.data) {
        d_in.data[idx] += g;
    }
    Ok(d_in)
}

#[inline]
pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

pub fn relu_inplace(t: &mut Tensor2D) {
    t.data.iter_mut().for_each(|v| *v = relu(*v));
}

/// Zeroes `upstream` wherever the ReLU output was not positive.
pub fn relu_backward_inplace(upstream: &mut Tensor2D, output: &Tensor2D) {
    for (g, &y) in upstream.data.iter_mut().zip(&output.data) {
        if y <= 0.0 {
            *g = 0.0;
        }
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `y = W x + b` with `W` stored row-major as `out x in`.
pub fn dense_forward(weights: &[f64], bias: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    let n_out = bias.len();
    if n_out == 0 || weights.len() != n_out * x.len() {
        return Err(shape_err(format!(
            "dense weights {} != {} x {}",
            weights.len(),
            n_out,
            x.len()
        )));
    }
    Ok(weights
        .chunks_exact(x.len())
        .zip(bias)
        .map(|(row, b)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    pub input: Vec<f64>,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

pub fn dense_backward(weights: &[f64], x: &[f64], upstream: &[f64]) -> Result<DenseGrads> {
    if weights.len() != upstream.len() * x.len() {
        return Err(shape_err("dense backward shapes disagree"));
    }
    let mut d_x = vec![0.0; x.len()];
    let mut d_w = vec![0.0; weights.len()];
    for (o, &g) in upstream.iter().enumerate() {
        let row = &weights[o * x.len()..(o + 1) * x.len()];
        let d_row = &mut d_w[o * x.len()..(o + 1) * x.len()];
        for i in 0..x.len() {
            d_row[i] = g * x[i];
            d_x[i] += g * row[i];
        }
    }
    Ok(DenseGrads {
        input: d_x,
        weights: d_w,
        bias: upstream.to_vec(),
    })
}

pub const BCE_CLAMP: f64 = 1e-7;

fn clamp_prob(p: f64) -> f64 {
    p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP)
}

/// Binary cross-entropy with the prediction clamped to `[1e-7, 1 - 1e-7]`.
pub fn bce_loss(p: f64, y: f64) -> f64 {
    let p = clamp_prob(p);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// `dL/dp` evaluated at the clamped prediction.
pub fn bce_grad(p: f64, y: f64) -> f64 {
    let p = clamp_prob(p);
    (p - y) / (p * (1.0 - p))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam moments for one parameter block. The step counter lives with the
/// optimizer so that all blocks share it.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamMoments {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamMoments {
    pub fn zeros(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }
}

/// Single-block Adam state.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub moments: AdamMoments,
    pub t: u64,
}

impl AdamState {
    pub fn new(n: usize, config: AdamConfig) -> Self {
        Self {
            config,
            moments: AdamMoments::zeros(n),
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        self.t += 1;
        adam_update(&self.config, self.t, params, grads, &mut self.moments)
    }
}

/// Applies one bias-corrected Adam update at step `t` (1-based).
pub fn adam_update(
    cfg: &AdamConfig,
    t: u64,
    params: &mut [f64],
    grads: &[f64],
    moments: &mut AdamMoments,
) -> Result<()> {
    if params.len() != grads.len()
        || params.len() != moments.m.len()
        || params.len() != moments.v.len()
    {
        return Err(shape_err(format!(
            "adam: {} params, {} grads, {} moments",
            params.len(),
            grads.len(),
            moments.m.len()
        )));
    }
    let bc1 = 1.0 - cfg.beta1.powi(t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        moments.m[i] = cfg.beta1 * moments.m[i] + (1.0 - cfg.beta1) * g;
        moments.v[i] = cfg.beta2 * moments.v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = moments.m[i] / bc1;
        let v_hat = moments.v[i] / bc2;
        params[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
    Ok(())
}
