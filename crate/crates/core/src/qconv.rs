//! Quantum convolution over binary grids.
//!
//! A binary `fh x fw` window has at most `2^(fh*fw)` distinct contents, so
//! each distinct nonzero patch is evaluated once and the results are
//! scattered back to every position. Patches are keyed row-major with the
//! top-left cell as the most significant bit.

use std::collections::BTreeMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::ansatz::{AnsatzError, AnsatzParams, ShiftedCircuits};
use crate::nn::{NnError, Tensor2D};
use crate::qsim::{HadamardTest, QsimError, ShotConfig};
use crate::smiles::{BesGrid, GRID_COLS, GRID_ROWS};

/// Width and height of the quantum filter (two qubits hold four amplitudes).
pub const FILTER: usize = 2;
/// Number of distinct 2x2 binary patches.
pub const NUM_KEYS: usize = 1 << (FILTER * FILTER);
/// Output height and width for a full grid.
pub const OUT_ROWS: usize = GRID_ROWS - FILTER + 1;
pub const OUT_COLS: usize = GRID_COLS - FILTER + 1;

#[derive(Debug, Error)]
pub enum QconvError {
    #[error("quantum filter needs a 2-qubit ansatz, got {0} qubits")]
    Qubits(usize),
    #[error("{fh}x{fw} window is not supported")]
    Window { fh: usize, fw: usize },
    #[error(transparent)]
    Shape(#[from] NnError),
    #[error(transparent)]
    Ansatz(#[from] AnsatzError),
    #[error(transparent)]
    Qsim(#[from] QsimError),
}

type Result<T> = std::result::Result<T, QconvError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PatchKey(pub u16);

impl PatchKey {
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// The window contents as 0/1 values, row-major.
    pub fn bits(self, width: usize) -> Vec<f64> {
        (0..width)
            .map(|i| f64::from((self.0 >> (width - 1 - i)) & 1))
            .collect()
    }

    /// L2-normalized window contents. `None` for the zero key.
    pub fn normalized(self, width: usize) -> Option<Vec<f64>> {
        let bits = self.bits(width);
        let norm = bits.iter().sum::<f64>().sqrt();
        (norm > 0.0).then(|| bits.iter().map(|b| b / norm).collect())
    }
}

/// Key of the `fh x fw` window at `(r, c)`.
pub fn patch_key(grid: &BesGrid, r: usize, c: usize, fh: usize, fw: usize) -> PatchKey {
    let mut key = 0u16;
    for i in 0..fh {
        let row = grid.row(r + i) >> c;
        for j in 0..fw {
            key = (key << 1) | ((row >> j) & 1) as u16;
        }
    }
    PatchKey(key)
}

/// Per-position patch keys plus how often each key occurs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DedupCache {
    pub rows: usize,
    pub cols: usize,
    /// Row-major key for every output position.
    pub keys: Vec<PatchKey>,
    pub multiplicity: BTreeMap<PatchKey, usize>,
}

impl DedupCache {
    pub fn positions(&self) -> usize {
        self.keys.len()
    }

    pub fn nonzero_keys(&self) -> impl Iterator<Item = PatchKey> + '_ {
        self.multiplicity.keys().copied().filter(|k| !k.is_zero())
    }
}

/// Scans every stride-1 window and bins it by key. Windows up to 3x3 are
/// supported.
pub fn dedup_patches(grid: &BesGrid, fh: usize, fw: usize) -> Result<DedupCache> {
    if fh == 0 || fw == 0 || fh > 3 || fw > 3 {
        return Err(QconvError::Window { fh, fw });
    }
    let (rows, cols) = (GRID_ROWS - fh + 1, GRID_COLS - fw + 1);
    let keys: Vec<PatchKey> = if (fh, fw) == (FILTER, FILTER) {
        patch_keys(grid).into_iter().map(|k| PatchKey(u16::from(k))).collect()
    } else {
        (0..rows)
            .flat_map(|r| (0..cols).map(move |c| (r, c)))
            .map(|(r, c)| patch_key(grid, r, c, fh, fw))
            .collect()
    };
    let mut counts = vec![0usize; 1 << (fh * fw)];
    for k in &keys {
        counts[k.0 as usize] += 1;
    }
    let multiplicity = counts
        .iter()
        .enumerate()
        .filter(|(_, &n)| n > 0)
        .map(|(k, &n)| (PatchKey(k as u16), n))
        .collect();
    Ok(DedupCache {
        rows,
        cols,
        keys,
        multiplicity,
    })
}

/// Keys of the 2x2 windows, without the multiplicity map.
pub fn patch_keys(grid: &BesGrid) -> Vec<u8> {
    let mut keys = Vec::with_capacity(OUT_ROWS * OUT_COLS);
    for r in 0..OUT_ROWS {
        let (top, bottom) = (grid.row(r), grid.row(r + 1));
        // Skip the per-bit work on empty row pairs (padding).
        if top | bottom == 0 {
            keys.extend(std::iter::repeat_n(0u8, OUT_COLS));
            continue;
        }
        for c in 0..OUT_COLS {
            let t = (top >> c) & 3;
            let b = (bottom >> c) & 3;
            // bit c is the left cell; row-major MSB-first ordering flips each pair
            let key = ((t & 1) << 3) | ((t >> 1) << 2) | ((b & 1) << 1) | (b >> 1);
            keys.push(key as u8);
        }
    }
    keys
}

fn check_theta(theta: &AnsatzParams) -> Result<()> {
    if theta.qubits() != 2 {
        return Err(QconvError::Qubits(theta.qubits()));
    }
    Ok(())
}

/// Inner-product value (and optionally its gradient with respect to the
/// first-layer parameters) for every possible 2x2 key. Key 0 is always 0.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyTable {
    pub values: [f64; NUM_KEYS],
    /// `grads[k]` has one entry per first-layer parameter; empty when the
    /// table was built without gradients.
    pub grads: Vec<Vec<f64>>,
    pub circuit_evaluations: usize,
}

impl KeyTable {
    /// Hadamard-test values for all 15 nonzero keys.
    pub fn quantum(theta: &AnsatzParams) -> Result<Self> {
        check_theta(theta)?;
        let circuit = HadamardTest::new(theta);
        let mut values = [0.0; NUM_KEYS];
        let computed: Vec<f64> = (1..NUM_KEYS)
            .into_par_iter()
            .map(|k| {
                let x = PatchKey(k as u16).normalized(4).expect("nonzero key");
                circuit.real(&x, &ShotConfig::Exact)
            })
            .collect::<std::result::Result<_, _>>()?;
        values[1..].copy_from_slice(&computed);
        Ok(Self {
            values,
            grads: Vec::new(),
            circuit_evaluations: NUM_KEYS - 1,
        })
    }

    /// Values plus parameter-shift gradients for all 15 nonzero keys.
    pub fn quantum_with_grads(theta: &AnsatzParams) -> Result<Self> {
        let mut table = Self::quantum(theta)?;
        let shifted = ShiftedCircuits::new(theta);
        let mut grads = vec![vec![0.0; theta.len()]];
        let computed: Vec<Vec<f64>> = (1..NUM_KEYS)
            .into_par_iter()
            .map(|k| shifted.gradient(&PatchKey(k as u16).normalized(4).expect("nonzero key")))
            .collect::<std::result::Result<_, _>>()?;
        grads.extend(computed);
        table.grads = grads;
        table.circuit_evaluations += (NUM_KEYS - 1) * 2 * theta.len();
        Ok(table)
    }

    /// Normalized-convolution values for a classical 2x2 filter. The
    /// gradient of `<p_hat, w>` with respect to `w` is `p_hat`.
    pub fn classical(filter: &[f64]) -> Result<Self> {
        if filter.len() != FILTER * FILTER {
            return Err(NnError::Shape(format!("classical filter has {} weights", filter.len())).into());
        }
        let mut values = [0.0; NUM_KEYS];
        let mut grads = vec![vec![0.0; filter.len()]];
        for (k, value) in values.iter_mut().enumerate().skip(1) {
            let p = PatchKey(k as u16).normalized(4).expect("nonzero key");
            *value = p.iter().zip(filter).map(|(a, b)| a * b).sum();
            grads.push(p);
        }
        Ok(Self {
            values,
            grads,
            circuit_evaluations: 0,
        })
    }

    pub fn has_grads(&self) -> bool {
        !self.grads.is_empty()
    }

    /// Layer output for precomputed keys: table value plus bias.
    pub fn forward(&self, keys: &[u8], bias: f64) -> Tensor2D {
        let data = keys.iter().map(|&k| self.values[k as usize] + bias).collect();
        Tensor2D::from_vec(OUT_ROWS, OUT_COLS, data).expect("full-grid key count")
    }

    /// Returns the gradient with respect to the first-layer parameters and
    /// the bias. Upstream deltas are summed per key, then keys are reduced
    /// in ascending order.
    pub fn backward(&self, keys: &[u8], upstream: &[f64]) -> (Vec<f64>, f64) {
        assert!(self.has_grads(), "key table built without gradients");
        assert_eq!(keys.len(), upstream.len());
        let mut per_key = [0.0; NUM_KEYS];
        let mut bias = 0.0;
        for (&k, &g) in keys.iter().zip(upstream) {
            per_key[k as usize] += g;
            bias += g;
        }
        let n = self.grads[0].len();
        let mut out = vec![0.0; n];
        for (k, &d) in per_key.iter().enumerate().skip(1) {
            if d != 0.0 {
                for (o, g) in out.iter_mut().zip(&self.grads[k]) {
                    *o += d * g;
                }
            }
        }
        (out, bias)
    }
}

/// Output of a forward pass with its work counters.
#[derive(Debug, Clone)]
pub struct QconvOutput {
    pub output: Tensor2D,
    /// Hadamard-test circuits actually run.
    pub circuit_evaluations: usize,
    /// Inner products computed, counting zero windows resolved by the
    /// zero-patch rule.
    pub inner_products: usize,
}

/// Deduplicated quantum convolution: one Hadamard test per distinct nonzero
/// patch in this grid.
pub fn qconv_forward(grid: &BesGrid, theta: &AnsatzParams, bias: f64) -> Result<QconvOutput> {
    check_theta(theta)?;
    let cache = dedup_patches(grid, FILTER, FILTER)?;
    let circuit = HadamardTest::new(theta);
    let mut values = [0.0; NUM_KEYS];
    let mut evaluations = 0;
    for key in cache.nonzero_keys() {
        let x = key.normalized(4).expect("nonzero key");
        values[key.0 as usize] = circuit.real(&x, &ShotConfig::Exact)?;
        evaluations += 1;
    }
    let data = cache.keys.iter().map(|k| values[k.0 as usize] + bias).collect();
    Ok(QconvOutput {
        output: Tensor2D::from_vec(cache.rows, cache.cols, data)?,
        circuit_evaluations: evaluations,
        inner_products: cache.multiplicity.len(),
    })
}

/// Reference implementation that runs one circuit per nonzero window.
pub fn qconv_forward_naive(grid: &BesGrid, theta: &AnsatzParams, bias: f64) -> Result<QconvOutput> {
    check_theta(theta)?;
    let circuit = HadamardTest::new(theta);
    let mut out = Tensor2D::zeros(OUT_ROWS, OUT_COLS);
    let mut evaluations = 0;
    for r in 0..OUT_ROWS {
        for c in 0..OUT_COLS {
            let patch = [
                grid.get(r, c),
                grid.get(r, c + 1),
                grid.get(r + 1, c),
                grid.get(r + 1, c + 1),
            ]
            .map(|b| if b { 1.0 } else { 0.0 });
            let norm = patch.iter().sum::<f64>().sqrt();
            let value = if norm == 0.0 {
                0.0
            } else {
                evaluations += 1;
                let x: Vec<f64> = patch.iter().map(|v| v / norm).collect();
                circuit.real(&x, &ShotConfig::Exact)?
            };
            out.set(r, c, value + bias);
        }
    }
    Ok(QconvOutput {
        output: out,
        circuit_evaluations: evaluations,
        inner_products: OUT_ROWS * OUT_COLS,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct QconvGrads {
    pub theta: Vec<f64>,
    pub bias: f64,
    pub circuit_evaluations: usize,
}

/// Chain rule through the dedup structure: each distinct key's upstream
/// deltas are summed, then multiplied by that patch's parameter-shift
/// gradient.
pub fn qconv_backward(grid: &BesGrid, theta: &AnsatzParams, upstream: &Tensor2D) -> Result<QconvGrads> {
    check_theta(theta)?;
    if upstream.shape() != (OUT_ROWS, OUT_COLS) {
        return Err(NnError::Shape(format!("upstream is {:?}", upstream.shape())).into());
    }
    let cache = dedup_patches(grid, FILTER, FILTER)?;
    let mut per_key: BTreeMap<PatchKey, f64> = BTreeMap::new();
    let mut bias = 0.0;
    for (k, &g) in cache.keys.iter().zip(upstream.data()) {
        bias += g;
        if !k.is_zero() {
            *per_key.entry(*k).or_insert(0.0) += g;
        }
    }
    let shifted = ShiftedCircuits::new(theta);
    let mut grad = vec![0.0; theta.len()];
    let mut evaluations = 0;
    for (key, delta) in per_key {
        if delta == 0.0 {
            continue;
        }
        let g = shifted.gradient(&key.normalized(4).expect("nonzero key"))?;
        evaluations += 2 * theta.len();
        for (o, gi) in grad.iter_mut().zip(g) {
            *o += delta * gi;
        }
    }
    Ok(QconvGrads {
        theta: grad,
        bias,
        circuit_evaluations: evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::first_column;
    use crate::nn::normalized_conv_forward;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_grid(rng: &mut ChaCha8Rng, density: f64) -> BesGrid {
        let mut g = BesGrid::empty();
        for r in 0..GRID_ROWS {
            for c in 0..GRID_COLS {
                if rng.gen_bool(density) {
                    g.set(r, c, true);
                }
            }
        }
        g
    }

    fn grid_tensor(g: &BesGrid) -> Tensor2D {
        Tensor2D::from_vec(GRID_ROWS, GRID_COLS, g.to_dense()).unwrap()
    }

    #[test]
    fn zero_grid_dedup() {
        let cache = dedup_patches(&BesGrid::empty(), 2, 2).unwrap();
        assert_eq!(cache.multiplicity.len(), 1);
        assert_eq!(cache.multiplicity[&PatchKey(0)], 22344);
        let theta = AnsatzParams::zeros(3, 2);
        let out = qconv_forward(&BesGrid::empty(), &theta, 0.4).unwrap();
        assert_eq!(out.circuit_evaluations, 0);
        assert!(out.output.data().iter().all(|&v| v == 0.4));
    }

    #[test]
    fn single_bit_keys() {
        let mut g = BesGrid::empty();
        g.set(10, 20, true);
        let cache = dedup_patches(&g, 2, 2).unwrap();
        let keys: Vec<u16> = cache.multiplicity.keys().map(|k| k.0).collect();
        assert_eq!(keys, vec![0, 1, 2, 4, 8]);
        // top-left of the window at (10, 20) is the set bit
        assert_eq!(patch_key(&g, 10, 20, 2, 2), PatchKey(8));
        assert_eq!(patch_key(&g, 9, 19, 2, 2), PatchKey(1));
    }

    #[test]
    fn fast_keys_match_patch_key() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = random_grid(&mut rng, 0.3);
        let fast = patch_keys(&g);
        let cache = dedup_patches(&g, 2, 2).unwrap();
        assert!(fast.iter().zip(&cache.keys).all(|(&a, b)| u16::from(a) == b.0));
    }

    #[test]
    fn identity_theta_top_left_patch() {
        let mut g = BesGrid::empty();
        g.set(0, 0, true);
        let out = qconv_forward(&g, &AnsatzParams::zeros(3, 2), 0.25).unwrap();
        assert!((out.output.get(0, 0) - 1.25).abs() < 1e-12);
    }

    #[test]
    fn dedup_matches_naive_and_classical() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..3 {
            let g = random_grid(&mut rng, 0.2);
            let theta = AnsatzParams::random(3, 2, &mut rng);
            let fast = qconv_forward(&g, &theta, -0.1).unwrap();
            let naive = qconv_forward_naive(&g, &theta, -0.1).unwrap();
            assert_eq!(fast.output, naive.output);
            assert!(fast.circuit_evaluations <= 15);
            let w: Vec<f64> = first_column(&theta).iter().map(|z| z.re).collect();
            let classical = normalized_conv_forward(
                &grid_tensor(&g),
                &Tensor2D::from_vec(2, 2, w.clone()).unwrap(),
                -0.1,
            )
            .unwrap();
            for (a, b) in fast.output.data().iter().zip(classical.data()) {
                assert!((a - b).abs() < 1e-10);
            }
            let keys = patch_keys(&g);
            let table = KeyTable::quantum(&theta).unwrap();
            assert_eq!(table.forward(&keys, -0.1), fast.output);
            let ct = KeyTable::classical(&w).unwrap();
            for (a, b) in ct.forward(&keys, -0.1).data().iter().zip(classical.data()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn backward_single_delta_and_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = random_grid(&mut rng, 0.3);
        let theta = AnsatzParams::random(3, 2, &mut rng);
        let zero = qconv_backward(&g, &theta, &Tensor2D::zeros(OUT_ROWS, OUT_COLS)).unwrap();
        assert!(zero.theta.iter().all(|&v| v == 0.0));
        assert_eq!(zero.bias, 0.0);

        let (r, c) = (7, 9);
        let key = patch_key(&g, r, c, 2, 2);
        let mut up = Tensor2D::zeros(OUT_ROWS, OUT_COLS);
        up.set(r, c, 0.7);
        let grads = qconv_backward(&g, &theta, &up).unwrap();
        let expected = crate::ansatz::param_gradient(&key.normalized(4).unwrap_or(vec![1.0, 0.0, 0.0, 0.0]), &theta).unwrap();
        for (a, e) in grads.theta.iter().zip(expected) {
            let e = if key.is_zero() { 0.0 } else { 0.7 * e };
            assert!((a - e).abs() < 1e-12);
        }
        assert!((grads.bias - 0.7).abs() < 1e-15);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = random_grid(&mut rng, 0.25);
        let theta = AnsatzParams::random(3, 2, &mut rng);
        let up = Tensor2D::from_vec(
            OUT_ROWS,
            OUT_COLS,
            (0..OUT_ROWS * OUT_COLS).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let loss = |t: &AnsatzParams| -> f64 {
            let out = qconv_forward(&g, t, 0.0).unwrap().output;
            out.data().iter().zip(up.data()).map(|(a, b)| a * b).sum()
        };
        let grads = qconv_backward(&g, &theta, &up).unwrap();
        assert!(grads.circuit_evaluations <= 15 * 36);
        let table = KeyTable::quantum_with_grads(&theta).unwrap();
        let (tg, tb) = table.backward(&patch_keys(&g), up.data());
        let h = 1e-5;
        for i in 0..theta.len() {
            let fd = (loss(&theta.shifted(i, h)) - loss(&theta.shifted(i, -h))) / (2.0 * h);
            let rel = (fd - grads.theta[i]).abs() / fd.abs().max(1e-6);
            assert!(rel < 1e-5, "angle {i}: fd {fd} vs {}", grads.theta[i]);
            assert!((tg[i] - grads.theta[i]).abs() < 1e-9 * fd.abs().max(1.0));
        }
        assert!((tb - grads.bias).abs() < 1e-9);
    }

    #[test]
    fn rejects_wrong_qubits_and_windows() {
        let t3 = AnsatzParams::zeros(1, 3);
        assert!(matches!(
            qconv_forward(&BesGrid::empty(), &t3, 0.0),
            Err(QconvError::Qubits(3))
        ));
        assert!(dedup_patches(&BesGrid::empty(), 4, 2).is_err());
        assert!(KeyTable::classical(&[1.0; 3]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn multiplicities_cover_every_position(seed in any::<u64>(), density in 0.0f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_grid(&mut rng, density);
            let cache = dedup_patches(&g, 2, 2).unwrap();
            prop_assert_eq!(cache.multiplicity.values().sum::<usize>(), 22344);
            prop_assert!(cache.multiplicity.len() <= 16);
            prop_assert!(cache.nonzero_keys().count() <= 15);
        }
    }
}
