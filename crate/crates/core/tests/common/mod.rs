//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use num_complex::Complex64 as C;
use rand::seq::SliceRandom;
use rand::Rng;

type M4 = [[C; 4]; 4];

fn rot(alpha: f64, beta: f64, gamma: f64) -> [[C; 2]; 2] {
    // Closed form of RZ(gamma) RY(beta) RZ(alpha).
    let (s, c) = (beta / 2.0).sin_cos();
    let e = |phase: f64| C::from_polar(1.0, phase);
    [
        [e(-(alpha + gamma) / 2.0) * c, -e((alpha - gamma) / 2.0) * s],
        [e(-(alpha - gamma) / 2.0) * s, e((alpha + gamma) / 2.0) * c],
    ]
}

fn kron(a: &[[C; 2]; 2], b: &[[C; 2]; 2]) -> M4 {
    let mut out = [[C::new(0.0, 0.0); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = a[i / 2][j / 2] * b[i % 2][j % 2];
        }
    }
    out
}

fn matmul(a: &M4, b: &M4) -> M4 {
    let mut out = [[C::new(0.0, 0.0); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// Two-qubit ansatz unitary built from dense matrices. Qubit 0 is the high
/// bit; angles are `[layer][qubit][alpha, beta, gamma]`.
pub fn ansatz_unitary(angles: &[f64], layers: usize) -> M4 {
    let one = C::new(1.0, 0.0);
    let zero = C::new(0.0, 0.0);
    let mut cnot = [[zero; 4]; 4];
    for (i, j) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
        cnot[i][j] = one;
    }
    let mut u = [[zero; 4]; 4];
    for (i, row) in u.iter_mut().enumerate() {
        row[i] = one;
    }
    for l in 0..layers {
        let a = &angles[l * 6..l * 6 + 3];
        let b = &angles[l * 6 + 3..l * 6 + 6];
        let layer = matmul(&cnot, &kron(&rot(a[0], a[1], a[2]), &rot(b[0], b[1], b[2])));
        u = matmul(&layer, &u);
    }
    u
}

/// `<x_hat | U e_0>` for a real 4-vector `x`.
pub fn overlap(x: &[f64], angles: &[f64], layers: usize) -> C {
    let u = ansatz_unitary(angles, layers);
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    (0..4).map(|i| u[i][0] * (x[i] / norm)).sum()
}

/// O(n^2) pairwise AUC: P(score_pos > score_neg) with ties counting half.
pub fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut total = 0.0;
    let mut pairs = 0usize;
    for (i, &si) in scores.iter().enumerate() {
        if !labels[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] {
                continue;
            }
            pairs += 1;
            total += if si > sj {
                1.0
            } else if si == sj {
                0.5
            } else {
                0.0
            };
        }
    }
    total / pairs as f64
}

pub fn std_dev(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Least-squares slope of `ys` against `xs`.
pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    cov / var
}

const FRAGMENTS: &[&str] = &[
    "C", "CC", "N", "O", "C(=O)O", "c1ccccc1", "C1CCCCC1", "Cl", "C#N", "S", "C=C", "OC",
    "c1ccncc1", "C(C)(C)", "N(C)C", "C(=O)N", "Br", "c1ccc(O)cc1", "[C@@H](N)C", "C1CCNCC1",
];

/// Random, mostly valid SMILES made by chaining fragments. Labels lean on
/// the presence of nitrogen so a model has something to learn.
pub fn synthetic_molecules<R: Rng>(n: usize, rng: &mut R) -> Vec<(String, bool)> {
    (0..n)
        .map(|_| {
            let parts = rng.gen_range(1..=6);
            let s: String = (0..parts).map(|_| *FRAGMENTS.choose(rng).unwrap()).collect();
            let nitrogen = s.contains('N') || s.contains('n');
            let label = if rng.gen_bool(0.85) { nitrogen } else { !nitrogen };
            (s, label)
        })
        .collect()
}

/// A Tox21-style CSV with one assay column (`NR-AhR`) and a few unlabeled
/// rows.
pub fn synthetic_csv<R: Rng>(n: usize, rng: &mut R) -> String {
    let mut out = String::from("NR-AR,NR-AhR,mol_id,smiles\n");
    for (i, (s, label)) in synthetic_molecules(n, rng).into_iter().enumerate() {
        let cell = if i % 17 == 5 { "" } else if label { "1" } else { "0" };
        out.push_str(&format!("0,{cell},M{i:05},{s}\n"));
    }
    out
}

/// Tox21 CSV from `QCNN_TOX21_CSV` or `data/tox21.csv` at the workspace root.
pub fn tox21_path() -> Option<PathBuf> {
    if let Ok(p) = std::env::var("QCNN_TOX21_CSV") {
        return Some(PathBuf::from(p)).filter(|p| p.exists());
    }
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/tox21.csv");
    root.exists().then_some(root)
}

pub struct Golden {
    pub name: String,
    pub smiles: String,
    pub length: usize,
    /// `(row, sorted columns)` for every nonzero row.
    pub rows: Vec<(usize, Vec<usize>)>,
}

pub fn golden_files() -> Vec<Golden> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let mut paths: Vec<_> = std::fs::read_dir(&dir)
        .expect("golden dir")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "txt"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let text = std::fs::read_to_string(&p).unwrap();
            let mut g = Golden {
                name: p.file_stem().unwrap().to_string_lossy().into_owned(),
                smiles: String::new(),
                length: 0,
                rows: Vec::new(),
            };
            for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
                if let Some(s) = line.strip_prefix("smiles ") {
                    g.smiles = s.trim().to_string();
                } else if let Some(n) = line.strip_prefix("length ") {
                    g.length = n.trim().parse().unwrap();
                } else {
                    let (r, cols) = line.split_once(':').expect("row: cols");
                    let mut cols: Vec<usize> = cols.split_whitespace().map(|c| c.parse().unwrap()).collect();
                    cols.sort_unstable();
                    g.rows.push((r.trim().parse().unwrap(), cols));
                }
            }
            g
        })
        .collect()
}
