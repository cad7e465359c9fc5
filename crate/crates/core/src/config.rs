//! Run configuration: a plain `key = value` text file.
//!
//! Blank lines and lines starting with `#` are ignored. Keys:
//!
//! | key | default | meaning |
//! |-----|---------|---------|
//! | `assay` | `NR-AhR` | one of the twelve Tox21 assays |
//! | `variant` | `qnn` | `qnn` or `cnn` |
//! | `data` | `data/tox21.csv` | CSV file or pre-encoded directory |
//! | `run_dir` | `runs/default` | output directory |
//! | `epochs` | `10` | train up to this epoch number |
//! | `batch_size` | `32` | |
//! | `seed` | `0` | parameter initialization |
//! | `split_seed` | `0` | train/test split |
//! | `shuffle_seed` | `0` | per-epoch batch order |
//! | `ablation_seed` | `0` | random filter for `ablate` |
//! | `lr` | `0.001` | Adam learning rate |
//! | `threads` | `0` | worker threads, 0 = all cores |
//! | `ansatz_layers` | `3` | |
//! | `conv2_filters` | `4` | |
//! | `conv2_size` | `2` | |
//!
//! `QCNN_DATA`, `QCNN_RUN_DIR` and `QCNN_THREADS` override the file.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::data::canonical_assay;
use crate::model::{ModelSpec, Variant};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error("{}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub assay: String,
    pub variant: Variant,
    pub data: PathBuf,
    pub run_dir: PathBuf,
    pub epochs: u64,
    pub batch_size: usize,
    pub seed: u64,
    pub split_seed: u64,
    pub shuffle_seed: u64,
    pub ablation_seed: u64,
    pub lr: f64,
    pub threads: usize,
    pub ansatz_layers: usize,
    pub conv2_filters: usize,
    pub conv2_size: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            assay: "NR-AhR".into(),
            variant: Variant::Qnn,
            data: PathBuf::from("data/tox21.csv"),
            run_dir: PathBuf::from("runs/default"),
            epochs: 10,
            batch_size: 32,
            seed: 0,
            split_seed: 0,
            shuffle_seed: 0,
            ablation_seed: 0,
            lr: 1e-3,
            threads: 0,
            ansatz_layers: 3,
            conv2_filters: 4,
            conv2_size: 2,
        }
    }
}

fn parse<T: FromStr>(value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| format!("bad value '{value}': {e}"))
}

impl Config {
    /// Sets one key; the error message does not include a location.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let value = value.trim();
        match key.trim() {
            "assay" => self.assay = canonical_assay(value).map_err(|e| e.to_string())?.to_string(),
            "variant" => self.variant = value.parse()?,
            "data" => self.data = PathBuf::from(value),
            "run_dir" => self.run_dir = PathBuf::from(value),
            "epochs" => self.epochs = parse(value)?,
            "batch_size" => {
                self.batch_size = parse(value)?;
                if self.batch_size == 0 {
                    return Err("batch_size must be positive".into());
                }
            }
            "seed" => self.seed = parse(value)?,
            "split_seed" => self.split_seed = parse(value)?,
            "shuffle_seed" => self.shuffle_seed = parse(value)?,
            "ablation_seed" => self.ablation_seed = parse(value)?,
            "lr" => {
                self.lr = parse(value)?;
                if !(self.lr > 0.0 && self.lr.is_finite()) {
                    return Err("lr must be positive".into());
                }
            }
            "threads" => self.threads = parse(value)?,
            "ansatz_layers" => self.ansatz_layers = parse(value)?,
            "conv2_filters" => self.conv2_filters = parse(value)?,
            "conv2_size" => self.conv2_size = parse(value)?,
            other => return Err(format!("unknown key '{other}'")),
        }
        Ok(())
    }

    pub fn parse_str(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| ConfigError::Line { line: i + 1, message };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err("expected key = value".into()))?;
            cfg.set(key, value).map_err(err)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse_str(&text)
    }

    /// Applies `key=value` overrides, e.g. from the command line.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<(), ConfigError> {
        for o in overrides {
            let o = o.as_ref();
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| ConfigError::Invalid(format!("override '{o}' is not key=value")))?;
            self.set(k, v)
                .map_err(|m| ConfigError::Invalid(format!("override '{o}': {m}")))?;
        }
        Ok(())
    }

    /// Applies `QCNN_DATA`, `QCNN_RUN_DIR` and `QCNN_THREADS`.
    pub fn apply_env(&mut self) -> Result<(), ConfigError> {
        self.apply_env_from(|k| std::env::var(k).ok())
    }

    pub fn apply_env_from(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        for (var, key) in [("QCNN_DATA", "data"), ("QCNN_RUN_DIR", "run_dir"), ("QCNN_THREADS", "threads")] {
            if let Some(v) = get(var) {
                self.set(key, &v)
                    .map_err(|m| ConfigError::Invalid(format!("{var}: {m}")))?;
            }
        }
        Ok(())
    }

    pub fn model_spec(&self) -> ModelSpec {
        ModelSpec {
            variant: self.variant,
            ansatz_layers: self.ansatz_layers,
            qubits: 2,
            conv2_filters: self.conv2_filters,
            conv2_size: self.conv2_size,
        }
    }

    /// The config in file form; `parse_str(to_text())` round-trips.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").expect("string write");
        kv("assay", self.assay.clone());
        kv("variant", self.variant.as_str().into());
        kv("data", self.data.display().to_string());
        kv("run_dir", self.run_dir.display().to_string());
        kv("epochs", self.epochs.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv("seed", self.seed.to_string());
        kv("split_seed", self.split_seed.to_string());
        kv("shuffle_seed", self.shuffle_seed.to_string());
        kv("ablation_seed", self.ablation_seed.to_string());
        kv("lr", format!("{:?}", self.lr));
        kv("threads", self.threads.to_string());
        kv("ansatz_layers", self.ansatz_layers.to_string());
        kv("conv2_filters", self.conv2_filters.to_string());
        kv("conv2_size", self.conv2_size.to_string());
        s
    }
}
