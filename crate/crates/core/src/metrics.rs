//! ROC-AUC and per-epoch training curves.

use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AucError {
    #[error("ROC-AUC is undefined without both classes ({positives} positive, {negatives} negative)")]
    Undefined { positives: usize, negatives: usize },
    #[error("{scores} scores but {labels} labels")]
    Length { scores: usize, labels: usize },
    #[error("score {0} is not finite")]
    NonFinite(usize),
}

fn check(scores: &[f64], labels: &[bool]) -> Result<(usize, usize), AucError> {
    if scores.len() != labels.len() {
        return Err(AucError::Length {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(AucError::NonFinite(i));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(AucError::Undefined {
            positives,
            negatives,
        });
    }
    Ok((positives, negatives))
}

/// Area under the ROC curve: TPR = TP/(TP+FN) against FPR = FP/(FP+TN) at
/// every distinct score threshold, integrated with the trapezoid rule. Tied
/// scores move both rates at once, which counts a tied pair as one half.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64, AucError> {
    let (positives, negatives) = check(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut fp) = (0usize, 0usize);
    let (mut prev_tpr, mut prev_fpr) = (0.0, 0.0);
    let mut area = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let tpr = tp as f64 / positives as f64;
        let fpr = fp as f64 / negatives as f64;
        area += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
        prev_tpr = tpr;
        prev_fpr = fpr;
    }
    Ok(area)
}

/// Mann-Whitney U statistic from mid-ranks, divided by `P * N`.
pub fn mann_whitney_auc(scores: &[f64], labels: &[bool]) -> Result<f64, AucError> {
    let (positives, negatives) = check(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1..=j share their mean
        let mid = (i + 1 + j) as f64 / 2.0;
        rank_sum += mid * order[i..j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j;
    }
    let p = positives as f64;
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * negatives as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Quantum,
    Classical,
    Ablation,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Quantum => "quantum",
            Phase::Classical => "classical",
            Phase::Ablation => "ablation",
        }
    }
}

/// One row of `metrics.csv`. AUC cells are empty when a split has a single
/// class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: u64,
    pub phase: Phase,
    pub train_loss: f64,
    pub test_loss: f64,
    pub train_auc: Option<f64>,
    pub test_auc: Option<f64>,
    /// Seconds spent in this epoch.
    pub wall_time: f64,
}

pub const CSV_HEADER: &str = "epoch,phase,train_loss,test_loss,train_auc,test_auc,wall_time";

/// Appends epoch records to a CSV file, writing the header when the file is
/// new or empty.
pub struct CurveLogger {
    path: PathBuf,
    writer: csv::Writer<File>,
}

impl CurveLogger {
    pub fn open(path: &Path) -> io::Result<Self> {
        let existing = path.metadata().map(|m| m.len()).unwrap_or(0);
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        let writer = csv::WriterBuilder::new()
            .has_headers(existing == 0)
            .from_writer(file);
        Ok(Self {
            path: path.to_path_buf(),
            writer,
        })
    }

    /// Creates the file with only the header row, truncating any old one.
    pub fn create(path: &Path) -> io::Result<Self> {
        let mut f = File::create(path)?;
        writeln!(f, "{CSV_HEADER}")?;
        drop(f);
        Self::open(path)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn log(&mut self, record: &EpochRecord) -> io::Result<()> {
        self.writer.serialize(record).map_err(io::Error::other)?;
        self.writer.flush()
    }
}

pub fn read_curve(path: &Path) -> io::Result<Vec<EpochRecord>> {
    let mut reader = csv::Reader::from_path(path).map_err(io::Error::other)?;
    reader
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(io::Error::other)
}
