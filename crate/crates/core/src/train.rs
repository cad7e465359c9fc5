//! Mini-batch training with per-epoch evaluation, checkpoints and curves.

use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;

use crate::data::{batches, AssayDataset, SplitKind};
use crate::metrics::{roc_auc, CurveLogger, EpochRecord, Phase};
use crate::model::{Checkpoint, Model, ModelError};
use crate::nn::bce_loss;
use crate::smiles::BesGrid;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("i/o")]
    Io(#[from] std::io::Error),
    #[error("the training split is empty")]
    EmptyTrain,
}

#[derive(Debug, Clone)]
pub struct TrainOptions {
    /// Train until the checkpoint's epoch counter reaches this value.
    pub until_epoch: u64,
    pub batch_size: usize,
    pub shuffle_seed: u64,
    pub phase: Phase,
    /// Where to write one checkpoint per epoch, if anywhere.
    pub checkpoint_dir: Option<PathBuf>,
}

pub fn checkpoint_path(dir: &Path, phase: Phase, epoch: u64) -> PathBuf {
    dir.join(format!("{}-epoch-{epoch:03}.ckpt", phase.as_str()))
}

/// Mean BCE, ROC-AUC (if both classes are present) and predictions.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub loss: f64,
    pub auc: Option<f64>,
    pub predictions: Vec<f64>,
}

fn summarize(predictions: Vec<f64>, labels: &[bool]) -> Evaluation {
    let loss = if predictions.is_empty() {
        f64::NAN
    } else {
        predictions
            .iter()
            .zip(labels)
            .map(|(&p, &y)| bce_loss(p, f64::from(u8::from(y))))
            .sum::<f64>()
            / predictions.len() as f64
    };
    let auc = roc_auc(&predictions, labels).ok();
    Evaluation {
        loss,
        auc,
        predictions,
    }
}

pub fn evaluate(model: &Model, grids: &[&BesGrid], labels: &[bool]) -> Result<Evaluation, TrainError> {
    Ok(summarize(model.predict(grids)?, labels))
}

pub fn evaluate_split(model: &Model, ds: &AssayDataset, kind: SplitKind) -> Result<Evaluation, TrainError> {
    evaluate(model, &ds.grids(kind), &ds.labels(kind))
}

/// Runs epochs `ck.epoch + 1 ..= until_epoch`. Train loss and AUC come from
/// the predictions made while the epoch trains; test metrics are computed
/// after it. Each record is logged (if a logger is given) and passed to
/// `on_epoch`.
pub fn train(
    ck: &mut Checkpoint,
    ds: &AssayDataset,
    opts: &TrainOptions,
    mut logger: Option<&mut CurveLogger>,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<Vec<EpochRecord>, TrainError> {
    if ds.split.train.is_empty() && opts.until_epoch > ck.epoch {
        return Err(TrainError::EmptyTrain);
    }
    if let Some(dir) = &opts.checkpoint_dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut records = Vec::new();
    while ck.epoch < opts.until_epoch {
        let epoch = ck.epoch + 1;
        let start = Instant::now();
        let mut seen_preds = Vec::with_capacity(ds.split.train.len());
        let mut seen_labels = Vec::with_capacity(ds.split.train.len());
        for batch in batches(ds, SplitKind::Train, opts.batch_size, opts.shuffle_seed, epoch) {
            let grids: Vec<&BesGrid> = batch.iter().map(|&i| &ds.records[i].grid).collect();
            let labels: Vec<bool> = batch.iter().map(|&i| ds.records[i].label).collect();
            let targets: Vec<f64> = labels.iter().map(|&l| f64::from(u8::from(l))).collect();
            let table = ck.model.key_table(true)?;
            let result = ck.model.batch_gradient(&table, &grids, &targets)?;
            ck.optimizer.step(&mut ck.model, &result.grads)?;
            seen_preds.extend(result.predictions);
            seen_labels.extend(labels);
        }
        let train_eval = summarize(seen_preds, &seen_labels);
        let test_eval = evaluate_split(&ck.model, ds, SplitKind::Test)?;
        ck.epoch = epoch;
        let record = EpochRecord {
            epoch,
            phase: opts.phase,
            train_loss: train_eval.loss,
            test_loss: test_eval.loss,
            train_auc: train_eval.auc,
            test_auc: test_eval.auc,
            wall_time: start.elapsed().as_secs_f64(),
        };
        if let Some(dir) = &opts.checkpoint_dir {
            ck.save(&checkpoint_path(dir, opts.phase, epoch))?;
        }
        if let Some(log) = logger.as_deref_mut() {
            log.log(&record)?;
        }
        on_epoch(&record);
        records.push(record);
    }
    Ok(records)
}
