//! Tox21 ingestion, filtering, splitting and batching.
//!
//! Expected CSV layout (the common Tox21 export): a header row with a
//! `smiles` column, the twelve assay columns named as in [`ASSAYS`]
//! (case-insensitive), and optionally `mol_id`. Assay cells are `1`/`1.0`,
//! `0`/`0.0`, or blank for "not measured". Other columns are ignored.
//!
//! A pre-encoded directory (written by `qcnn encode`) holds
//! `<assay>.besg` (packed grids) and `<assay>.labels.csv`
//! (`source_index,id,label`).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{self, stream};
use crate::smiles::{self, BesGrid, GridRecord};

pub const ASSAYS: [&str; 12] = [
    "NR-AR",
    "NR-AR-LBD",
    "NR-AhR",
    "NR-Aromatase",
    "NR-ER",
    "NR-ER-LBD",
    "NR-PPAR-gamma",
    "SR-ARE",
    "SR-ATAD5",
    "SR-HSE",
    "SR-MMP",
    "SR-p53",
];

pub const TRAIN_FRACTION: f64 = 0.8;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("csv")]
    Csv(#[from] csv::Error),
    #[error("unknown assay '{0}'")]
    UnknownAssay(String),
    #[error("missing column '{0}'")]
    MissingColumn(String),
    #[error("{0}")]
    Format(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Canonical assay name for a case-insensitive match.
pub fn canonical_assay(name: &str) -> Result<&'static str, DataError> {
    ASSAYS
        .iter()
        .find(|a| a.eq_ignore_ascii_case(name.trim()))
        .copied()
        .ok_or_else(|| DataError::UnknownAssay(name.to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub id: String,
    /// Zero-based data-row index in the source file.
    pub source_index: usize,
    pub grid: BesGrid,
    pub label: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Shuffles `0..n` with `seed` and puts the first `round(0.8 n)` in the
    /// training split. Both lists are returned sorted.
    pub fn new(n: usize, seed: u64) -> Self {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng::seeded(seed, stream::SPLIT));
        let n_train = (TRAIN_FRACTION * n as f64).round() as usize;
        let (mut train, mut test) = (idx[..n_train].to_vec(), idx[n_train..].to_vec());
        train.sort_unstable();
        test.sort_unstable();
        Self { train, test }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitKind {
    Train,
    Test,
}

#[derive(Debug, Clone)]
pub struct AssayDataset {
    pub assay: String,
    pub records: Vec<Record>,
    pub split: Split,
}

impl AssayDataset {
    pub fn new(assay: &str, records: Vec<Record>, seed: u64) -> Self {
        let split = Split::new(records.len(), seed);
        Self {
            assay: assay.to_string(),
            records,
            split,
        }
    }

    pub fn indices(&self, kind: SplitKind) -> &[usize] {
        match kind {
            SplitKind::Train => &self.split.train,
            SplitKind::Test => &self.split.test,
        }
    }

    pub fn grids(&self, kind: SplitKind) -> Vec<&BesGrid> {
        self.indices(kind).iter().map(|&i| &self.records[i].grid).collect()
    }

    pub fn labels(&self, kind: SplitKind) -> Vec<bool> {
        self.indices(kind).iter().map(|&i| self.records[i].label).collect()
    }
}

/// Record indices grouped into batches. The training split is reshuffled
/// per epoch from `(seed, epoch)`; the test split keeps its order. The last
/// batch may be short.
pub fn batches(
    dataset: &AssayDataset,
    kind: SplitKind,
    batch_size: usize,
    seed: u64,
    epoch: u64,
) -> Vec<Vec<usize>> {
    assert!(batch_size > 0, "batch size must be positive");
    let mut idx = dataset.indices(kind).to_vec();
    if kind == SplitKind::Train {
        idx.shuffle(&mut rng::epoch_stream(seed, epoch));
    }
    idx.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub index: usize,
    pub smiles: String,
    pub reason: String,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestionReport {
    pub assay: String,
    /// Data rows in the file.
    pub rows: usize,
    /// Rows with a label for this assay.
    pub labeled: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub rejected_by_reason: BTreeMap<String, usize>,
    /// Rows skipped for a bad field count or label value.
    pub malformed: usize,
    pub positives: usize,
    pub negatives: usize,
}

fn parse_label(cell: &str) -> Result<Option<bool>, ()> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Ok(None);
    }
    match cell.parse::<f64>() {
        Ok(0.0) => Ok(Some(false)),
        Ok(1.0) => Ok(Some(true)),
        _ => Err(()),
    }
}

#[derive(Debug)]
pub struct Loaded {
    pub dataset: AssayDataset,
    pub report: IngestionReport,
    pub rejections: Vec<Rejection>,
}

/// Reads a Tox21 CSV file or a pre-encoded directory for one assay.
pub fn load_tox21(path: &Path, assay: &str, seed: u64) -> Result<Loaded, DataError> {
    let assay = canonical_assay(assay)?;
    if path.is_dir() {
        return load_encoded_dir(path, assay, seed);
    }
    let file = File::open(path).map_err(io_err(path))?;
    load_tox21_reader(BufReader::new(file), assay, seed)
}

pub fn load_tox21_reader<R: io::Read>(reader: R, assay: &str, seed: u64) -> Result<Loaded, DataError> {
    let assay = canonical_assay(assay)?;
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h.trim().eq_ignore_ascii_case(name));
    let smiles_col = find("smiles").ok_or_else(|| DataError::MissingColumn("smiles".into()))?;
    let label_col = find(assay).ok_or_else(|| DataError::MissingColumn(assay.into()))?;
    let id_col = find("mol_id").or_else(|| find("id"));

    let mut report = IngestionReport {
        assay: assay.to_string(),
        ..Default::default()
    };
    let mut pending = Vec::new();
    for (index, row) in rdr.records().enumerate() {
        report.rows += 1;
        let row = match row {
            Ok(r) if r.len() == headers.len() => r,
            _ => {
                report.malformed += 1;
                continue;
            }
        };
        let label = match parse_label(&row[label_col]) {
            Ok(Some(l)) => l,
            Ok(None) => continue,
            Err(()) => {
                report.malformed += 1;
                continue;
            }
        };
        report.labeled += 1;
        let id = id_col.map_or_else(|| index.to_string(), |c| row[c].to_string());
        pending.push((index, id, row[smiles_col].trim().to_string(), label));
    }

    let encoded: Vec<_> = pending
        .par_iter()
        .map(|(_, _, s, _)| smiles::encode(s))
        .collect();
    let mut records = Vec::new();
    let mut rejections = Vec::new();
    for ((index, id, s, label), result) in pending.into_iter().zip(encoded) {
        match result {
            Ok(grid) => records.push(Record {
                id,
                source_index: index,
                grid,
                label,
            }),
            Err(e) => {
                *report.rejected_by_reason.entry(e.reason().to_string()).or_insert(0) += 1;
                rejections.push(Rejection {
                    index,
                    smiles: s,
                    reason: e.reason().to_string(),
                    detail: e.to_string(),
                });
            }
        }
    }
    report.accepted = records.len();
    report.rejected = rejections.len();
    report.positives = records.iter().filter(|r| r.label).count();
    report.negatives = report.accepted - report.positives;
    Ok(Loaded {
        dataset: AssayDataset::new(assay, records, seed),
        report,
        rejections,
    })
}

pub fn grid_file(dir: &Path, assay: &str) -> PathBuf {
    dir.join(format!("{}.besg", assay.to_ascii_lowercase()))
}

pub fn labels_file(dir: &Path, assay: &str) -> PathBuf {
    dir.join(format!("{}.labels.csv", assay.to_ascii_lowercase()))
}

#[derive(Debug, Serialize, Deserialize)]
struct LabelRow {
    source_index: usize,
    id: String,
    label: u8,
}

/// Writes the packed grids and labels of `records` into `dir`.
pub fn write_encoded_dir(dir: &Path, assay: &str, records: &[Record]) -> Result<(), DataError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let grids: Vec<GridRecord> = records
        .iter()
        .map(|r| GridRecord {
            source_index: r.source_index as u64,
            grid: r.grid.clone(),
        })
        .collect();
    let gpath = grid_file(dir, assay);
    let f = File::create(&gpath).map_err(io_err(&gpath))?;
    smiles::write_grids(BufWriter::new(f), &grids).map_err(io_err(&gpath))?;
    let lpath = labels_file(dir, assay);
    let mut w = csv::Writer::from_path(&lpath)?;
    for r in records {
        w.serialize(LabelRow {
            source_index: r.source_index,
            id: r.id.clone(),
            label: u8::from(r.label),
        })?;
    }
    w.flush().map_err(io_err(&lpath))?;
    Ok(())
}

fn load_encoded_dir(dir: &Path, assay: &str, seed: u64) -> Result<Loaded, DataError> {
    let gpath = grid_file(dir, assay);
    let f = File::open(&gpath).map_err(io_err(&gpath))?;
    let grids = smiles::read_grids(BufReader::new(f)).map_err(io_err(&gpath))?;
    let lpath = labels_file(dir, assay);
    let labels: Vec<LabelRow> = csv::Reader::from_path(&lpath)?
        .deserialize()
        .collect::<Result<_, _>>()?;
    if labels.len() != grids.len() {
        return Err(DataError::Format(format!(
            "{} grids but {} labels",
            grids.len(),
            labels.len()
        )));
    }
    let mut records = Vec::with_capacity(grids.len());
    for (g, l) in grids.into_iter().zip(labels) {
        if g.source_index as usize != l.source_index || l.label > 1 {
            return Err(DataError::Format(format!("label row for index {} is inconsistent", l.source_index)));
        }
        records.push(Record {
            id: l.id,
            source_index: l.source_index,
            grid: g.grid,
            label: l.label == 1,
        });
    }
    let positives = records.iter().filter(|r| r.label).count();
    let report = IngestionReport {
        assay: assay.to_string(),
        rows: records.len(),
        labeled: records.len(),
        accepted: records.len(),
        positives,
        negatives: records.len() - positives,
        ..Default::default()
    };
    Ok(Loaded {
        dataset: AssayDataset::new(assay, records, seed),
        report,
        rejections: Vec::new(),
    })
}

/// One JSON object per line.
pub fn write_rejections(path: &Path, rejections: &[Rejection]) -> Result<(), DataError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    for r in rejections {
        let line = serde_json::to_string(r).expect("rejection serializes");
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_report(path: &Path, report: &IngestionReport) -> Result<(), DataError> {
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    std::fs::write(path, json + "\n").map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    const CSV: &str = "\
NR-AR,NR-AR-LBD,NR-AhR,NR-Aromatase,NR-ER,NR-ER-LBD,NR-PPAR-gamma,SR-ARE,SR-ATAD5,SR-HSE,SR-MMP,SR-p53,mol_id,smiles
0,0,1,0,0,0,0,0,0,0,0,0,TOX1,CCO
0,0,0.0,0,0,0,0,0,0,0,0,0,TOX2,c1ccccc1
0,0,,0,0,0,0,0,0,0,0,0,TOX3,CC(=O)O
0,0,1.0,0,0,0,0,0,0,0,0,0,TOX4,[2H]O[2H]
0,0,0,0,0,0,0,0,0,0,0,0,TOX5,C(C)(C)(C)(C)C
0,0,x,0,0,0,0,0,0,0,0,0,TOX6,CC
0,0,1
";

    #[test]
    fn loads_filters_and_reports() {
        let loaded = load_tox21_reader(CSV.as_bytes(), "nr-ahr", 0).unwrap();
        let r = &loaded.report;
        assert_eq!(r.assay, "NR-AhR");
        assert_eq!(r.rows, 7);
        assert_eq!(r.malformed, 2);
        assert_eq!(r.labeled, 4);
        assert_eq!(r.accepted + r.rejected, r.labeled);
        assert_eq!(r.accepted, 2);
        assert_eq!(r.rejected_by_reason["deuterium"], 1);
        assert_eq!(r.rejected_by_reason["invalid_valence"], 1);
        assert_eq!(loaded.rejections[0].index, 3);
        assert_eq!(loaded.rejections[0].smiles, "[2H]O[2H]");
        let ids: Vec<_> = loaded.dataset.records.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, vec!["TOX1", "TOX2"]);
        assert!(loaded.dataset.records[0].label);
    }

    #[test]
    fn unknown_assay_and_missing_column() {
        assert!(matches!(
            load_tox21_reader(CSV.as_bytes(), "nr-xyz", 0),
            Err(DataError::UnknownAssay(_))
        ));
        assert!(matches!(
            load_tox21_reader("a,NR-AhR\n1,0\n".as_bytes(), "NR-AhR", 0),
            Err(DataError::MissingColumn(_))
        ));
        assert!(load_tox21(Path::new("/nonexistent/tox21.csv"), "SR-p53", 0).is_err());
    }

    #[test]
    fn split_sizes_and_determinism() {
        let s = Split::new(10, 5);
        assert_eq!((s.train.len(), s.test.len()), (8, 2));
        assert_eq!(s, Split::new(10, 5));
        let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(Split::new(7, 0).train.len(), 6);
        assert_eq!(Split::new(0, 0).train.len(), 0);
    }

    fn toy_dataset(n: usize) -> AssayDataset {
        let records = (0..n)
            .map(|i| Record {
                id: i.to_string(),
                source_index: i,
                grid: BesGrid::empty(),
                label: i % 2 == 0,
            })
            .collect();
        let mut ds = AssayDataset::new("NR-AhR", records, 0);
        ds.split = Split {
            train: (0..n).collect(),
            test: (0..n).collect(),
        };
        ds
    }

    #[test]
    fn batch_sizes_and_shuffles() {
        let ds = toy_dataset(10);
        let b = batches(&ds, SplitKind::Train, 4, 1, 0);
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 4, 2]);
        assert_eq!(b, batches(&ds, SplitKind::Train, 4, 1, 0));
        assert_ne!(b, batches(&ds, SplitKind::Train, 4, 1, 1));
        let t = batches(&ds, SplitKind::Test, 4, 1, 0);
        assert_eq!(t.concat(), (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn encoded_dir_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let loaded = load_tox21_reader(CSV.as_bytes(), "NR-AhR", 3).unwrap();
        write_encoded_dir(dir.path(), "NR-AhR", &loaded.dataset.records).unwrap();
        let again = load_tox21(dir.path(), "nr-ahr", 3).unwrap();
        assert_eq!(again.dataset.records, loaded.dataset.records);
        assert_eq!(again.dataset.split, loaded.dataset.split);
        let rej = dir.path().join("rejections.jsonl");
        write_rejections(&rej, &loaded.rejections).unwrap();
        let text = std::fs::read_to_string(&rej).unwrap();
        let first: Rejection = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(first.reason, "deuterium");
    }
}
