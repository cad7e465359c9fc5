use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qcnn::ansatz::AnsatzParams;
use qcnn::config::Config;
use qcnn::data::{self, AssayDataset, SplitKind};
use qcnn::metrics::{read_curve, CurveLogger, Phase};
use qcnn::model::{Checkpoint, Model};
use qcnn::qconv;
use qcnn::qsim::{resource_count, Algorithm};
use qcnn::smiles::{self, BesGrid, GRID_COLS, GRID_ROWS};
use qcnn::train::{self, TrainOptions};
use qcnn::transfer;
use qcnn::verify::{self, VerifyOptions};

#[derive(Parser)]
#[command(name = "qcnn", version, about = "Hybrid quantum-classical CNN for Tox21 toxicity prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// Key-value config file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set epochs=5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Test,
}

#[derive(Subcommand)]
enum Command {
    /// Encode SMILES into 400x57 grids.
    Encode {
        /// Print the set columns of every row for one SMILES string.
        #[arg(long, conflicts_with = "input")]
        smiles: Option<String>,
        /// Tox21 CSV to encode for one assay.
        #[arg(long, requires = "out")]
        input: Option<PathBuf>,
        #[arg(long, default_value = "NR-AhR")]
        assay: String,
        /// Output directory for the packed grids, labels and reports.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a model from scratch.
    Train(ConfigArgs),
    /// Convert a quantum checkpoint to the classical model and keep training.
    Transfer {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Like `transfer`, but with a randomly initialized classical filter.
    Ablate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Evaluate a checkpoint on one split.
    Eval {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        /// Also write `id,label,prediction` rows here.
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Run the oracle suite.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Mutation fixture that must make the circuit checks fail.
        #[arg(long, hide = true)]
        perturb_rot_sign: bool,
    },
    /// Resource counts per algorithm and dedup vs naive timing.
    Bench {
        /// Largest register size for the resource table.
        #[arg(long, default_value_t = 6)]
        max_qubits: usize,
        /// Fraction of grid cells set in the random benchmark grid.
        #[arg(long, default_value_t = 0.5)]
        density: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load_config(args: &ConfigArgs) -> Result<Config> {
    let mut cfg = match &args.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    cfg.apply_env()?;
    cfg.apply_overrides(&args.overrides)?;
    if cfg.threads > 0 {
        // Fails only if a pool already exists, which is harmless here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global();
    }
    Ok(cfg)
}

/// Loads the dataset and writes the ingestion report and rejection log
/// into the run directory.
fn load_dataset(cfg: &Config) -> Result<AssayDataset> {
    let loaded = data::load_tox21(&cfg.data, &cfg.assay, cfg.split_seed)
        .with_context(|| format!("loading {}", cfg.data.display()))?;
    data::write_report(&cfg.run_dir.join("ingestion_report.json"), &loaded.report)?;
    data::write_rejections(&cfg.run_dir.join("rejections.jsonl"), &loaded.rejections)?;
    eprintln!(
        "{}: {} accepted, {} rejected, {} train / {} test",
        loaded.report.assay,
        loaded.report.accepted,
        loaded.report.rejected,
        loaded.dataset.split.train.len(),
        loaded.dataset.split.test.len()
    );
    Ok(loaded.dataset)
}

fn prepare_run_dir(cfg: &Config) -> Result<PathBuf> {
    let ckpt_dir = cfg.run_dir.join("checkpoints");
    std::fs::create_dir_all(&ckpt_dir)
        .with_context(|| format!("creating {}", ckpt_dir.display()))?;
    std::fs::write(cfg.run_dir.join("config.txt"), cfg.to_text())?;
    Ok(ckpt_dir)
}

fn print_epoch(r: &qcnn::metrics::EpochRecord) {
    let auc = |a: Option<f64>| a.map_or("n/a".to_string(), |v| format!("{v:.4}"));
    eprintln!(
        "epoch {:>3} [{}] train_loss {:.5} test_loss {:.5} train_auc {} test_auc {} ({:.1}s)",
        r.epoch,
        r.phase.as_str(),
        r.train_loss,
        r.test_loss,
        auc(r.train_auc),
        auc(r.test_auc),
        r.wall_time
    );
}

fn cmd_train(args: &ConfigArgs) -> Result<()> {
    let cfg = load_config(args)?;
    let ckpt_dir = prepare_run_dir(&cfg)?;
    let ds = load_dataset(&cfg)?;
    let spec = cfg.model_spec();
    let model = Model::init(spec.clone(), cfg.seed)?;
    eprintln!("model {}: {} parameters", spec.variant.as_str(), model.param_count());
    let mut ck = Checkpoint::new(model, cfg.seed);
    ck.optimizer.config.lr = cfg.lr;
    let phase = match spec.variant {
        qcnn::model::Variant::Qnn => Phase::Quantum,
        qcnn::model::Variant::Cnn => Phase::Classical,
    };
    ck.save(&train::checkpoint_path(&ckpt_dir, phase, 0))?;
    let mut logger = CurveLogger::create(&cfg.run_dir.join("metrics.csv"))?;
    let opts = TrainOptions {
        until_epoch: cfg.epochs,
        batch_size: cfg.batch_size,
        shuffle_seed: cfg.shuffle_seed,
        phase,
        checkpoint_dir: Some(ckpt_dir),
    };
    train::train(&mut ck, &ds, &opts, Some(&mut logger), print_epoch)?;
    Ok(())
}

fn cmd_continue(args: &ConfigArgs, checkpoint: &Path, phase: Phase) -> Result<()> {
    let cfg = load_config(args)?;
    let ckpt_dir = prepare_run_dir(&cfg)?;
    let source = Checkpoint::load(checkpoint)
        .with_context(|| format!("reading {}", checkpoint.display()))?;
    let mut ck = match phase {
        Phase::Ablation => transfer::ablate_checkpoint(&source, cfg.ablation_seed)?,
        _ => transfer::transfer_checkpoint(&source)?,
    };
    let ds = load_dataset(&cfg)?;

    let test = ds.grids(SplitKind::Test);
    let before = source.model.predict(&test)?;
    let after = ck.model.predict(&test)?;
    let max_diff = before
        .iter()
        .zip(&after)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    eprintln!(
        "{} at epoch {}: {} -> {} parameters, max test prediction change {max_diff:.3e}",
        phase.as_str(),
        ck.epoch,
        source.model.param_count(),
        ck.model.param_count()
    );

    // Carry the source run's curve up to the switch so this run's CSV is
    // complete, then continue it.
    let metrics = cfg.run_dir.join("metrics.csv");
    let prior = checkpoint
        .parent()
        .and_then(Path::parent)
        .map(|d| d.join("metrics.csv"))
        .filter(|p| p.exists())
        .map(|p| read_curve(&p))
        .transpose()?
        .unwrap_or_default();
    let mut logger = CurveLogger::create(&metrics)?;
    for r in prior.iter().filter(|r| r.epoch <= ck.epoch) {
        logger.log(r)?;
    }
    let opts = TrainOptions {
        until_epoch: cfg.epochs,
        batch_size: cfg.batch_size,
        shuffle_seed: cfg.shuffle_seed,
        phase,
        checkpoint_dir: Some(ckpt_dir),
    };
    train::train(&mut ck, &ds, &opts, Some(&mut logger), print_epoch)?;
    Ok(())
}

fn cmd_eval(args: &ConfigArgs, checkpoint: &Path, split: SplitArg, out: Option<&Path>) -> Result<()> {
    let cfg = load_config(args)?;
    let ck = Checkpoint::load(checkpoint)?;
    let loaded = data::load_tox21(&cfg.data, &cfg.assay, cfg.split_seed)?;
    let ds = loaded.dataset;
    let kind = match split {
        SplitArg::Train => SplitKind::Train,
        SplitArg::Test => SplitKind::Test,
    };
    let eval = train::evaluate_split(&ck.model, &ds, kind)?;
    if let Some(path) = out {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["id", "label", "prediction"])?;
        for (&i, p) in ds.indices(kind).iter().zip(&eval.predictions) {
            let r = &ds.records[i];
            w.write_record([r.id.clone(), u8::from(r.label).to_string(), format!("{p:.17e}")])?;
        }
        w.flush()?;
    }
    let summary = serde_json::json!({
        "assay": ds.assay,
        "variant": ck.model.spec().variant,
        "epoch": ck.epoch,
        "split": match split { SplitArg::Train => "train", SplitArg::Test => "test" },
        "n": eval.predictions.len(),
        "loss": eval.loss,
        "auc": eval.auc,
    });
    println!("{summary}");
    Ok(())
}

fn cmd_encode(smiles_arg: Option<&str>, input: Option<&Path>, assay: &str, out: Option<&Path>) -> Result<()> {
    if let Some(s) = smiles_arg {
        let grid = smiles::encode(s)?;
        for r in 0..grid.length() {
            let cols: Vec<usize> = (0..GRID_COLS).filter(|&c| grid.get(r, c)).collect();
            let ch = s.as_bytes()[r] as char;
            println!("{r:>3} {ch} {cols:?}");
        }
        return Ok(());
    }
    let (Some(input), Some(out)) = (input, out) else {
        bail!("either --smiles or --input with --out is required");
    };
    let loaded = data::load_tox21(input, assay, 0)?;
    data::write_encoded_dir(out, assay, &loaded.dataset.records)?;
    data::write_report(&out.join("ingestion_report.json"), &loaded.report)?;
    data::write_rejections(&out.join("rejections.jsonl"), &loaded.rejections)?;
    println!("{}", serde_json::to_string(&loaded.report)?);
    Ok(())
}

fn cmd_verify(seed: u64, perturb_rot_sign: bool) -> Result<bool> {
    let start = Instant::now();
    let report = verify::run(&VerifyOptions {
        seed,
        perturb_rot_sign,
    });
    print!("{report}");
    println!("{} in {:.2}s", if report.all_passed() { "all checks passed" } else { "FAILED" }, start.elapsed().as_secs_f64());
    Ok(report.all_passed())
}

fn cmd_bench(max_qubits: usize, density: f64, seed: u64) -> Result<()> {
    println!("kind,n,qubits,two_qubit_gates,circuit_evaluations,inner_products,seconds");
    for n in 1..=max_qubits {
        let h = resource_count(n, Algorithm::Hadamard { layers: 3 });
        let s = resource_count(n, Algorithm::Swap);
        println!("hadamard,{n},{},{},,,", h.qubits, h.two_qubit_gate_count);
        println!("swap,{n},{},{},,,", s.qubits, s.two_qubit_gate_count);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut grid = BesGrid::empty();
    for r in 0..GRID_ROWS {
        for c in 0..GRID_COLS {
            if rng.gen_bool(density.clamp(0.0, 1.0)) {
                grid.set(r, c, true);
            }
        }
    }
    let theta = AnsatzParams::random(3, 2, &mut rng);
    // Best of several warm runs.
    let time = |f: &dyn Fn() -> Result<qconv::QconvOutput, qconv::QconvError>| -> Result<(qconv::QconvOutput, f64)> {
        let mut best = f64::INFINITY;
        let mut out = f()?;
        for _ in 0..5 {
            let t = Instant::now();
            out = f()?;
            best = best.min(t.elapsed().as_secs_f64());
        }
        Ok((out, best))
    };
    let (fast, fast_s) = time(&|| qconv::qconv_forward(&grid, &theta, 0.0))?;
    let (naive, naive_s) = time(&|| qconv::qconv_forward_naive(&grid, &theta, 0.0))?;
    if fast.output != naive.output {
        bail!("dedup and naive outputs differ");
    }
    println!("dedup,2,3,,{},{},{fast_s:.6}", fast.circuit_evaluations, fast.inner_products);
    println!("naive,2,3,,{},{},{naive_s:.6}", naive.circuit_evaluations, naive.inner_products);
    eprintln!("dedup speedup: {:.0}x", naive_s / fast_s.max(1e-9));
    Ok(())
}

fn error_kind(e: &anyhow::Error) -> &'static str {
    for cause in e.chain() {
        if cause.is::<qcnn::config::ConfigError>() {
            return "config";
        }
        if cause.is::<qcnn::data::DataError>() {
            return "data";
        }
        if cause.is::<qcnn::model::ModelError>() {
            return "checkpoint";
        }
        if cause.is::<smiles::SmilesError>() {
            return "smiles";
        }
        if cause.is::<std::io::Error>() {
            return "io";
        }
    }
    "runtime"
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Encode {
            smiles,
            input,
            assay,
            out,
        } => cmd_encode(smiles.as_deref(), input.as_deref(), assay, out.as_deref()).map(|_| true),
        Command::Train(args) => cmd_train(args).map(|_| true),
        Command::Transfer { cfg, checkpoint } => cmd_continue(cfg, checkpoint, Phase::Classical).map(|_| true),
        Command::Ablate { cfg, checkpoint } => cmd_continue(cfg, checkpoint, Phase::Ablation).map(|_| true),
        Command::Eval {
            cfg,
            checkpoint,
            split,
            predictions,
        } => cmd_eval(cfg, checkpoint, *split, predictions.as_deref()).map(|_| true),
        Command::Verify {
            seed,
            perturb_rot_sign,
        } => cmd_verify(*seed, *perturb_rot_sign),
        Command::Bench {
            max_qubits,
            density,
            seed,
        } => cmd_bench(*max_qubits, *density, *seed).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            let msg = serde_json::json!({
                "error": error_kind(&e),
                "message": format!("{e:#}"),
            });
            eprintln!("{msg}");
            ExitCode::FAILURE
        }
    }
}
