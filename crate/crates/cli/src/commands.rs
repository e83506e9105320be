use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use molgen::checkpoint::{config_digest, Checkpoint, ModelKind};
use molgen::chem::{parse_smiles, write_smiles, Molecule};
use molgen::data::{filter_for_molgan, load_smiles_file, subsample};
use molgen::metrics::{canonical_key, is_valid, render_text, with_mean, GenerationReport, ReportRow};
use molgen::molgan::{featurize_all, predict_generator, StopReason, TrainOptions, Trainer};
use molgen::nflow::{encode_molecules, generate_molecules, FlowConfig, FlowData, FlowModel, FlowTrainer};
use molgen::rng::{stream, streams};
use serde_json::json;

use crate::config::{parse_config, ModelChoice, RunConfig};

/// Failure classes mapped to process exit codes.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

type CmdResult<T> = Result<T, Failure>;

fn header(command: &str, model: &str, seed: u64, digest: &str) -> String {
    format!("# molgen {command}\n# model: {model}\n# seed: {seed}\n# config_digest: {digest}\n")
}

fn write_file(path: &Path, content: &str) -> anyhow::Result<()> {
    fs::write(path, content).with_context(|| format!("writing {}", path.display()))
}

pub struct TrainArgs {
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

pub fn train(args: &TrainArgs) -> CmdResult<PathBuf> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| Failure::Config(format!("reading {}: {e}", args.config.display())))?;
    let mut cfg = parse_config(&text, &args.config).map_err(Failure::Config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = &args.out {
        cfg.output_dir = o.clone();
    }
    fs::create_dir_all(&cfg.output_dir).with_context(|| format!("creating {}", cfg.output_dir.display()))?;
    let loaded = load_smiles_file(&cfg.dataset.path, cfg.dataset.column.as_deref()).context("loading dataset")?;
    log::info!("loaded {} molecules ({} dropped)", loaded.dataset.len(), loaded.dropped);
    match cfg.model {
        ModelChoice::Molgan => train_molgan(&cfg, loaded.dataset),
        ModelChoice::Nflow => train_nflow(&cfg, loaded.dataset),
    }
}

fn echo_config(cfg: &RunConfig, digest: &str) -> anyhow::Result<()> {
    let echo = json!({ "config_digest": digest, "seed": cfg.seed, "epochs": cfg.epochs(), "config": cfg });
    write_file(&cfg.output_dir.join("config.json"), &serde_json::to_string_pretty(&echo)?)
}

fn train_molgan(cfg: &RunConfig, ds: molgen::data::MoleculeDataset) -> CmdResult<PathBuf> {
    let digest = config_digest(&cfg.molgan);
    echo_config(cfg, &digest)?;
    let mut ds = filter_for_molgan(&ds, &cfg.molgan.spec);
    if let Some(k) = cfg.dataset.subsample {
        ds = subsample(&ds, k, cfg.seed).context("subsampling")?;
    }
    let data = featurize_all(&ds.molecules, &cfg.molgan);
    log::info!("training molgan on {} graphs", data.len());
    let mut trainer = Trainer::new(cfg.molgan.clone(), cfg.seed).map_err(|e| Failure::Config(e.to_string()))?;
    let options = TrainOptions {
        epochs: cfg.epochs(),
        max_steps: cfg.max_steps,
        early_stopping: cfg.early_stopping,
        checkpoint_interval: cfg.checkpoint_interval,
    };
    let dir = cfg.output_dir.clone();
    let result = trainer.fit(&data, &options, &mut |t| {
        Checkpoint::from_molgan(t)
            .save(&dir.join(format!("checkpoint-{}.json", t.step)))
            .map_err(|e| molgen::molgan::MolganError::Checkpoint(e.to_string()))
    });
    let mut history = header("train", "molgan", cfg.seed, &digest);
    history.push_str("step,epoch,d_loss,wasserstein,penalty,g_loss\n");
    for r in &trainer.history {
        let g = r.g_loss.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(history, "{},{},{},{},{},{}", r.step, r.epoch, r.d_loss, r.wasserstein, r.penalty, g);
    }
    write_file(&dir.join("history.csv"), &history)?;
    let reason = result.map_err(|e| anyhow!(e))?;
    if let StopReason::EarlyStopped { step, uniqueness } = reason {
        log::warn!("early stop at step {step}: uniqueness {uniqueness:.2}%");
    }
    let path = dir.join("checkpoint.json");
    Checkpoint::from_molgan(&trainer).save(&path).map_err(|e| anyhow!(e))?;
    Ok(path)
}

fn train_nflow(cfg: &RunConfig, ds: molgen::data::MoleculeDataset) -> CmdResult<PathBuf> {
    let flow_cfg = FlowConfig { epochs: cfg.epochs(), ..cfg.nflow.clone() };
    let digest = config_digest(&flow_cfg);
    echo_config(cfg, &digest)?;
    let mut ds = ds;
    if let Some(k) = cfg.dataset.subsample {
        ds = subsample(&ds, k, cfg.seed).context("subsampling")?;
    }
    let encoded = encode_molecules(&ds.molecules, flow_cfg.fixed_length);
    log::info!(
        "{} sequences of length {} ({} skipped)",
        encoded.sequences.len(),
        encoded.fixed_length,
        encoded.skipped
    );
    let flow_cfg = FlowConfig { fixed_length: Some(encoded.fixed_length), ..flow_cfg };
    let model = FlowModel::from_config(&flow_cfg, encoded.fixed_length, &mut stream(cfg.seed, streams::INIT))
        .map_err(|e| Failure::Config(e.to_string()))?;
    let mut trainer = FlowTrainer::new(model, &flow_cfg, cfg.seed).map_err(|e| Failure::Config(e.to_string()))?;
    let data = FlowData::Indices(encoded.sequences);
    let dir = cfg.output_dir.clone();
    let mut outcome = Ok(());
    for epoch in 1..=flow_cfg.epochs {
        if let Err(e) = trainer.fit(&data, epoch) {
            outcome = Err(e);
            break;
        }
        if cfg.checkpoint_interval.is_some_and(|i| epoch % i == 0) {
            Checkpoint::from_flow(&trainer, &flow_cfg)
                .save(&dir.join(format!("checkpoint-{epoch}.json")))
                .map_err(|e| anyhow!(e))?;
        }
    }
    let mut history = header("train", "nflow", cfg.seed, &digest);
    history.push_str("epoch,nll\n");
    for (e, nll) in trainer.history.iter().enumerate() {
        let _ = writeln!(history, "{e},{nll}");
    }
    write_file(&dir.join("history.csv"), &history)?;
    outcome.map_err(|e| anyhow!(e))?;
    let path = dir.join("checkpoint.json");
    Checkpoint::from_flow(&trainer, &flow_cfg).save(&path).map_err(|e| anyhow!(e))?;
    Ok(path)
}

fn load_checkpoint(path: &Path) -> anyhow::Result<Checkpoint> {
    Checkpoint::load(path).map_err(|e| anyhow!("{}: {e}", path.display()))
}

fn sample_molecules(ckpt: &Checkpoint, count: usize, seed: u64) -> anyhow::Result<Vec<Molecule>> {
    let mut rng = stream(seed, streams::GENERATE);
    Ok(match ckpt.model {
        ModelKind::Molgan => predict_generator(&ckpt.to_molgan()?.model, count, &mut rng)?,
        ModelKind::Nflow => generate_molecules(&ckpt.to_flow()?.0.model, count, &mut rng)?,
    })
}

fn graph_dump(m: &Molecule) -> String {
    let atoms: Vec<&str> = m.atoms().iter().map(|a| a.symbol()).collect();
    let bonds: Vec<String> = m.bonds().iter().map(|b| format!("{}-{}:{}", b.i, b.j, b.order.value())).collect();
    format!("atoms={} bonds={}", atoms.join(","), bonds.join(","))
}

pub fn generate(checkpoint: &Path, count: usize, seed: Option<u64>, out: &Path) -> CmdResult<()> {
    let ckpt = load_checkpoint(checkpoint)?;
    let seed = seed.unwrap_or(ckpt.seed);
    let mols = sample_molecules(&ckpt, count, seed)?;
    let mut text = header("generate", &ckpt.model.to_string(), seed, &ckpt.config_digest);
    for m in &mols {
        if is_valid(m) {
            text.push_str(&canonical_key(m));
        } else {
            let _ = write!(text, "INVALID:{} {}", write_smiles(m), graph_dump(m));
        }
        text.push('\n');
    }
    write_file(out, &text)?;
    Ok(())
}

/// Molecules and header fields of a generated file. `INVALID:` lines and unparseable lines
/// come back as empty molecules, which count as invalid.
pub fn read_generated(path: &Path) -> anyhow::Result<(Vec<Molecule>, Option<u64>, Option<String>)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut seed = None;
    let mut digest = None;
    let mut mols = Vec::new();
    for line in text.lines() {
        if let Some(h) = line.strip_prefix('#') {
            if let Some(v) = h.trim().strip_prefix("seed:") {
                seed = v.trim().parse().ok();
            } else if let Some(v) = h.trim().strip_prefix("config_digest:") {
                digest = Some(v.trim().to_string());
            }
            continue;
        }
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with("INVALID:") {
            mols.push(Molecule::empty());
        } else {
            mols.push(parse_smiles(line.split_whitespace().next().unwrap_or("")).unwrap_or_else(|_| Molecule::empty()));
        }
    }
    Ok((mols, seed, digest))
}

pub struct EvaluateArgs {
    pub generated: Vec<PathBuf>,
    pub training: PathBuf,
    pub column: Option<String>,
    pub checkpoint: Option<PathBuf>,
    pub seeds: Vec<u64>,
    pub count: usize,
    pub out: Option<PathBuf>,
}

pub fn evaluate(args: &EvaluateArgs) -> CmdResult<Vec<ReportRow>> {
    if args.generated.is_empty() && args.checkpoint.is_none() {
        return Err(Failure::Config("evaluate needs generated files or --checkpoint".into()));
    }
    if args.checkpoint.is_some() && args.seeds.is_empty() {
        return Err(Failure::Config("--checkpoint needs --seeds".into()));
    }
    let training = load_smiles_file(&args.training, args.column.as_deref()).context("loading training set")?;
    let train_set: HashSet<String> = training.dataset.canonical_set;
    let mut rows = Vec::new();
    let mut digests = Vec::new();
    for path in &args.generated {
        let (mols, seed, digest) = read_generated(path)?;
        digests.extend(digest);
        rows.push(GenerationReport::evaluate(&mols, &train_set, seed).row(&path.display().to_string()));
    }
    if let Some(ck) = &args.checkpoint {
        let ckpt = load_checkpoint(ck)?;
        digests.push(ckpt.config_digest.clone());
        for &seed in &args.seeds {
            let mols = sample_molecules(&ckpt, args.count, seed)?;
            rows.push(GenerationReport::evaluate(&mols, &train_set, Some(seed)).row(&format!("seed {seed}")));
        }
    }
    let rows = with_mean(rows);
    digests.dedup();
    let text = format!(
        "# training set: {}\n# config_digest: {}\n{}",
        args.training.display(),
        digests.join(","),
        render_text(&rows)
    );
    print!("{text}");
    if let Some(out) = &args.out {
        write_file(&out.with_extension("txt"), &text)?;
        let doc = json!({
            "schema": "molgen-report/1",
            "training_set": args.training.display().to_string(),
            "config_digests": digests,
            "denominators": { "validity": "generated", "uniqueness": "valid", "novelty": "valid" },
            "rows": rows,
        });
        write_file(&out.with_extension("json"), &serde_json::to_string_pretty(&doc).map_err(|e| anyhow!(e))?)?;
    }
    Ok(rows)
}

pub fn inspect(path: &Path) -> CmdResult<String> {
    let c = load_checkpoint(path)?;
    let mut s = String::new();
    let total: usize = c.tensors.iter().map(|t| t.data.len()).sum();
    let _ = writeln!(s, "format: {} v{}", c.format, c.version);
    let _ = writeln!(s, "model: {}", c.model);
    let _ = writeln!(s, "seed: {}", c.seed);
    let _ = writeln!(s, "step: {}", c.step);
    let _ = writeln!(s, "config_digest: {}", c.config_digest);
    let _ = writeln!(s, "parameters: {total} in {} tensors", c.tensors.len());
    for t in &c.tensors {
        let _ = writeln!(s, "  {} {:?}", t.name, t.shape);
    }
    for o in &c.optimizers {
        let _ = writeln!(s, "optimizer {}: {} steps, rate {:e}", o.name, o.adam.step, o.adam.current_rate());
    }
    let _ = writeln!(s, "config: {}", serde_json::to_string(&c.config).map_err(|e| anyhow!(e))?);
    Ok(s)
}
