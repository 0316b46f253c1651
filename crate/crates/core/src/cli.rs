//! Command-line front end: `generate`, `train`, `eval`, `stability`, `risk`
//! and `sweep`. Every command writes `manifest.json` into its output
//! directory before doing any work.
//!
//! Exit codes: 0 success, 2 usage/config/I-O error, 3 numeric failure.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::Serialize;

use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::contrastive::{estimate_similar_set, sample_negatives, RiskReport, SimilarityCriterion};
use crate::dataset::{
    generate_sbm, load_dataset, read_labels, write_edge_list, write_features_binary, write_features_csv,
    write_labels, write_split_file, Dataset, SbmConfig, SplitSpec,
};
use crate::encoder::EncoderParams;
use crate::error::{Error, Result};
use crate::eval::{embed_full, linear_probe, silhouette, stability_matrices, ProbeConfig};
use crate::rng::{stream_rng, Stream};
use crate::trainer::{train_with_observer, IterationStats, TrainConfig, TrainObserver, TrainReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "cgnn", version, about = "Contrastive graph neural networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a stochastic block model dataset.
    Generate(GenerateArgs),
    /// Train an encoder with the NCE objective.
    Train(TrainArgs),
    /// Linear-probe and silhouette metrics for a checkpoint.
    Eval(EvalArgs),
    /// Cosine-similarity matrices of node embeddings under edge dropping.
    Stability(StabilityArgs),
    /// Fraction of sampled negatives that are similar to their anchor.
    Risk(RiskArgs),
    /// Train over a grid of one hyperparameter.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 3)]
    pub blocks: usize,
    #[arg(long, default_value_t = 100)]
    pub nodes_per_block: usize,
    #[arg(long, default_value_t = 0.1)]
    pub p_in: f64,
    #[arg(long, default_value_t = 0.01)]
    pub p_out: f64,
    #[arg(long, default_value_t = 16)]
    pub feature_dim: usize,
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Write features as CSV instead of the binary format.
    #[arg(long)]
    pub csv: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Directory written by `generate`; supplies any of the paths below that are omitted.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub edges: Option<PathBuf>,
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// `per-class:TRAIN,VAL`, `file:PATH` or `files:TRAIN,VAL,TEST`.
    #[arg(long, default_value = "per-class:20,30")]
    pub splits: String,
}

#[derive(Debug, Clone, Default, Args)]
pub struct HyperArgs {
    /// Flat `key = value` file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub arch: Option<String>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub eval_every: Option<usize>,
    /// Sequential kernels with bitwise-reproducible output.
    #[arg(long)]
    pub deterministic: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, required_unless_present = "raw_features")]
    pub checkpoint: Option<PathBuf>,
    /// Probe the raw feature matrix instead of embeddings.
    #[arg(long)]
    pub raw_features: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StabilityArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Comma-separated node ids.
    #[arg(long, conflicts_with = "sample")]
    pub nodes: Option<String>,
    /// Number of nodes to sample uniformly instead of `--nodes`.
    #[arg(long)]
    pub sample: Option<usize>,
    #[arg(long, default_value_t = 0.3)]
    pub rho: f64,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RiskArgs {
    /// Label file: similar nodes are those sharing the anchor's label.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Checkpoint for cosine mode; needs `--threshold`, `--edges`, `--features`.
    #[arg(long, conflicts_with = "labels", requires = "threshold")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub edges: Option<PathBuf>,
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    pub k: usize,
    /// Number of anchors drawn uniformly.
    #[arg(long, default_value_t = 100)]
    pub anchors: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepParam {
    Rho,
    Tau,
    K,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[arg(long, value_enum)]
    pub param: SweepParam,
    /// Comma-separated grid values.
    #[arg(long)]
    pub values: String,
    /// Grid points trained concurrently.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_numeric() {
        EXIT_NUMERIC
    } else {
        EXIT_USAGE
    }
}

pub fn execute(command: &Command) -> Result<()> {
    match command {
        Command::Generate(a) => cmd_generate(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Stability(a) => cmd_stability(a),
        Command::Risk(a) => cmd_risk(a),
        Command::Sweep(a) => cmd_sweep(a),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: BTreeMap<String, String>,
    pub seed: u64,
    pub build: String,
    pub started_unix_s: u64,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    fn new(command: &str, seed: u64, config: BTreeMap<String, String>, out: &Path, files: &[&str]) -> Self {
        Self {
            command: command.into(),
            config,
            seed,
            build: format!("cgnn {}", env!("CARGO_PKG_VERSION")),
            started_unix_s: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            outputs: files.iter().map(|f| out.join(f)).collect(),
        }
    }

    fn write(&self, out: &Path) -> Result<()> {
        create_dir(out)?;
        write_json(&out.join("manifest.json"), self)
    }
}

/// Metrics file shared by `train`, `eval` and sweep points.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Metrics {
    pub accuracy: Option<f64>,
    pub silhouette: Option<f64>,
    pub loss_final: Option<f64>,
    pub mi_bound_final: Option<f64>,
    pub wall_time_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub val_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_class_accuracy: Option<Vec<Option<f64>>>,
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub const EDGE_FILE: &str = "edges.txt";
pub const FEATURE_FILE: &str = "features.bin";
pub const FEATURE_CSV_FILE: &str = "features.csv";
pub const LABEL_FILE: &str = "labels.txt";
pub const SPLIT_FILE: &str = "splits.txt";

fn cmd_generate(a: &GenerateArgs) -> Result<()> {
    let cfg = SbmConfig {
        num_blocks: a.blocks,
        nodes_per_block: a.nodes_per_block,
        p_in: a.p_in,
        p_out: a.p_out,
        feature_dim: a.feature_dim,
        feature_noise: a.noise,
        seed: a.seed,
    };
    let feature_file = if a.csv { FEATURE_CSV_FILE } else { FEATURE_FILE };
    let mut config = BTreeMap::new();
    for (k, v) in [
        ("blocks", a.blocks.to_string()),
        ("nodes_per_block", a.nodes_per_block.to_string()),
        ("p_in", a.p_in.to_string()),
        ("p_out", a.p_out.to_string()),
        ("feature_dim", a.feature_dim.to_string()),
        ("noise", a.noise.to_string()),
    ] {
        config.insert(k.to_string(), v);
    }
    let dataset = generate_sbm(&cfg)?;
    RunManifest::new("generate", a.seed, config, &a.out, &[EDGE_FILE, feature_file, LABEL_FILE, SPLIT_FILE])
        .write(&a.out)?;
    write_edge_list(&a.out.join(EDGE_FILE), &dataset.graph)?;
    if a.csv {
        write_features_csv(&a.out.join(feature_file), &dataset.features)?;
    } else {
        write_features_binary(&a.out.join(feature_file), &dataset.features)?;
    }
    write_labels(&a.out.join(LABEL_FILE), &dataset.labels)?;
    write_split_file(&a.out.join(SPLIT_FILE), &dataset.splits)?;
    log::info!("wrote {} nodes to {}", dataset.num_nodes(), a.out.display());
    Ok(())
}

impl DataArgs {
    fn resolve(&self, explicit: &Option<PathBuf>, names: &[&str]) -> Result<PathBuf> {
        if let Some(p) = explicit {
            return Ok(p.clone());
        }
        if let Some(dir) = &self.data {
            for name in names {
                let p = dir.join(name);
                if p.exists() {
                    return Ok(p);
                }
            }
        }
        match &self.data {
            Some(dir) => Err(Error::arg(format!("{} has no {}", dir.display(), names.join(" or ")))),
            None => Err(Error::arg(format!("no path given for {}", names[0]))),
        }
    }

    fn paths(&self) -> Result<(PathBuf, PathBuf, PathBuf)> {
        Ok((
            self.resolve(&self.edges, &[EDGE_FILE])?,
            self.resolve(&self.features, &[FEATURE_FILE, FEATURE_CSV_FILE])?,
            self.resolve(&self.labels, &[LABEL_FILE])?,
        ))
    }

    fn split_spec(&self) -> Result<SplitSpec> {
        SplitSpec::from_str(&self.splits)
    }

    pub fn load(&self) -> Result<Dataset> {
        let (e, f, l) = self.paths()?;
        load_dataset(&e, &f, &l, &self.split_spec()?)
    }

    fn describe(&self, config: &mut BTreeMap<String, String>) {
        if let Ok((e, f, l)) = self.paths() {
            config.insert("edges".into(), e.display().to_string());
            config.insert("features".into(), f.display().to_string());
            config.insert("labels".into(), l.display().to_string());
        }
        config.insert("splits".into(), self.splits.clone());
    }
}

/// Applies one `key = value` setting to a training config.
pub fn apply_setting(cfg: &mut TrainConfig, key: &str, value: &str) -> Result<()> {
    fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
        v.parse().map_err(|_| Error::arg(format!("bad value {v:?} for {key}")))
    }
    match key {
        "rho" => cfg.contrastive.rho = num(key, value)?,
        "tau" => cfg.contrastive.tau = num(key, value)?,
        "k" => cfg.contrastive.k = num(key, value)?,
        "lr" => cfg.lr = num(key, value)?,
        "iterations" => cfg.iterations = num(key, value)?,
        "arch" => cfg.arch = value.parse()?,
        "seed" => cfg.seed = num(key, value)?,
        "hidden_dim" => cfg.hidden_dim = num(key, value)?,
        "eval_every" => cfg.eval_every = num(key, value)?,
        "deterministic" => cfg.deterministic = num(key, value)?,
        _ => return Err(Error::arg(format!("unknown config key {key:?}"))),
    }
    Ok(())
}

/// Flat config text: one `key = value` per line, `#` starts a comment.
pub fn parse_config(text: &str, path: &Path, cfg: &mut TrainConfig) -> Result<()> {
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg: "expected key = value".into(),
        })?;
        apply_setting(cfg, k.trim(), v.trim()).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg: e.to_string(),
        })?;
    }
    Ok(())
}

impl HyperArgs {
    /// Library defaults, then the config file, then flags. Without a file or
    /// flag asking for it, the CLI trains in fast mode.
    pub fn resolve(&self) -> Result<TrainConfig> {
        let mut cfg = TrainConfig {
            deterministic: false,
            ..TrainConfig::default()
        };
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
            parse_config(&text, path, &mut cfg)?;
        }
        if let Some(a) = &self.arch {
            cfg.arch = a.parse()?;
        }
        if let Some(v) = self.rho {
            cfg.contrastive.rho = v;
        }
        if let Some(v) = self.tau {
            cfg.contrastive.tau = v;
        }
        if let Some(v) = self.k {
            cfg.contrastive.k = v;
        }
        if let Some(v) = self.lr {
            cfg.lr = v;
        }
        if let Some(v) = self.iters {
            cfg.iterations = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.hidden_dim {
            cfg.hidden_dim = v;
        }
        if let Some(v) = self.eval_every {
            cfg.eval_every = v;
        }
        cfg.deterministic |= self.deterministic;
        Ok(cfg)
    }
}

fn describe_config(cfg: &TrainConfig) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    for (k, v) in [
        ("rho", cfg.contrastive.rho.to_string()),
        ("tau", cfg.contrastive.tau.to_string()),
        ("k", cfg.contrastive.k.to_string()),
        ("lr", cfg.lr.to_string()),
        ("iterations", cfg.iterations.to_string()),
        ("arch", cfg.arch.to_string()),
        ("seed", cfg.seed.to_string()),
        ("hidden_dim", cfg.hidden_dim.to_string()),
        ("eval_every", cfg.eval_every.to_string()),
        ("deterministic", cfg.deterministic.to_string()),
    ] {
        m.insert(k.to_string(), v);
    }
    m
}

/// Keeps the parameters with the best validation probe accuracy.
struct BestVal<'a> {
    dataset: &'a Dataset,
    best: Option<(f64, usize, EncoderParams)>,
}

impl TrainObserver for BestVal<'_> {
    fn on_iteration(&mut self, stats: &IterationStats, _: &crate::contrastive::EmbeddingBank) -> Result<()> {
        log::debug!("iteration {} loss {:.5}", stats.iteration, stats.loss);
        Ok(())
    }

    fn on_eval(&mut self, iteration: usize, params: &EncoderParams) -> Result<()> {
        let z = embed_full(params, self.dataset)?;
        let probe = linear_probe(&z, &self.dataset.labels, &self.dataset.splits, &ProbeConfig::default())?;
        log::info!("iteration {iteration}: val accuracy {:.4}", probe.val_accuracy);
        if self.best.as_ref().is_none_or(|b| probe.val_accuracy > b.0) {
            self.best = Some((probe.val_accuracy, iteration, params.clone()));
        }
        Ok(())
    }
}

/// Output of one training run inside a directory.
pub struct TrainOutcome {
    pub report: TrainReport,
    pub metrics: Metrics,
}

const TRAIN_FILES: [&str; 5] = ["curves.csv", "report.json", "metrics.json", "final.ckpt", "best.ckpt"];

/// Trains, selects the best-validation parameters, and writes every
/// training artifact to `out` (manifest first).
pub fn train_to_dir(cfg: &TrainConfig, dataset: &Dataset, data: &DataArgs, out: &Path) -> Result<TrainOutcome> {
    let mut config = describe_config(cfg);
    data.describe(&mut config);
    RunManifest::new("train", cfg.seed, config, out, &TRAIN_FILES).write(out)?;

    let mut observer = BestVal { dataset, best: None };
    let report = train_with_observer(cfg, dataset, &mut observer)?;
    let final_params = report.params();
    let (best_params, best_iteration) = match &observer.best {
        Some((_, it, p)) => (p, *it),
        None => (final_params, report.loss_curve.len() - 1),
    };
    report.write_csv(&out.join("curves.csv"))?;
    report.write_json(&out.join("report.json"))?;
    save_checkpoint(final_params, &out.join("final.ckpt"))?;
    save_checkpoint(best_params, &out.join("best.ckpt"))?;
    log::info!("best checkpoint from iteration {best_iteration}");

    let z = embed_full(best_params, dataset)?;
    let probe = linear_probe(&z, &dataset.labels, &dataset.splits, &ProbeConfig::default())?;
    let metrics = Metrics {
        accuracy: Some(probe.accuracy),
        silhouette: Some(silhouette(&z, &dataset.labels)?),
        loss_final: report.loss_curve.last().copied(),
        mi_bound_final: report.mi_bound_curve.last().copied(),
        wall_time_s: Some(report.wall_time),
        val_accuracy: Some(probe.val_accuracy),
        per_class_accuracy: None,
    };
    write_json(&out.join("metrics.json"), &metrics)?;
    Ok(TrainOutcome { report, metrics })
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let cfg = a.hyper.resolve()?;
    let dataset = a.data.load()?;
    cfg.validate(dataset.num_nodes())?;
    let outcome = train_to_dir(&cfg, &dataset, &a.data, &a.out)?;
    println!("{}", serde_json::to_string(&outcome.metrics)?);
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let mut config = BTreeMap::new();
    a.data.describe(&mut config);
    config.insert("raw_features".into(), a.raw_features.to_string());
    if let Some(c) = &a.checkpoint {
        config.insert("checkpoint".into(), c.display().to_string());
    }
    RunManifest::new("eval", 0, config, &a.out, &["metrics.json"]).write(&a.out)?;
    let dataset = a.data.load()?;
    let x = if a.raw_features {
        dataset.features.clone()
    } else {
        let path = a.checkpoint.as_ref().ok_or_else(|| Error::arg("--checkpoint is required"))?;
        embed_full(&load_checkpoint(path)?, &dataset)?
    };
    let probe = linear_probe(&x, &dataset.labels, &dataset.splits, &ProbeConfig::default())?;
    let metrics = Metrics {
        accuracy: Some(probe.accuracy),
        silhouette: Some(silhouette(&x, &dataset.labels)?),
        val_accuracy: Some(probe.val_accuracy),
        per_class_accuracy: Some(probe.per_class_accuracy),
        ..Metrics::default()
    };
    write_json(&a.out.join("metrics.json"), &metrics)?;
    println!("{}", serde_json::to_string(&metrics)?);
    Ok(())
}

fn parse_list<T: FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| Error::arg(format!("bad {what} {s:?}"))))
        .collect()
}

#[derive(Debug, Serialize)]
struct StabilitySummary {
    rho: f64,
    trials: usize,
    nodes: Vec<usize>,
    mean_similarity: Vec<f64>,
    aggregate_mean: f64,
}

fn cmd_stability(a: &StabilityArgs) -> Result<()> {
    let dataset = a.data.load()?;
    let n = dataset.num_nodes();
    let nodes: Vec<usize> = match (&a.nodes, a.sample) {
        (Some(list), _) => parse_list(list, "node id")?,
        (None, Some(count)) => {
            if count > n {
                return Err(Error::arg(format!("cannot sample {count} of {n} nodes")));
            }
            let mut rng = stream_rng(a.seed, Stream::Stability, &[u64::MAX]);
            let mut v = sample(&mut rng, n, count).into_vec();
            v.sort_unstable();
            v
        }
        (None, None) => return Err(Error::arg("give --nodes or --sample")),
    };
    let mut config = BTreeMap::new();
    a.data.describe(&mut config);
    config.insert("checkpoint".into(), a.checkpoint.display().to_string());
    config.insert("rho".into(), a.rho.to_string());
    config.insert("trials".into(), a.trials.to_string());
    config.insert("nodes".into(), format!("{nodes:?}"));
    let mut files: Vec<String> = nodes.iter().map(|v| format!("node_{v}.csv")).collect();
    files.push("stability.json".into());
    let names: Vec<&str> = files.iter().map(String::as_str).collect();
    RunManifest::new("stability", a.seed, config, &a.out, &names).write(&a.out)?;

    let params = load_checkpoint(&a.checkpoint)?;
    let reports = stability_matrices(&params, &dataset, &nodes, a.rho, a.trials, a.seed)?;
    for r in &reports {
        r.write_csv(&a.out.join(format!("node_{}.csv", r.node)))?;
    }
    let means: Vec<f64> = reports.iter().map(|r| r.mean_similarity).collect();
    let summary = StabilitySummary {
        rho: a.rho,
        trials: a.trials,
        nodes,
        aggregate_mean: means.iter().sum::<f64>() / means.len().max(1) as f64,
        mean_similarity: means,
    };
    write_json(&a.out.join("stability.json"), &summary)?;
    println!("{{\"aggregate_mean\": {}}}", summary.aggregate_mean);
    Ok(())
}

#[derive(Debug, Serialize)]
struct RiskSummary {
    mode: &'static str,
    #[serde(rename = "K")]
    k: usize,
    num_nodes: usize,
    mean_risk: f64,
    /// Mean of `|M| / (N − 1)` over the anchors: the risk of uniform sampling.
    uniform_expectation: f64,
    reports: Vec<RiskReport>,
}

fn cmd_risk(a: &RiskArgs) -> Result<()> {
    let mut config = BTreeMap::new();
    config.insert("k".into(), a.k.to_string());
    config.insert("anchors".into(), a.anchors.to_string());
    let (mode, labels, embeddings) = match (&a.labels, &a.checkpoint) {
        (Some(path), None) => {
            config.insert("labels".into(), path.display().to_string());
            ("labels", Some(read_labels(path)?), None)
        }
        (None, Some(ckpt)) => {
            let threshold = a.threshold.ok_or_else(|| Error::arg("cosine mode needs --threshold"))?;
            let edges = a.edges.as_ref().ok_or_else(|| Error::arg("cosine mode needs --edges"))?;
            let features = a.features.as_ref().ok_or_else(|| Error::arg("cosine mode needs --features"))?;
            config.insert("checkpoint".into(), ckpt.display().to_string());
            config.insert("threshold".into(), threshold.to_string());
            let x = crate::dataset::read_features(features)?;
            let graph = crate::graph::Graph::from_edges(x.rows(), crate::dataset::read_edge_list(edges)?)?;
            let dataset = Dataset {
                labels: vec![-1; x.rows()],
                graph,
                features: x,
                splits: Default::default(),
            };
            ("cosine", None, Some((embed_full(&load_checkpoint(ckpt)?, &dataset)?, threshold)))
        }
        _ => return Err(Error::arg("choose a similarity mode: --labels PATH or --checkpoint PATH --threshold T")),
    };
    RunManifest::new("risk", a.seed, config, &a.out, &["risk.json"]).write(&a.out)?;

    let n = labels.as_ref().map_or_else(|| embeddings.as_ref().map_or(0, |e| e.0.rows()), Vec::len);
    if a.anchors > n {
        return Err(Error::arg(format!("cannot draw {} anchors from {n} nodes", a.anchors)));
    }
    let mut rng = stream_rng(a.seed, Stream::Risk, &[]);
    let mut anchors = sample(&mut rng, n, a.anchors).into_vec();
    anchors.sort_unstable();
    let mut reports = Vec::with_capacity(anchors.len());
    let mut uniform = 0.0;
    for &anchor in &anchors {
        let criterion = match (&labels, &embeddings) {
            (Some(l), _) => SimilarityCriterion::Labels(l),
            (None, Some((e, threshold))) => SimilarityCriterion::Cosine {
                embeddings: e,
                threshold: *threshold,
            },
            _ => unreachable!("mode resolved above"),
        };
        let similar = estimate_similar_set(anchor, criterion)?;
        let mut draw = stream_rng(a.seed, Stream::Risk, &[anchor as u64]);
        let negatives: BTreeSet<usize> = sample_negatives(anchor, n, a.k, &mut draw)?.indices.into_iter().collect();
        uniform += similar.len() as f64 / (n - 1) as f64;
        reports.push(RiskReport::new(anchor, &negatives, &similar)?);
    }
    let count = reports.len().max(1) as f64;
    let summary = RiskSummary {
        mode,
        k: a.k,
        num_nodes: n,
        mean_risk: reports.iter().map(|r| r.risk).sum::<f64>() / count,
        uniform_expectation: uniform / count,
        reports,
    };
    write_json(&a.out.join("risk.json"), &summary)?;
    println!(
        "{{\"mean_risk\": {}, \"uniform_expectation\": {}}}",
        summary.mean_risk, summary.uniform_expectation
    );
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub param: &'static str,
    pub value: f64,
    pub val_accuracy: f64,
    pub test_accuracy: f64,
}

fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let base = a.hyper.resolve()?;
    let values: Vec<f64> = parse_list(&a.values, "grid value")?;
    if values.is_empty() {
        return Err(Error::arg("empty grid"));
    }
    let name = match a.param {
        SweepParam::Rho => "rho",
        SweepParam::Tau => "tau",
        SweepParam::K => "k",
    };
    let mut configs = Vec::with_capacity(values.len());
    for &v in &values {
        let mut cfg = base;
        if a.param == SweepParam::K && (v.fract() != 0.0 || v < 1.0) {
            return Err(Error::arg(format!("K must be a positive integer, got {v}")));
        }
        apply_setting(&mut cfg, name, &v.to_string())?;
        configs.push(cfg);
    }
    let mut config = describe_config(&base);
    a.data.describe(&mut config);
    config.insert("param".into(), name.into());
    config.insert("values".into(), a.values.clone());
    let mut files = vec!["sweep.csv".to_string()];
    files.extend((0..values.len()).map(|i| format!("point_{i}")));
    let names: Vec<&str> = files.iter().map(String::as_str).collect();
    RunManifest::new("sweep", base.seed, config, &a.out, &names).write(&a.out)?;

    let dataset = a.data.load()?;
    for cfg in &configs {
        cfg.validate(dataset.num_nodes())?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs.max(1))
        .build()
        .map_err(|e| Error::State(format!("thread pool: {e}")))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        configs
            .par_iter()
            .enumerate()
            .map(|(i, cfg)| {
                let outcome = train_to_dir(cfg, &dataset, &a.data, &a.out.join(format!("point_{i}")))?;
                Ok(SweepRow {
                    param: name,
                    value: values[i],
                    val_accuracy: outcome.metrics.val_accuracy.unwrap_or(f64::NAN),
                    test_accuracy: outcome.metrics.accuracy.unwrap_or(f64::NAN),
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut csv = String::from("param,value,val_accuracy,test_accuracy\n");
    for r in &rows {
        csv.push_str(&format!("{},{},{},{}\n", r.param, r.value, r.val_accuracy, r.test_accuracy));
    }
    write_text(&a.out.join("sweep.csv"), &csv)?;
    print!("{csv}");
    Ok(())
}
