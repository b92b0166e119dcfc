//! Command-line front end: `gen`, `train`, `eval`, `ablate`, `theory` and
//! `export-relations`.
//!
//! Exit codes: 0 success, 1 IO failure, 2 configuration error, 3 data error,
//! 4 numerical failure.

mod experiments;
mod report;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

pub use experiments::{
    ablation, evaluate_rwft, run_seed, run_seeds, select_lr, summarize_runs, theory, AveragingOutcome, LrSelection, Method,
    TheoryConfig, TheoryOutcome, LR_GRID,
};
pub use report::{AblationRow, Aggregate, ReportBody, RunReport, SeedRun, LIBRARY_VERSION};

use crate::data::{gen_dg15, gen_spatial_regression, load_dataset, read_meta, write_dataset, DatasetPaths, DomainDataset, DomainId, GridConfig, Split, SplitSource, TaskKind};
use crate::error::{Error, ErrorKind, Result};
use crate::model::{
    evaluate_d3g, evaluate_erm, evaluate_uniform, train_from, Checkpoint, Combine, MetricsReport,
    MultiHeadModel, RelationMode, TrainConfig, TrainedModel,
};
use crate::numerics::{stream, Purpose};
use crate::relations::{build_matrix, read_adjacency, write_relation_matrix, FixedRelation, RelationNet};
use crate::theory::scaling_csv;
use crate::util::write_atomic;

#[derive(Debug, Parser)]
#[command(name = "d3g", version, about = "Domain-specific heads weighted by domain relations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset.
    Gen(GenArgs),
    /// Train a model and report validation/test metrics.
    Train(TrainArgs),
    /// Evaluate a checkpoint on one split.
    Eval(EvalArgs),
    /// Relation and consistency ablations.
    Ablate(TrainArgs),
    /// Excess-risk scaling sweep and averaging oracle.
    Theory(TheoryArgs),
    /// Write fixed, learned and fused relation matrices.
    ExportRelations(ExportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DatasetKind {
    Dg15,
    Spatial,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub kind: DatasetKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Grid rows (spatial only).
    #[arg(long, default_value_t = 4)]
    pub rows: usize,
    /// Grid columns (spatial only).
    #[arg(long, default_value_t = 6)]
    pub cols: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskArg {
    #[default]
    Auto,
    Classification,
    Regression,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Directory with data.csv, meta.csv, splits.csv and optionally adjacency.txt.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = TaskArg::Auto)]
    pub task: TaskArg,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// TOML file with `seeds`, `method` and a `[train]` table.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    /// Run a single seed.
    #[arg(long, conflicts_with = "seeds")]
    pub seed: Option<u64>,
    /// Run seeds 0..N.
    #[arg(long)]
    pub seeds: Option<u64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Choose the learning rate from this comma-separated list by mean
    /// validation metric before the final runs.
    #[arg(long, value_delimiter = ',', conflicts_with = "lr")]
    pub lr_grid: Option<Vec<f64>>,
    /// Continue training a d3g checkpoint for `--epochs` more epochs.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RelationArg {
    Fused,
    Uniform,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "test")]
    pub split: Split,
    /// Relation weighting at inference (d3g checkpoints).
    #[arg(long, value_enum, default_value_t = RelationArg::Fused)]
    pub relations: RelationArg,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Combine heads as probabilities instead of logits.
    #[arg(long)]
    pub probabilities: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TheoryArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Evaluation seeds 0..N.
    #[arg(long)]
    pub seeds: Option<u64>,
    /// Fixed c0 instead of held-out selection.
    #[arg(long)]
    pub c0: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub meta: PathBuf,
    #[arg(long)]
    pub adjacency: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Seed of the relation net when no checkpoint is given.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fused matrix path; `.fixed.csv` and `.learned.csv` siblings are written too.
    #[arg(long)]
    pub out: PathBuf,
}

/// Contents of a `--config` file for `train` and `ablate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seeds: Vec<u64>,
    pub method: Method,
    pub task: TaskArg,
    /// Non-empty: learning rate picked on the validation split.
    pub lr_grid: Vec<f64>,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seeds: vec![0, 1, 2],
            method: Method::D3g,
            task: TaskArg::Auto,
            lr_grid: Vec::new(),
            train: TrainConfig::default(),
        }
    }
}

pub fn exit_code(kind: ErrorKind) -> i32 {
    match kind {
        ErrorKind::Io => 1,
        ErrorKind::Config => 2,
        ErrorKind::Data => 3,
        ErrorKind::Numerical => 4,
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(report) => {
            print!("{}", report.summary());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(e.kind())
        }
    }
}

pub fn run(cli: Cli) -> Result<RunReport> {
    let start = Instant::now();
    let (command, config, body, out) = match cli.command {
        Command::Gen(a) => cmd_gen(&a)?,
        Command::Train(a) => cmd_train(&a)?,
        Command::Eval(a) => cmd_eval(&a)?,
        Command::Ablate(a) => cmd_ablate(&a)?,
        Command::Theory(a) => cmd_theory(&a)?,
        Command::ExportRelations(a) => cmd_export(&a)?,
    };
    let report = RunReport {
        command: command.into(),
        library_version: LIBRARY_VERSION.into(),
        config,
        wall_clock_secs: start.elapsed().as_secs_f64(),
        body,
    };
    if let Some(dir) = out {
        report.write(&dir)?;
    }
    Ok(report)
}

type Outcome = (&'static str, serde_json::Value, ReportBody, Option<PathBuf>);

fn echo<T: Serialize>(v: &T) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(v)?)
}

fn cmd_gen(a: &GenArgs) -> Result<Outcome> {
    let ds = match a.kind {
        DatasetKind::Dg15 => gen_dg15(a.seed),
        DatasetKind::Spatial => {
            let cfg = GridConfig {
                rows: a.rows,
                cols: a.cols,
                ..GridConfig::default()
            };
            gen_spatial_regression(a.seed, &cfg)?.0
        }
    };
    let paths = write_dataset(&ds, &a.out)?;
    let mut files = vec![paths.data, paths.meta, paths.splits];
    files.extend(paths.adjacency);
    let config = serde_json::json!({
        "kind": format!("{:?}", a.kind).to_lowercase(),
        "seed": a.seed,
        "rows": a.rows,
        "cols": a.cols,
    });
    let body = ReportBody::Export {
        ids: ds.meta_table().keys().map(|d| d.0).collect(),
        files: files.iter().map(|p| p.display().to_string()).collect(),
    };
    Ok(("gen", config, body, None))
}

/// Loads a dataset directory, inferring the task kind when asked to.
pub fn load_dir(dir: &Path, task: TaskArg) -> Result<DomainDataset> {
    let paths = DatasetPaths::in_dir(dir);
    let load = |task| load_dataset(&paths.data, &paths.meta, &SplitSource::File(paths.splits.clone()), paths.adjacency.as_deref(), task);
    match task {
        TaskArg::Regression => load(TaskKind::Regression),
        TaskArg::Classification | TaskArg::Auto => {
            let raw = load(TaskKind::Regression)?;
            let integral = raw.examples().iter().all(|e| e.y >= 0.0 && e.y.fract() == 0.0);
            if !integral {
                return if task == TaskArg::Classification {
                    Err(Error::InvalidDataset("classification labels must be non-negative integers".into()))
                } else {
                    Ok(raw)
                };
            }
            let classes = raw.examples().iter().map(|e| e.label()).max().unwrap_or(0) + 1;
            let ds = DomainDataset::new(
                TaskKind::Classification { classes: classes.max(2) },
                raw.examples().to_vec(),
                raw.meta_table().clone(),
                raw.splits().clone(),
            )?;
            match raw.adjacency() {
                Some(adj) => ds.with_adjacency(adj.clone()),
                None => Ok(ds),
            }
        }
    }
}

fn read_toml<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))
        }
    }
}

/// Config file merged with flag overrides, validated before any side effect.
pub fn resolve_run_config(a: &TrainArgs) -> Result<RunConfig> {
    let mut rc: RunConfig = read_toml(a.config.as_deref())?;
    if let Some(m) = a.method {
        rc.method = m;
    }
    if a.data.task != TaskArg::Auto {
        rc.task = a.data.task;
    }
    if let Some(s) = a.seed {
        rc.seeds = vec![s];
    }
    if let Some(n) = a.seeds {
        rc.seeds = (0..n).collect();
    }
    let t = &mut rc.train;
    if let Some(v) = a.lambda {
        t.lambda = v;
    }
    if let Some(v) = a.beta {
        t.beta = v;
    }
    if let Some(v) = a.epochs {
        t.epochs = v;
    }
    if let Some(v) = a.lr {
        t.lr = v;
        rc.lr_grid.clear();
    }
    if let Some(g) = &a.lr_grid {
        rc.lr_grid = g.clone();
    }
    t.validate()?;
    if rc.seeds.is_empty() {
        return Err(Error::Config("no seeds to run".into()));
    }
    if rc.lr_grid.iter().any(|lr| !(lr.is_finite() && *lr > 0.0)) {
        return Err(Error::Config("lr_grid entries must be finite and > 0".into()));
    }
    Ok(rc)
}

/// Applies validation-based learning-rate selection when a grid is set and
/// returns the config echo including the selection table.
fn apply_lr_grid(rc: &mut RunConfig, ds: &DomainDataset, method: Method) -> Result<serde_json::Value> {
    let mut config = echo(&*rc)?;
    if !rc.lr_grid.is_empty() {
        let sel = select_lr(ds, method, &rc.train, &rc.seeds, &rc.lr_grid)?;
        log::info!("selected lr {} for {}", sel.lr, method.as_str());
        rc.train.lr = sel.lr;
        config["lr_selection"] = echo(&sel)?;
    }
    Ok(config)
}

fn checkpoint_path(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("checkpoint-seed{seed}.json"))
}

fn cmd_train(a: &TrainArgs) -> Result<Outcome> {
    let mut rc = resolve_run_config(a)?;
    let ds = load_dir(&a.data.data, rc.task)?;
    if let Some(path) = &a.resume {
        return resume(a, &rc, &ds, path);
    }
    let method = rc.method;
    let config = apply_lr_grid(&mut rc, &ds, method)?;
    let mut runs = Vec::new();
    for (run, model) in run_seeds(&ds, rc.method, &rc.train, &rc.seeds)? {
        if let Some(model) = model {
            let cfg = TrainConfig {
                seed: run.seed,
                ..rc.train.clone()
            };
            Checkpoint::new(model, cfg, rc.train.epochs, run.history.clone()).save(&checkpoint_path(&a.out, run.seed))?;
        }
        runs.push(run);
    }
    let summary = summarize_runs(&runs);
    Ok(("train", config, ReportBody::Runs { runs, summary }, Some(a.out.clone())))
}

fn resume(a: &TrainArgs, rc: &RunConfig, ds: &DomainDataset, path: &Path) -> Result<Outcome> {
    let ckpt = Checkpoint::load(path)?;
    let TrainedModel::D3g(model) = ckpt.model else {
        return Err(Error::Config("resume is supported for d3g checkpoints only".into()));
    };
    let cfg = TrainConfig {
        seed: ckpt.config.seed,
        epochs: a.epochs.unwrap_or(0),
        ..ckpt.config.clone()
    };
    cfg.validate()?;
    let out = train_from(model, ds, &cfg, ckpt.epochs_done)?;
    let mut history = ckpt.history.clone();
    history.extend(out.history);
    let run = experiments_d3g_run(ds, cfg.seed, &out.model, out.best_epoch, history.clone())?;
    let done = ckpt.epochs_done + cfg.epochs;
    let saved = TrainConfig { epochs: done, ..cfg.clone() };
    Checkpoint::new(TrainedModel::D3g(out.model), saved, done, history).save(&checkpoint_path(&a.out, cfg.seed))?;
    let runs = vec![run];
    let summary = summarize_runs(&runs);
    let echo_cfg = serde_json::json!({ "resume": path.display().to_string(), "run": echo(rc)?, "train": echo(&cfg)? });
    Ok(("train", echo_cfg, ReportBody::Runs { runs, summary }, Some(a.out.clone())))
}

fn experiments_d3g_run(
    ds: &DomainDataset,
    seed: u64,
    model: &MultiHeadModel,
    best_epoch: Option<usize>,
    history: Vec<crate::model::EpochRecord>,
) -> Result<SeedRun> {
    experiments::d3g_run(ds, seed, model, best_epoch, history)
}

fn cmd_eval(a: &EvalArgs) -> Result<Outcome> {
    let ckpt = Checkpoint::load(&a.checkpoint)?;
    let ds = load_dir(&a.data.data, a.data.task)?;
    if ds.task() != ckpt.task {
        return Err(Error::InvalidDataset(format!("checkpoint task {:?} does not match dataset {:?}", ckpt.task, ds.task())));
    }
    if ds.domains(a.split).is_empty() {
        return Err(Error::InvalidDataset(format!("dataset has no {} domains", a.split)));
    }
    let (method, report): (&str, MetricsReport) = match &ckpt.model {
        TrainedModel::D3g(m) => {
            let mut m = m.clone();
            if let Some(b) = a.beta {
                m.set_beta(b)?;
            }
            if a.probabilities {
                m.set_combine(Combine::Probabilities);
            }
            match a.relations {
                RelationArg::Fused => {
                    m.set_relation_mode(RelationMode::Fused);
                    ("d3g", evaluate_d3g(&m, &ds, a.split)?)
                }
                RelationArg::Uniform => ("uniform", evaluate_uniform(&m, &ds, a.split)?),
            }
        }
        TrainedModel::Erm(m) => ("erm", evaluate_erm(m, &ds, a.split)?),
    };
    let run = SeedRun {
        seed: ckpt.config.seed,
        method: method.into(),
        best_epoch: None,
        valid: (a.split == Split::Valid).then(|| report.clone()),
        test: (a.split != Split::Valid).then(|| report.clone()),
        history: Vec::new(),
    };
    let config = serde_json::json!({
        "checkpoint": a.checkpoint.display().to_string(),
        "data": a.data.data.display().to_string(),
        "split": a.split.as_str(),
        "relations": format!("{:?}", a.relations).to_lowercase(),
        "beta": a.beta,
        "probabilities": a.probabilities,
        "train": ckpt.config,
    });
    let runs = vec![run];
    let summary = vec![Aggregate::new(format!("{method} {} mean", a.split), vec![report.mean])];
    Ok(("eval", config, ReportBody::Runs { runs, summary }, a.out.clone()))
}

fn cmd_ablate(a: &TrainArgs) -> Result<Outcome> {
    let mut rc = resolve_run_config(a)?;
    let ds = load_dir(&a.data.data, rc.task)?;
    let config = apply_lr_grid(&mut rc, &ds, Method::D3g)?;
    let rows = ablation(&ds, &rc.train, &rc.seeds)?;
    let mut csv = String::from("group,variant,beta,lambda,relations,mean,std,seeds\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.group,
            r.variant,
            r.beta,
            r.lambda,
            r.relations,
            r.test.mean,
            r.test.std,
            r.test.values.len()
        ));
    }
    write_atomic(&a.out.join("ablation.csv"), csv.as_bytes())?;
    Ok(("ablate", config, ReportBody::Ablation { rows }, Some(a.out.clone())))
}

fn cmd_theory(a: &TheoryArgs) -> Result<Outcome> {
    let mut cfg: TheoryConfig = read_toml(a.config.as_deref())?;
    if let Some(n) = a.seeds {
        cfg.scaling.seeds = (0..n).collect();
    }
    if let Some(c0) = a.c0 {
        cfg.scaling.c0 = c0;
        cfg.select_c0 = false;
    }
    cfg.scaling.validate()?;
    if cfg.averaging_samples == 0 {
        return Err(Error::Config("averaging_samples must be > 0".into()));
    }
    let outcome = theory(&cfg)?;
    write_atomic(&a.out.join("scaling.csv"), &scaling_csv(&outcome.scaling)?)?;
    Ok(("theory", echo(&cfg)?, ReportBody::Theory(outcome), Some(a.out.clone())))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}.csv"))
}

fn cmd_export(a: &ExportArgs) -> Result<Outcome> {
    let meta = read_meta(&a.meta)?;
    let ids: Vec<DomainId> = meta.keys().copied().collect();
    let meta_dim = meta.values().next().map_or(0, Vec::len);
    let (net, fixed, model_beta) = match &a.checkpoint {
        Some(p) => match Checkpoint::load(p)?.model {
            TrainedModel::D3g(m) => {
                let fixed = match (&a.adjacency, m.fixed_relation()) {
                    (Some(path), _) => adjacency_relation(path, &ids)?,
                    (None, f) => f.clone(),
                };
                (m.relation_net().clone(), fixed, m.beta())
            }
            TrainedModel::Erm(_) => return Err(Error::Config("erm checkpoints carry no relations".into())),
        },
        None => {
            let cfg = TrainConfig::default();
            let net = RelationNet::init(
                meta_dim,
                cfg.relation_width,
                cfg.relation_heads,
                &mut stream(a.seed, Purpose::Init, 1 << 20),
            )?;
            let fixed = match &a.adjacency {
                Some(path) => adjacency_relation(path, &ids)?,
                None => FixedRelation::Angle,
            };
            (net, fixed, cfg.beta)
        }
    };
    if net.meta_dim() != meta_dim {
        return Err(Error::DimensionMismatch {
            context: "meta-data for relation net",
            expected: net.meta_dim(),
            actual: meta_dim,
        });
    }
    let beta = a.beta.unwrap_or(model_beta);
    let m = build_matrix(&meta, &ids, &fixed, &net, beta)?;
    let fixed_path = with_suffix(&a.out, "fixed");
    let learned_path = with_suffix(&a.out, "learned");
    write_relation_matrix(&a.out, &ids, m.fused())?;
    write_relation_matrix(&fixed_path, &ids, m.fixed())?;
    write_relation_matrix(&learned_path, &ids, m.learned())?;
    let config = serde_json::json!({
        "meta": a.meta.display().to_string(),
        "adjacency": a.adjacency.as_ref().map(|p| p.display().to_string()),
        "checkpoint": a.checkpoint.as_ref().map(|p| p.display().to_string()),
        "beta": beta,
        "seed": a.seed,
    });
    let body = ReportBody::Export {
        ids: ids.iter().map(|d| d.0).collect(),
        files: [&a.out, &fixed_path, &learned_path].iter().map(|p| p.display().to_string()).collect(),
    };
    Ok(("export-relations", config, body, None))
}

fn adjacency_relation(path: &Path, ids: &[DomainId]) -> Result<FixedRelation> {
    let mut adj = read_adjacency(path)?;
    adj.extend_domains(ids.iter().copied());
    Ok(FixedRelation::Adjacency(adj))
}
