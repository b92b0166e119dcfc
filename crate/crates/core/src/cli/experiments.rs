//! Experiment drivers shared by the subcommands, the examples and the
//! acceptance suite.

use std::collections::BTreeMap;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use super::report::{AblationRow, Aggregate, SeedRun};
use crate::data::{DomainDataset, Split};
use crate::error::{Error, Result};
use crate::model::{
    domain_metric, evaluate_d3g, evaluate_erm, rw_finetune, train, train_erm, Metric, MetricsReport, MultiHeadModel,
    RelationMode, TrainConfig, TrainedModel,
};
use crate::theory::{averaging_oracle, scaling_experiment, select_c0, uniform_scaling, Estimate, ScalingConfig, ScalingRow, AVERAGING_TARGET};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Multi-head model with relation-weighted inference.
    #[default]
    D3g,
    /// Single network on pooled data with meta-data features.
    Erm,
    /// ERM fine-tuned per test domain on relation-reweighted data.
    Rwft,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::D3g => "d3g",
            Method::Erm => "erm",
            Method::Rwft => "rwft",
        }
    }
}

fn split_report<F>(ds: &DomainDataset, split: Split, f: F) -> Result<Option<MetricsReport>>
where
    F: FnOnce() -> Result<MetricsReport>,
{
    if ds.domains(split).is_empty() {
        Ok(None)
    } else {
        f().map(Some)
    }
}

/// Trains `method` with `cfg` and reports validation and test metrics. The
/// trained model is returned for checkpointing (none for RW-FT, which keeps
/// one model per test domain).
pub fn run_seed(ds: &DomainDataset, method: Method, cfg: &TrainConfig) -> Result<(SeedRun, Option<TrainedModel>)> {
    match method {
        Method::D3g => {
            let out = train(MultiHeadModel::init(ds, cfg)?, ds, cfg)?;
            let run = d3g_run(ds, cfg.seed, &out.model, out.best_epoch, out.history)?;
            Ok((run, Some(TrainedModel::D3g(out.model))))
        }
        Method::Erm => {
            let out = train_erm(ds, cfg)?;
            let m = &out.model;
            let run = SeedRun {
                seed: cfg.seed,
                method: method.as_str().into(),
                best_epoch: out.best_epoch,
                valid: split_report(ds, Split::Valid, || evaluate_erm(m, ds, Split::Valid))?,
                test: split_report(ds, Split::Test, || evaluate_erm(m, ds, Split::Test))?,
                history: out.history,
            };
            Ok((run, Some(TrainedModel::Erm(out.model))))
        }
        Method::Rwft => {
            let d3g = train(MultiHeadModel::init(ds, cfg)?, ds, cfg)?.model;
            let erm = train_erm(ds, cfg)?;
            let run = SeedRun {
                seed: cfg.seed,
                method: method.as_str().into(),
                best_epoch: erm.best_epoch,
                valid: split_report(ds, Split::Valid, || evaluate_rwft(&erm.model, &d3g, ds, Split::Valid, cfg))?,
                test: split_report(ds, Split::Test, || evaluate_rwft(&erm.model, &d3g, ds, Split::Test, cfg))?,
                history: erm.history,
            };
            Ok((run, None))
        }
    }
}

pub(crate) fn d3g_run(
    ds: &DomainDataset,
    seed: u64,
    model: &MultiHeadModel,
    best_epoch: Option<usize>,
    history: Vec<crate::model::EpochRecord>,
) -> Result<SeedRun> {
    Ok(SeedRun {
        seed,
        method: Method::D3g.as_str().into(),
        best_epoch,
        valid: split_report(ds, Split::Valid, || evaluate_d3g(model, ds, Split::Valid))?,
        test: split_report(ds, Split::Test, || evaluate_d3g(model, ds, Split::Test))?,
        history,
    })
}

/// RW-FT: one fine-tuned copy of `erm` per domain of `split`, weighted by the
/// relations of the trained multi-head model.
pub fn evaluate_rwft(
    erm: &crate::model::ErmModel,
    relations_from: &MultiHeadModel,
    ds: &DomainDataset,
    split: Split,
    cfg: &TrainConfig,
) -> Result<MetricsReport> {
    let per_domain = ds
        .domains(split)
        .into_iter()
        .map(|t| {
            let row = relations_from.relation_row(ds.meta_table(), t)?;
            let rel: BTreeMap<_, _> = relations_from.head_domains().iter().copied().zip(row).collect();
            let tuned = rw_finetune(erm, ds, &rel, cfg)?;
            domain_metric(ds, t, |ex| tuned.predict(&ex.x, ds.meta(ex.domain)?))
        })
        .collect::<Result<Vec<_>>>()?;
    MetricsReport::from_domains(Metric::for_task(ds.task()), split, per_domain)
}

/// Runs `method` for every seed, with the seed written into the config.
pub fn run_seeds(ds: &DomainDataset, method: Method, cfg: &TrainConfig, seeds: &[u64]) -> Result<Vec<(SeedRun, Option<TrainedModel>)>> {
    seeds
        .iter()
        .map(|&seed| {
            let c = TrainConfig { seed, ..cfg.clone() };
            run_seed(ds, method, &c)
        })
        .collect()
}

/// Mean and std of the validation and test means across seeds.
pub fn summarize_runs(runs: &[SeedRun]) -> Vec<Aggregate> {
    let mut out = Vec::new();
    let valid: Vec<f64> = runs.iter().filter_map(|r| r.valid.as_ref().map(|m| m.mean)).collect();
    let test: Vec<f64> = runs.iter().filter_map(|r| r.test.as_ref().map(|m| m.mean)).collect();
    let worst: Vec<f64> = runs.iter().filter_map(|r| r.test.as_ref().map(|m| m.worst)).collect();
    let method = runs.first().map_or("", |r| r.method.as_str());
    if !valid.is_empty() {
        out.push(Aggregate::new(format!("{method} valid mean"), valid));
    }
    if !test.is_empty() {
        out.push(Aggregate::new(format!("{method} test mean"), test));
        out.push(Aggregate::new(format!("{method} test worst"), worst));
    }
    out
}

/// Learning rates tried by [`select_lr`] when none are given.
pub const LR_GRID: [f64; 5] = [1e-5, 3e-5, 1e-4, 3e-4, 1e-3];

/// Mean validation metric of every candidate learning rate and the winner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrSelection {
    pub method: Method,
    pub lr: f64,
    pub candidates: Vec<(f64, f64)>,
}

/// Picks the learning rate with the best mean validation metric over
/// `seeds`. Test domains are never evaluated; ties keep the earlier
/// candidate.
pub fn select_lr(ds: &DomainDataset, method: Method, cfg: &TrainConfig, seeds: &[u64], grid: &[f64]) -> Result<LrSelection> {
    if grid.is_empty() {
        return Err(Error::Config("empty learning-rate grid".into()));
    }
    if ds.domains(Split::Valid).is_empty() {
        return Err(Error::InvalidDataset("learning-rate selection needs validation domains".into()));
    }
    let metric = Metric::for_task(ds.task());
    let mut candidates = Vec::with_capacity(grid.len());
    let mut best: Option<(f64, f64)> = None;
    for &lr in grid {
        let c = TrainConfig { lr, ..cfg.clone() };
        c.validate()?;
        let valid: Vec<f64> = run_seeds_valid_only(ds, method, &c, seeds)?;
        let mean = valid.iter().sum::<f64>() / valid.len() as f64;
        candidates.push((lr, mean));
        if best.is_none_or(|(_, b)| metric.better(mean, b)) {
            best = Some((lr, mean));
        }
    }
    let (lr, _) = best.expect("grid is non-empty");
    Ok(LrSelection { method, lr, candidates })
}

fn run_seeds_valid_only(ds: &DomainDataset, method: Method, cfg: &TrainConfig, seeds: &[u64]) -> Result<Vec<f64>> {
    seeds
        .iter()
        .map(|&seed| {
            let c = TrainConfig { seed, ..cfg.clone() };
            let valid = match method {
                Method::D3g => evaluate_d3g(&train(MultiHeadModel::init(ds, &c)?, ds, &c)?.model, ds, Split::Valid)?,
                Method::Erm => evaluate_erm(&train_erm(ds, &c)?.model, ds, Split::Valid)?,
                Method::Rwft => {
                    let d3g = train(MultiHeadModel::init(ds, &c)?, ds, &c)?.model;
                    evaluate_rwft(&train_erm(ds, &c)?.model, &d3g, ds, Split::Valid, &c)?
                }
            };
            Ok(valid.mean)
        })
        .collect()
}

/// A named modification of the base configuration.
struct Variant {
    group: &'static str,
    name: &'static str,
    beta: f64,
    lambda: f64,
    relations: RelationMode,
}

/// Relation ablation (no relations, fixed only, learned only, fixed plus
/// learned) and consistency ablation (fixed relations with and without the
/// consistency loss), each over all seeds, reporting test accuracy.
pub fn ablation(ds: &DomainDataset, cfg: &TrainConfig, seeds: &[u64]) -> Result<Vec<AblationRow>> {
    cfg.validate()?;
    let variants = [
        Variant { group: "relations", name: "none", beta: cfg.beta, lambda: cfg.lambda, relations: RelationMode::Uniform },
        Variant { group: "relations", name: "fixed", beta: 1.0, lambda: cfg.lambda, relations: RelationMode::Fused },
        Variant { group: "relations", name: "learned", beta: 0.0, lambda: cfg.lambda, relations: RelationMode::Fused },
        Variant { group: "relations", name: "fixed+learned", beta: cfg.beta, lambda: cfg.lambda, relations: RelationMode::Fused },
        Variant { group: "consistency", name: "without", beta: 1.0, lambda: 0.0, relations: RelationMode::Fused },
        Variant { group: "consistency", name: "with", beta: 1.0, lambda: cfg.lambda, relations: RelationMode::Fused },
    ];
    variants
        .iter()
        .map(|v| {
            let c = TrainConfig {
                beta: v.beta,
                lambda: v.lambda,
                relations: v.relations,
                ..cfg.clone()
            };
            let runs = run_seeds(ds, Method::D3g, &c, seeds)?;
            let test = runs.iter().filter_map(|(r, _)| r.test.as_ref().map(|m| m.mean)).collect();
            let final_loss = runs
                .iter()
                .map(|(r, _)| r.history.last().map_or(f64::NAN, |h| h.loss_total))
                .collect();
            Ok(AblationRow {
                group: v.group.into(),
                variant: v.name.into(),
                beta: v.beta,
                lambda: v.lambda,
                relations: match v.relations {
                    RelationMode::Uniform => "uniform".into(),
                    RelationMode::Fused => "fused".into(),
                },
                test: Aggregate::new(v.name, test),
                final_loss,
            })
        })
        .collect()
}

/// Settings of the theory command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TheoryConfig {
    pub scaling: ScalingConfig,
    /// When set, overrides `scaling.c0` by selection on `holdout_seeds`.
    pub select_c0: bool,
    pub c0_candidates: Vec<f64>,
    pub holdout_seeds: Vec<u64>,
    pub averaging_samples: usize,
    pub averaging_seed: u64,
}

impl Default for TheoryConfig {
    fn default() -> Self {
        Self {
            scaling: ScalingConfig::default(),
            select_c0: true,
            c0_candidates: vec![0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0],
            holdout_seeds: vec![1000],
            averaging_samples: 1_000_000,
            averaging_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragingOutcome {
    pub estimate: Estimate,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryOutcome {
    pub c0: f64,
    pub scaling: Vec<ScalingRow>,
    pub uniform: Vec<ScalingRow>,
    pub averaging: AveragingOutcome,
}

pub fn theory(cfg: &TheoryConfig) -> Result<TheoryOutcome> {
    let c0 = if cfg.select_c0 {
        select_c0(&cfg.scaling, &cfg.c0_candidates, &cfg.holdout_seeds)?
    } else {
        cfg.scaling.c0
    };
    let scaling_cfg = ScalingConfig {
        c0,
        ..cfg.scaling.clone()
    };
    Ok(TheoryOutcome {
        c0,
        scaling: scaling_experiment(&scaling_cfg)?,
        uniform: uniform_scaling(&scaling_cfg)?,
        averaging: AveragingOutcome {
            estimate: averaging_oracle(cfg.averaging_samples, cfg.averaging_seed),
            target: AVERAGING_TARGET,
        },
    })
}
