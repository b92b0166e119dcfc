use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::eval::{evaluate_d3g, Metric};
use super::multihead::MultiHeadModel;
use crate::data::{DomainDataset, DomainId, Example, Split};
use crate::error::{Error, Result};
use crate::numerics::{adam_step, stream, AdamConfig, AdamState, Purpose};

/// Mean losses over one epoch and, when evaluated, the validation metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss_pred: f64,
    pub loss_rel: f64,
    pub loss_total: f64,
    pub valid_metric: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome<M> {
    pub model: M,
    pub history: Vec<EpochRecord>,
    /// Epoch whose parameters were kept, if validation selection ran.
    pub best_epoch: Option<usize>,
}

/// Visiting order of the training examples for `epoch`: a seeded shuffle of
/// the pooled set, or domain-balanced draws with replacement.
pub(crate) fn epoch_order(train: &[&Example], cfg: &TrainConfig, epoch: usize) -> Vec<usize> {
    let mut rng = stream(cfg.seed, Purpose::Shuffle, epoch as u64);
    if cfg.domain_balanced_sampling {
        let mut by_domain: BTreeMap<DomainId, Vec<usize>> = BTreeMap::new();
        for (i, ex) in train.iter().enumerate() {
            by_domain.entry(ex.domain).or_default().push(i);
        }
        let groups: Vec<Vec<usize>> = by_domain.into_values().collect();
        (0..train.len())
            .map(|_| {
                let g = &groups[rng.random_range(0..groups.len())];
                g[rng.random_range(0..g.len())]
            })
            .collect()
    } else {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut rng);
        order
    }
}

/// Tracks the best validation score seen so far and its parameters.
pub(crate) struct Selector<M> {
    metric: Metric,
    best: Option<(f64, usize, M)>,
}

impl<M: Clone> Selector<M> {
    pub(crate) fn new(metric: Metric) -> Self {
        Self { metric, best: None }
    }

    pub(crate) fn offer(&mut self, value: f64, epoch: usize, model: &M) {
        let improves = match &self.best {
            None => true,
            Some((best, _, _)) => self.metric.better(value, *best),
        };
        if improves {
            self.best = Some((value, epoch, model.clone()));
        }
    }

    pub(crate) fn finish(self, last: M) -> (M, Option<usize>) {
        match self.best {
            Some((_, epoch, model)) => (model, Some(epoch)),
            None => (last, None),
        }
    }
}

/// Whether validation runs after `epoch` (0-based) of `total`.
pub(crate) fn evaluate_now(cfg: &TrainConfig, ds: &DomainDataset, epoch: usize, total: usize) -> bool {
    cfg.select_on_valid
        && !ds.domains(Split::Valid).is_empty()
        && ((epoch + 1).is_multiple_of(cfg.eval_every) || epoch + 1 == total)
}

/// Trains a multi-head model. The relation matrix among training domains is
/// rebuilt from the current relation network at every optimisation step.
pub fn train(model: MultiHeadModel, ds: &DomainDataset, cfg: &TrainConfig) -> Result<TrainOutcome<MultiHeadModel>> {
    train_from(model, ds, cfg, 0)
}

/// [`train`] continuing an earlier run: epoch numbering (and therefore the
/// shuffle streams) starts at `first_epoch`. Optimiser moments start fresh.
pub fn train_from(
    mut model: MultiHeadModel,
    ds: &DomainDataset,
    cfg: &TrainConfig,
    first_epoch: usize,
) -> Result<TrainOutcome<MultiHeadModel>> {
    cfg.validate()?;
    let train_set: Vec<&Example> = ds.examples_in(Split::Train).collect();
    if train_set.is_empty() {
        return Err(Error::InvalidDataset("no training examples".into()));
    }
    for d in ds.domains(Split::Train) {
        model.head_index(d)?;
    }
    let meta = ds.meta_table();
    let mut adam = AdamState::new(&model, AdamConfig::default());
    let mut selector = Selector::new(Metric::for_task(ds.task()));
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut step = 0;
    for epoch in first_epoch..first_epoch + cfg.epochs {
        let order = epoch_order(&train_set, cfg, epoch);
        let (mut pred, mut rel, mut total, mut batches) = (0.0, 0.0, 0.0, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Example> = chunk.iter().map(|&i| train_set[i]).collect();
            let (parts, grads) = model.objective(&batch, meta, cfg.lambda)?;
            if !parts.total.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    step,
                    loss: parts.total,
                });
            }
            adam_step(&mut model, &grads, &mut adam, cfg.lr, cfg.weight_decay)?;
            pred += parts.pred;
            rel += parts.rel;
            total += parts.total;
            batches += 1;
            step += 1;
        }
        let valid_metric = if evaluate_now(cfg, ds, epoch - first_epoch, cfg.epochs) {
            let v = evaluate_d3g(&model, ds, Split::Valid)?.mean;
            selector.offer(v, epoch, &model);
            Some(v)
        } else {
            None
        };
        let nb = batches as f64;
        log::debug!("epoch {epoch}: loss {:.6} valid {valid_metric:?}", total / nb);
        history.push(EpochRecord {
            epoch,
            loss_pred: pred / nb,
            loss_rel: rel / nb,
            loss_total: total / nb,
            valid_metric,
        });
    }
    let (model, best_epoch) = selector.finish(model);
    Ok(TrainOutcome {
        model,
        history,
        best_epoch,
    })
}
