use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::eval::{evaluate_erm, Metric};
use super::train::{epoch_order, evaluate_now, EpochRecord, Selector, TrainOutcome};
use crate::data::{DomainDataset, DomainId, Example, Split, TaskKind};
use crate::error::{Error, Result};
use crate::numerics::{adam_step, loss_ce, loss_mse, stream, Activation, AdamConfig, AdamState, Mlp, Purpose};
use crate::relations::normalize_or_uniform;

/// Single network on pooled data. The domain meta-data is appended to the
/// input features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErmModel {
    task: TaskKind,
    network: Mlp,
    feature_dim: usize,
}

impl ErmModel {
    /// Same extractor shape as the multi-head model plus one linear head.
    pub fn init(ds: &DomainDataset, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let input = ds.feature_dim() + ds.meta_dim();
        let network = Mlp::init(
            &[input, cfg.hidden_width, ds.task().output_dim()],
            &[Activation::Relu, Activation::Identity],
            &mut stream(cfg.seed, Purpose::Init, 0),
        )?;
        Ok(Self {
            task: ds.task(),
            network,
            feature_dim: ds.feature_dim(),
        })
    }

    pub fn task(&self) -> TaskKind {
        self.task
    }

    pub fn network(&self) -> &Mlp {
        &self.network
    }

    fn input(&self, x: &[f64], meta: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.feature_dim {
            return Err(Error::DimensionMismatch {
                context: "erm features",
                expected: self.feature_dim,
                actual: x.len(),
            });
        }
        Ok(x.iter().chain(meta).copied().collect())
    }

    pub fn predict(&self, x: &[f64], meta: &[f64]) -> Result<Vec<f64>> {
        self.network.predict(&self.input(x, meta)?)
    }

    /// `sum_i w_i loss_i / sum_i w_i` over the batch and its gradient.
    fn weighted_objective(&self, batch: &[(&Example, f64)], meta: &BTreeMap<DomainId, Vec<f64>>) -> Result<(f64, Mlp)> {
        let total_w: f64 = batch.iter().map(|(_, w)| w).sum();
        if batch.is_empty() || total_w <= 0.0 {
            return Err(Error::EmptyBatch);
        }
        let mut grads = self.network.zeros_like();
        let mut loss = 0.0;
        for (ex, w) in batch {
            let m = meta.get(&ex.domain).ok_or(Error::MissingMeta(ex.domain))?;
            let (out, tape) = self.network.forward(&self.input(&ex.x, m)?)?;
            let (l, g) = match self.task {
                TaskKind::Classification { .. } => loss_ce(&out, ex.label())?,
                TaskKind::Regression => loss_mse(&out, &[ex.y])?,
            };
            loss += w * l;
            let scaled: Vec<f64> = g.iter().map(|v| v * w / total_w).collect();
            self.network.backward_into(&tape, &scaled, &mut grads)?;
        }
        Ok((loss / total_w, grads))
    }
}

/// Weighted mini-batch training shared by ERM and fine-tuning. Examples are
/// visited in the seeded order of `cfg`; `valid` enables model selection.
fn fit(
    mut model: ErmModel,
    examples: &[(&Example, f64)],
    ds: &DomainDataset,
    cfg: &TrainConfig,
    epochs: usize,
    select: bool,
) -> Result<TrainOutcome<ErmModel>> {
    if examples.is_empty() {
        return Err(Error::InvalidDataset("no examples to fit".into()));
    }
    let meta = ds.meta_table();
    let refs: Vec<&Example> = examples.iter().map(|(e, _)| *e).collect();
    let mut adam = AdamState::new(&model.network, AdamConfig::default());
    let mut selector = Selector::new(Metric::for_task(ds.task()));
    let mut history = Vec::with_capacity(epochs);
    let mut step = 0;
    for epoch in 0..epochs {
        let order = epoch_order(&refs, cfg, epoch);
        let (mut total, mut batches) = (0.0, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(&Example, f64)> = chunk.iter().map(|&i| examples[i]).collect();
            let (loss, grads) = model.weighted_objective(&batch, meta)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, step, loss });
            }
            adam_step(&mut model.network, &grads, &mut adam, cfg.lr, cfg.weight_decay)?;
            total += loss;
            batches += 1;
            step += 1;
        }
        let valid_metric = if select && evaluate_now(cfg, ds, epoch, epochs) {
            let v = evaluate_erm(&model, ds, Split::Valid)?.mean;
            selector.offer(v, epoch, &model);
            Some(v)
        } else {
            None
        };
        let loss = total / batches as f64;
        history.push(EpochRecord {
            epoch,
            loss_pred: loss,
            loss_rel: 0.0,
            loss_total: loss,
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

/// Empirical risk minimisation on the pooled training domains.
pub fn train_erm(ds: &DomainDataset, cfg: &TrainConfig) -> Result<TrainOutcome<ErmModel>> {
    let model = ErmModel::init(ds, cfg)?;
    let examples: Vec<(&Example, f64)> = ds.examples_in(Split::Train).map(|e| (e, 1.0)).collect();
    fit(model, &examples, ds, cfg, cfg.epochs, true)
}

/// Fine-tunes a copy of `erm` for `cfg.finetune_epochs` epochs on the given
/// weighted examples, without model selection.
pub fn finetune(erm: &ErmModel, examples: &[(&Example, f64)], ds: &DomainDataset, cfg: &TrainConfig) -> Result<ErmModel> {
    cfg.validate()?;
    if cfg.finetune_epochs == 0 {
        return Ok(erm.clone());
    }
    Ok(fit(erm.clone(), examples, ds, cfg, cfg.finetune_epochs, false)?.model)
}

/// Relation-reweighted fine-tuning for one target domain. `relations` maps
/// each training domain to its relation with the target; the weights are
/// normalised over the training domains (uniform if all are zero) and
/// examples of zero-weight domains are left out.
pub fn rw_finetune(
    erm: &ErmModel,
    ds: &DomainDataset,
    relations: &BTreeMap<DomainId, f64>,
    cfg: &TrainConfig,
) -> Result<ErmModel> {
    let domains = ds.domains(Split::Train);
    let raw = domains
        .iter()
        .map(|d| relations.get(d).copied().ok_or(Error::UnknownDomain(*d)))
        .collect::<Result<Vec<f64>>>()?;
    let weights: BTreeMap<DomainId, f64> = domains.into_iter().zip(normalize_or_uniform(&raw)?).collect();
    let examples: Vec<(&Example, f64)> = ds
        .examples_in(Split::Train)
        .map(|e| (e, weights[&e.domain]))
        .filter(|(_, w)| *w > 0.0)
        .collect();
    finetune(erm, &examples, ds, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gen_dg15;

    fn cfg() -> TrainConfig {
        TrainConfig {
            epochs: 2,
            lr: 1e-3,
            hidden_width: 8,
            finetune_epochs: 2,
            ..Default::default()
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let ds = gen_dg15(0);
        let a = train_erm(&ds, &cfg()).unwrap();
        let b = train_erm(&ds, &cfg()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fits_a_perfectly_learnable_toy() {
        let examples: Vec<Example> = (0..40)
            .map(|i| {
                let x = i as f64 / 20.0 - 1.0;
                Example {
                    domain: DomainId((i % 2) as u32),
                    x: vec![x],
                    y: 2.0 * x,
                }
            })
            .collect();
        let meta = (0..2).map(|d| (DomainId(d), vec![0.0])).collect();
        let splits = (0..2).map(|d| (DomainId(d), Split::Train)).collect();
        let ds = DomainDataset::new(TaskKind::Regression, examples, meta, splits).unwrap();
        let c = TrainConfig {
            epochs: 300,
            lr: 1e-2,
            weight_decay: 0.0,
            hidden_width: 16,
            ..Default::default()
        };
        let out = train_erm(&ds, &c).unwrap();
        assert!(out.history.last().unwrap().loss_total < 1e-3, "{:?}", out.history.last());
    }

    #[test]
    fn zero_finetune_epochs_is_identity() {
        let ds = gen_dg15(1);
        let erm = train_erm(&ds, &cfg()).unwrap().model;
        let c = TrainConfig {
            finetune_epochs: 0,
            ..cfg()
        };
        let rel = ds.domains(Split::Train).into_iter().map(|d| (d, 1.0)).collect();
        assert_eq!(rw_finetune(&erm, &ds, &rel, &c).unwrap(), erm);
    }

    #[test]
    fn one_hot_weights_equal_finetuning_on_that_domain() {
        let ds = gen_dg15(2);
        let erm = train_erm(&ds, &cfg()).unwrap().model;
        let train = ds.domains(Split::Train);
        let target = train[1];
        let rel = train.iter().map(|&d| (d, if d == target { 3.0 } else { 0.0 })).collect();
        let a = rw_finetune(&erm, &ds, &rel, &cfg()).unwrap();
        let only: Vec<(&Example, f64)> = ds.examples_of(target).map(|e| (e, 1.0)).collect();
        let b = finetune(&erm, &only, &ds, &cfg()).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, erm);
    }
}
