use serde::{Deserialize, Serialize};

use crate::data::DomainDataset;
use crate::error::{Error, Result};
use crate::relations::{check_beta, FixedRelation};

/// How head outputs are combined in the consistency loss and at inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combine {
    /// Weighted sum of raw head outputs (logits for classification).
    #[default]
    Logits,
    /// Weighted sum of softmax probabilities (classification only).
    Probabilities,
}

/// Which relation matrix weights the heads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationMode {
    /// `beta`-fused fixed and learned relations.
    #[default]
    Fused,
    /// Every domain weighs the same.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FixedKind {
    /// Adjacency when the dataset carries one, otherwise the angle of the
    /// first meta-data entry.
    #[default]
    Auto,
    Angle,
    Adjacency,
}

impl FixedKind {
    pub fn resolve(self, ds: &DomainDataset) -> Result<FixedRelation> {
        match (self, ds.adjacency()) {
            (FixedKind::Adjacency | FixedKind::Auto, Some(adj)) => {
                let mut adj = adj.clone();
                adj.extend_domains(ds.meta_table().keys().copied());
                Ok(FixedRelation::Adjacency(adj))
            }
            (FixedKind::Adjacency, None) => Err(Error::Config("adjacency relation requested but dataset has none".into())),
            (FixedKind::Angle | FixedKind::Auto, _) => Ok(FixedRelation::Angle),
        }
    }
}

/// Training hyperparameters. Defaults are the DG-15 settings: loss balance
/// 0.5, relation fusion 0.8, learning rate 1e-5, weight decay 5e-4, batch 10,
/// 30 epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lambda: f64,
    pub beta: f64,
    pub lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub hidden_width: usize,
    pub relation_width: usize,
    pub relation_heads: usize,
    /// Validation cadence in epochs.
    pub eval_every: usize,
    /// Keep the parameters of the epoch with the best validation metric.
    pub select_on_valid: bool,
    pub combine: Combine,
    pub relations: RelationMode,
    pub fixed: FixedKind,
    pub domain_balanced_sampling: bool,
    /// Epochs of relation-reweighted fine-tuning for the RW-FT baseline.
    pub finetune_epochs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 0.5,
            beta: 0.8,
            lr: 1e-5,
            weight_decay: 5e-4,
            batch_size: 10,
            epochs: 30,
            seed: 0,
            hidden_width: 64,
            relation_width: 32,
            relation_heads: 4,
            eval_every: 1,
            select_on_valid: true,
            combine: Combine::Logits,
            relations: RelationMode::Fused,
            fixed: FixedKind::Auto,
            domain_balanced_sampling: false,
            finetune_epochs: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be finite and >= 0");
        }
        check_beta(self.beta)?;
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("learning rate must be > 0");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight decay must be >= 0");
        }
        if self.batch_size == 0 {
            return bad("batch size must be >= 1");
        }
        if self.hidden_width == 0 || self.relation_width == 0 || self.relation_heads == 0 {
            return bad("network widths and relation heads must be >= 1");
        }
        if self.eval_every == 0 {
            return bad("eval_every must be >= 1");
        }
        Ok(())
    }
}
