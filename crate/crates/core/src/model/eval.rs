use serde::{Deserialize, Serialize};

use super::erm::ErmModel;
use super::multihead::MultiHeadModel;
use crate::data::{DomainDataset, DomainId, Example, Split, TaskKind};
use crate::error::{Error, Result};
use crate::numerics::argmax;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Accuracy,
    Mse,
}

impl Metric {
    pub fn for_task(task: TaskKind) -> Self {
        match task {
            TaskKind::Classification { .. } => Metric::Accuracy,
            TaskKind::Regression => Metric::Mse,
        }
    }

    pub fn higher_is_better(self) -> bool {
        self == Metric::Accuracy
    }

    /// Whether `a` is strictly better than `b`.
    pub fn better(self, a: f64, b: f64) -> bool {
        if self.higher_is_better() {
            a > b
        } else {
            a < b
        }
    }

    /// Worst value among `values`.
    pub fn worst(self, values: impl IntoIterator<Item = f64>) -> f64 {
        let it = values.into_iter();
        if self.higher_is_better() {
            it.fold(f64::INFINITY, f64::min)
        } else {
            it.fold(f64::NEG_INFINITY, f64::max)
        }
    }

    /// Score of one prediction: 0/1 correctness or squared error.
    pub fn score(self, output: &[f64], ex: &Example) -> f64 {
        match self {
            Metric::Accuracy => f64::from(u8::from(argmax(output) == ex.label())),
            Metric::Mse => (output[0] - ex.y).powi(2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainMetric {
    pub domain: DomainId,
    pub examples: usize,
    pub value: f64,
}

/// Per-domain metric over one split with its mean and worst value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub metric: Metric,
    pub split: Split,
    pub per_domain: Vec<DomainMetric>,
    pub mean: f64,
    pub worst: f64,
}

impl MetricsReport {
    pub fn from_domains(metric: Metric, split: Split, per_domain: Vec<DomainMetric>) -> Result<Self> {
        if per_domain.is_empty() {
            return Err(Error::InvalidDataset(format!("split {split} has no domains")));
        }
        let mean = per_domain.iter().map(|d| d.value).sum::<f64>() / per_domain.len() as f64;
        let worst = metric.worst(per_domain.iter().map(|d| d.value));
        Ok(Self {
            metric,
            split,
            per_domain,
            mean,
            worst,
        })
    }

    pub fn get(&self, domain: DomainId) -> Option<f64> {
        self.per_domain.iter().find(|d| d.domain == domain).map(|d| d.value)
    }
}

/// Mean metric of `predict` over the examples of one domain.
pub fn domain_metric<F>(ds: &DomainDataset, domain: DomainId, mut predict: F) -> Result<DomainMetric>
where
    F: FnMut(&Example) -> Result<Vec<f64>>,
{
    let metric = Metric::for_task(ds.task());
    let (mut total, mut count) = (0.0, 0usize);
    for ex in ds.examples_of(domain) {
        total += metric.score(&predict(ex)?, ex);
        count += 1;
    }
    if count == 0 {
        return Err(Error::EmptyDomain(domain));
    }
    Ok(DomainMetric {
        domain,
        examples: count,
        value: total / count as f64,
    })
}

/// Evaluates `predict` on every domain of `split`. The closure receives the
/// example and returns the model output (logits, probabilities or value).
pub fn evaluate<F>(ds: &DomainDataset, split: Split, mut predict: F) -> Result<MetricsReport>
where
    F: FnMut(&Example) -> Result<Vec<f64>>,
{
    let per_domain = ds
        .domains(split)
        .into_iter()
        .map(|d| domain_metric(ds, d, &mut predict))
        .collect::<Result<Vec<_>>>()?;
    MetricsReport::from_domains(Metric::for_task(ds.task()), split, per_domain)
}

/// Relation-weighted inference, one relation row per target domain.
pub fn evaluate_d3g(model: &MultiHeadModel, ds: &DomainDataset, split: Split) -> Result<MetricsReport> {
    let per_domain = ds
        .domains(split)
        .into_iter()
        .map(|d| {
            let row = model.relation_row(ds.meta_table(), d)?;
            domain_metric(ds, d, |ex| model.infer(&row, &ex.x))
        })
        .collect::<Result<Vec<_>>>()?;
    MetricsReport::from_domains(Metric::for_task(ds.task()), split, per_domain)
}

/// Plain average of all heads.
pub fn evaluate_uniform(model: &MultiHeadModel, ds: &DomainDataset, split: Split) -> Result<MetricsReport> {
    evaluate(ds, split, |ex| model.infer_uniform(&ex.x))
}

pub fn evaluate_erm(model: &ErmModel, ds: &DomainDataset, split: Split) -> Result<MetricsReport> {
    evaluate(ds, split, |ex| model.predict(&ex.x, ds.meta(ex.domain)?))
}
