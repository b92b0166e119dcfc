//! Domain-labelled datasets, synthetic benchmark generators and CSV ingestion.

mod dg15;
mod io;
mod spatial;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use dg15::{gen_dg15, gen_dg15_with, Dg15Config, DG15_LAYOUT};
pub use io::{load_dataset, read_meta, read_splits, write_dataset, DatasetPaths, SplitRule, SplitSource};
pub use spatial::{gen_spatial_regression, GridConfig, SpatialWorld};

use crate::error::{Error, Result};
use crate::relations::Adjacency;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DomainId(pub u32);

impl fmt::Display for DomainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "valid" | "val" | "validation" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TaskKind {
    Classification { classes: usize },
    Regression,
}

impl TaskKind {
    /// Width of a prediction head's output.
    pub fn output_dim(self) -> usize {
        match self {
            TaskKind::Classification { classes } => classes,
            TaskKind::Regression => 1,
        }
    }
}

/// One labelled example. For classification `y` holds the class index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub domain: DomainId,
    pub x: Vec<f64>,
    pub y: f64,
}

impl Example {
    pub fn label(&self) -> usize {
        self.y as usize
    }
}

/// Examples grouped by domain together with per-domain meta-data and the
/// train/valid/test assignment of each domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainDataset {
    task: TaskKind,
    examples: Vec<Example>,
    meta: BTreeMap<DomainId, Vec<f64>>,
    splits: BTreeMap<DomainId, Split>,
    adjacency: Option<Adjacency>,
}

impl DomainDataset {
    pub fn new(
        task: TaskKind,
        examples: Vec<Example>,
        meta: BTreeMap<DomainId, Vec<f64>>,
        splits: BTreeMap<DomainId, Split>,
    ) -> Result<Self> {
        let ds = Self {
            task,
            examples,
            meta,
            splits,
            adjacency: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn with_adjacency(mut self, adjacency: Adjacency) -> Result<Self> {
        for id in adjacency.domains() {
            if !self.meta.contains_key(&id) {
                return Err(Error::UnknownDomain(id));
            }
        }
        self.adjacency = Some(adjacency);
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if self.examples.is_empty() {
            return Err(Error::InvalidDataset("no examples".into()));
        }
        let x_dim = self.examples[0].x.len();
        if x_dim == 0 {
            return Err(Error::InvalidDataset("examples have no features".into()));
        }
        let mut counts: BTreeMap<DomainId, usize> = BTreeMap::new();
        for ex in &self.examples {
            if !self.meta.contains_key(&ex.domain) {
                return Err(Error::MissingMeta(ex.domain));
            }
            if !self.splits.contains_key(&ex.domain) {
                return Err(Error::MissingSplit(ex.domain));
            }
            if ex.x.len() != x_dim {
                return Err(Error::DimensionMismatch {
                    context: "example features",
                    expected: x_dim,
                    actual: ex.x.len(),
                });
            }
            if ex.x.iter().any(|v| !v.is_finite()) || !ex.y.is_finite() {
                return Err(Error::NonFinite("example values"));
            }
            if let TaskKind::Classification { classes } = self.task {
                if ex.y < 0.0 || ex.y.fract() != 0.0 || ex.y as usize >= classes {
                    return Err(Error::InvalidDataset(format!(
                        "label {} is not a class index below {classes}",
                        ex.y
                    )));
                }
            }
            *counts.entry(ex.domain).or_default() += 1;
        }
        let meta_dim = self.meta.values().next().map_or(0, Vec::len);
        for (id, m) in &self.meta {
            if m.len() != meta_dim || meta_dim == 0 {
                return Err(Error::InvalidDataset(format!(
                    "meta-data for domain {id} has {} entries, expected {meta_dim}",
                    m.len()
                )));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("meta-data"));
            }
        }
        for id in self.splits.keys() {
            if !counts.contains_key(id) {
                return Err(Error::EmptyDomain(*id));
            }
        }
        Ok(())
    }

    pub fn task(&self) -> TaskKind {
        self.task
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn feature_dim(&self) -> usize {
        self.examples[0].x.len()
    }

    pub fn meta_dim(&self) -> usize {
        self.meta.values().next().map_or(0, Vec::len)
    }

    pub fn meta(&self, id: DomainId) -> Result<&[f64]> {
        self.meta.get(&id).map(Vec::as_slice).ok_or(Error::MissingMeta(id))
    }

    pub fn meta_table(&self) -> &BTreeMap<DomainId, Vec<f64>> {
        &self.meta
    }

    pub fn splits(&self) -> &BTreeMap<DomainId, Split> {
        &self.splits
    }

    pub fn split_of(&self, id: DomainId) -> Option<Split> {
        self.splits.get(&id).copied()
    }

    pub fn adjacency(&self) -> Option<&Adjacency> {
        self.adjacency.as_ref()
    }

    /// Domains assigned to `split`, in ascending id order.
    pub fn domains(&self, split: Split) -> Vec<DomainId> {
        self.splits
            .iter()
            .filter(|(_, &s)| s == split)
            .map(|(&id, _)| id)
            .collect()
    }

    pub fn examples_in(&self, split: Split) -> impl Iterator<Item = &Example> + '_ {
        self.examples
            .iter()
            .filter(move |ex| self.splits.get(&ex.domain) == Some(&split))
    }

    pub fn examples_of(&self, domain: DomainId) -> impl Iterator<Item = &Example> + '_ {
        self.examples.iter().filter(move |ex| ex.domain == domain)
    }
}
