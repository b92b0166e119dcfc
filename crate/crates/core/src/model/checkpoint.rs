use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::erm::ErmModel;
use super::multihead::MultiHeadModel;
use super::train::EpochRecord;
use crate::data::TaskKind;
use crate::error::{Error, Result};
use crate::util::write_atomic;

pub const CHECKPOINT_FORMAT: &str = "d3g-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", content = "params", rename_all = "lowercase")]
pub enum TrainedModel {
    D3g(MultiHeadModel),
    Erm(ErmModel),
}

impl TrainedModel {
    pub fn task(&self) -> TaskKind {
        match self {
            TrainedModel::D3g(m) => m.task(),
            TrainedModel::Erm(m) => m.task(),
        }
    }

    pub fn method(&self) -> &'static str {
        match self {
            TrainedModel::D3g(_) => "d3g",
            TrainedModel::Erm(_) => "erm",
        }
    }
}

/// Self-describing JSON checkpoint. Floats round-trip exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub task: TaskKind,
    pub config: TrainConfig,
    /// Epochs trained so far, across resumes.
    pub epochs_done: usize,
    pub history: Vec<EpochRecord>,
    pub model: TrainedModel,
}

impl Checkpoint {
    pub fn new(model: TrainedModel, config: TrainConfig, epochs_done: usize, history: Vec<EpochRecord>) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            task: model.task(),
            config,
            epochs_done,
            history,
            model,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &serde_json::to_vec_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let probe: serde_json::Value = serde_json::from_slice(&bytes)?;
        if probe.get("format").and_then(|v| v.as_str()) != Some(CHECKPOINT_FORMAT) {
            return Err(Error::Checkpoint(format!("{} is not a checkpoint", path.display())));
        }
        match probe.get("version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(CHECKPOINT_VERSION) => {}
            other => return Err(Error::Checkpoint(format!("unsupported version {other:?}"))),
        }
        let ckpt: Checkpoint = serde_json::from_value(probe)?;
        if ckpt.task != ckpt.model.task() {
            return Err(Error::Checkpoint("task kind does not match model".into()));
        }
        Ok(ckpt)
    }
}
