//! Self-describing model checkpoints.
//!
//! A checkpoint is a single JSON document holding the model configs, every
//! parameter tensor, the optimizer state and the seeds that produced it.
//! Floats are written in shortest round-trip form, so save -> load -> save
//! reproduces the file byte for byte.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::optim::OptimizerState;

pub const CHECKPOINT_FORMAT: &str = "labelcon-checkpoint/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub run_seed: u64,
    pub init_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub class_names: Vec<String>,
    pub params: ModelParams,
    pub optimizer: Option<OptimizerState>,
    pub seeds: Seeds,
}

impl Checkpoint {
    pub fn new(
        class_names: Vec<String>,
        params: ModelParams,
        optimizer: Option<OptimizerState>,
        seeds: Seeds,
    ) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            class_names,
            params,
            optimizer,
            seeds,
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut bytes = serde_json::to_vec(self)?;
        bytes.push(b'\n');
        Ok(bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_slice(bytes)?;
        if ckpt.format != CHECKPOINT_FORMAT {
            return Err(Error::Config(format!(
                "unsupported checkpoint format '{}', expected '{CHECKPOINT_FORMAT}'",
                ckpt.format
            )));
        }
        ckpt.params.body_config.validate()?;
        ckpt.params.head_config.validate()?;
        if ckpt.class_names.len() != ckpt.params.num_classes() {
            return Err(Error::Config(format!(
                "checkpoint lists {} class names for a {}-class head",
                ckpt.class_names.len(),
                ckpt.params.num_classes()
            )));
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}
