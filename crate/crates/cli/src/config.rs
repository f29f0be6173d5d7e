use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use labelcon::sampler::SamplerStrategy;
use labelcon::trainer::{EpochConfig, Setting, TrainConfig, DEFAULT_ALPHA};
use serde::{Deserialize, Serialize};

use crate::UsageError;

/// Everything `train` needs, after flags and the optional config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub setting: Setting,
    pub target: Option<String>,
    pub seed: u64,
    pub alpha: f64,
    pub sampler: SamplerStrategy,
    pub epochs: EpochConfig,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            setting: Setting::ZeroShot,
            target: None,
            seed: 0,
            alpha: DEFAULT_ALPHA,
            sampler: SamplerStrategy::Random,
            epochs: EpochConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

impl RunConfig {
    /// Values in the TOML file at `path` replace the ones set by flags.
    pub fn override_from(self, path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let over: toml::Value = toml::from_str(&text)
            .map_err(|e| UsageError(format!("config {}: {e}", path.display())))?;
        let mut base = toml::Value::try_from(&self)?;
        merge(&mut base, over);
        let merged: RunConfig = base
            .try_into()
            .map_err(|e| UsageError(format!("config {}: {e}", path.display())))?;
        Ok(merged)
    }

    pub fn target_language(&self) -> Result<String> {
        match (&self.setting, &self.target) {
            (_, Some(t)) if !t.is_empty() => Ok(t.clone()),
            (Setting::FewShot, _) => Err(UsageError("few-shot training needs --target".into()).into()),
            (Setting::ZeroShot, _) => Ok("all".into()),
        }
    }
}
