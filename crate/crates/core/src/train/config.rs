use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{SamplerConfig, SamplingMode};
use crate::error::{Error, Result};
use crate::optim::OptimConfig;
use crate::resnet::ModelConfig;
use crate::util::read_file;

fn default_batch_size() -> usize {
    16
}

fn default_eval_every() -> u64 {
    1000
}

fn default_seed() -> u64 {
    1
}

/// Training run settings, read from TOML with the same field names.
///
/// `max_steps` has no default and must be given.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_mode")]
    pub mode: SamplingMode,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    pub max_steps: u64,
    /// Steps between evaluations and checkpoint writes; 0 evaluates only at the end.
    #[serde(default = "default_eval_every")]
    pub eval_every: u64,
    /// Directory for `latest.ckpt`, `best.ckpt`, `best.json` and `train.jsonl`.
    #[serde(default)]
    pub checkpoint_dir: Option<PathBuf>,
    /// Directory of `.psge` files.
    #[serde(default)]
    pub train_data: Option<PathBuf>,
    #[serde(default)]
    pub eval_data: Option<PathBuf>,
    #[serde(default = "default_seed")]
    pub init_seed: u64,
    #[serde(default = "default_seed")]
    pub sampler_seed: u64,
    /// Weighted mode: class frequencies from the whole training set instead of the batch.
    #[serde(default)]
    pub global_weights: bool,
    /// Continue from `latest.ckpt` in `checkpoint_dir` when it exists.
    #[serde(default)]
    pub resume: bool,
    /// Worker threads for evaluation.
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub optim: OptimConfig,
    #[serde(default)]
    pub model: ModelConfig,
}

fn default_mode() -> SamplingMode {
    SamplingMode::Baseline
}

impl TrainConfig {
    pub fn new(mode: SamplingMode, max_steps: u64) -> Self {
        TrainConfig {
            mode,
            batch_size: default_batch_size(),
            max_steps,
            eval_every: default_eval_every(),
            checkpoint_dir: None,
            train_data: None,
            eval_data: None,
            init_seed: default_seed(),
            sampler_seed: default_seed(),
            global_weights: false,
            resume: false,
            threads: None,
            optim: OptimConfig::default(),
            model: ModelConfig::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: TrainConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses a config file; relative paths inside it are taken relative to its directory.
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let bytes = read_file(path)?;
        let text = String::from_utf8(bytes).map_err(|e| Error::parse(path, e.utf8_error().valid_up_to() as u64, "not UTF-8"))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.checkpoint_dir, &mut cfg.train_data, &mut cfg.eval_data].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn sampler(&self) -> SamplerConfig {
        SamplerConfig {
            mode: self.mode,
            batch_size: self.batch_size,
            seed: self.sampler_seed,
            global_weights: self.global_weights,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be > 0".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be >= 1".into()));
        }
        self.sampler().validate()?;
        self.optim.validate()?;
        self.model.validate()
    }
}
