use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::EpochRef;
use super::recording::Stage;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingMode {
    /// Every scored epoch once per pass, unit weights.
    Baseline,
    /// Baseline sampling with inverse-class-frequency loss weights.
    Weighted,
    /// Per-class quotas of `1/K` of the pass: minority classes oversampled, N2 undersampled.
    Balanced,
}

impl std::str::FromStr for SamplingMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "baseline" => Ok(SamplingMode::Baseline),
            "weighted" => Ok(SamplingMode::Weighted),
            "balanced" => Ok(SamplingMode::Balanced),
            _ => Err(format!("unknown mode `{s}` (baseline|weighted|balanced)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub mode: SamplingMode,
    pub batch_size: usize,
    pub seed: u64,
    /// Weighted mode only: use class frequencies over the whole training set
    /// instead of within each batch.
    pub global_weights: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            mode: SamplingMode::Baseline,
            batch_size: 16,
            seed: 0,
            global_weights: false,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub refs: Vec<EpochRef>,
    pub weights: Vec<f64>,
}

impl Batch {
    pub fn labels(&self) -> Vec<usize> {
        self.refs.iter().map(|r| r.stage.index()).collect()
    }
}

fn pass_rng(seed: u64, pass: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(pass);
    rng
}

/// `1 / count` of each epoch's class among `refs`.
fn inverse_frequency(refs: &[EpochRef], counts: &[usize; Stage::COUNT]) -> Vec<f64> {
    refs.iter().map(|r| 1.0 / counts[r.stage.index()] as f64).collect()
}

fn count(refs: &[EpochRef]) -> [usize; Stage::COUNT] {
    let mut c = [0; Stage::COUNT];
    for r in refs {
        c[r.stage.index()] += 1;
    }
    c
}

/// Epoch order for one pass under balanced sampling.
///
/// The pass keeps the dataset's size and gives each present class an equal
/// quota. Classes above quota are subsampled without replacement. Classes
/// below quota contribute every epoch plus draws with replacement.
fn balanced_pass(labeled: &[EpochRef], rng: &mut ChaCha8Rng) -> Vec<EpochRef> {
    let mut by_class: Vec<Vec<EpochRef>> = vec![Vec::new(); Stage::COUNT];
    for r in labeled {
        by_class[r.stage.index()].push(*r);
    }
    let present: Vec<usize> = (0..Stage::COUNT).filter(|&k| !by_class[k].is_empty()).collect();
    for k in (0..Stage::COUNT).filter(|k| by_class[*k].is_empty()) {
        log::warn!("balanced sampling: class {} absent, not oversampled", Stage::ALL[k]);
    }
    if present.is_empty() {
        return Vec::new();
    }
    let total = labeled.len();
    let base = total / present.len();
    let extra = total % present.len();
    let mut out = Vec::with_capacity(total);
    for (i, &k) in present.iter().enumerate() {
        let quota = base + usize::from(i < extra);
        let pool = &by_class[k];
        if quota <= pool.len() {
            out.extend(pool.choose_multiple(rng, quota).copied());
        } else {
            out.extend_from_slice(pool);
            for _ in pool.len()..quota {
                out.push(pool[rng.random_range(0..pool.len())]);
            }
        }
    }
    out.shuffle(rng);
    out
}

/// Batches for pass `pass`; a pure function of the labeled set, config and pass index.
///
/// The final batch of a pass may be short.
pub fn make_batches(labeled: &[EpochRef], config: &SamplerConfig, pass: u64) -> Result<Vec<Batch>> {
    config.validate()?;
    let mut rng = pass_rng(config.seed, pass);
    let order = match config.mode {
        SamplingMode::Baseline | SamplingMode::Weighted => {
            let mut v = labeled.to_vec();
            v.shuffle(&mut rng);
            v
        }
        SamplingMode::Balanced => balanced_pass(labeled, &mut rng),
    };
    let global = count(labeled);
    Ok(order
        .chunks(config.batch_size)
        .map(|refs| {
            let weights = match config.mode {
                SamplingMode::Weighted if config.global_weights => inverse_frequency(refs, &global),
                SamplingMode::Weighted => inverse_frequency(refs, &count(refs)),
                _ => vec![1.0; refs.len()],
            };
            Batch {
                refs: refs.to_vec(),
                weights,
            }
        })
        .collect())
}

/// Number of batches every pass yields (balanced passes keep the dataset size).
pub fn batches_per_pass(labeled: &[EpochRef], batch_size: usize) -> usize {
    labeled.len().div_ceil(batch_size.max(1))
}
