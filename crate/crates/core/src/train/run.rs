use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::cost::batch_cost;
use super::eval::{evaluate, Evaluation};
use crate::data::{batches_per_pass, make_batches, Batch, EpochDataset};
use crate::error::{Error, Result};
use crate::nn::softmax;
use crate::optim::{adam_step, lr_at, AdamState};
use crate::resnet::{argmax, build_model, load_checkpoint, save_checkpoint, Checkpoint, ModelParams};
use crate::tensor::Tensor;
use crate::util::atomic_write;

pub const LATEST_CHECKPOINT: &str = "latest.ckpt";
pub const BEST_CHECKPOINT: &str = "best.ckpt";
pub const BEST_RECORD: &str = "best.json";
pub const TRAIN_LOG: &str = "train.jsonl";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainLogEntry {
    /// Optimizer steps completed, including this one.
    pub step: u64,
    pub lr: f64,
    pub cost: f64,
    pub batch_accuracy: f64,
    /// Accuracy over the batches of the current pass seen by this process.
    pub running_accuracy: f64,
    /// Seconds since this process started training.
    pub wall_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_kappa: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestRecord {
    pub step: u64,
    pub accuracy: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub params: ModelParams<f32>,
    pub optimizer: AdamState<f32>,
    pub log: Vec<TrainLogEntry>,
    pub best: Option<BestRecord>,
    pub last_eval: Option<Evaluation>,
}

#[derive(Serialize)]
struct DumpEntry<'a> {
    recording: &'a str,
    epoch: usize,
    stage: String,
}

#[derive(Serialize)]
struct NonFiniteDump<'a> {
    step: u64,
    reason: &'a str,
    batch: Vec<DumpEntry<'a>>,
}

fn fresh_optimizer(params: &ModelParams<f32>) -> AdamState<f32> {
    let shapes = params.trainable_shapes();
    let refs: Vec<&[usize]> = shapes.iter().map(Vec::as_slice).collect();
    AdamState::new(&refs)
}

fn halt(dir: Option<&Path>, data: &EpochDataset, batch: &Batch, step: u64, reason: &str) -> Error {
    let entries: Vec<DumpEntry> = batch
        .refs
        .iter()
        .map(|r| DumpEntry {
            recording: &data.recordings[r.recording].id,
            epoch: r.epoch,
            stage: r.stage.to_string(),
        })
        .collect();
    let ids: Vec<String> = entries.iter().map(|e| format!("{}#{}", e.recording, e.epoch)).collect();
    let dump = NonFiniteDump {
        step,
        reason,
        batch: entries,
    };
    let mut where_ = String::new();
    if let Some(dir) = dir {
        let path = dir.join(format!("nonfinite_step{step}.json"));
        match serde_json::to_vec_pretty(&dump).map_err(Error::from).and_then(|b| atomic_write(&path, &b)) {
            Ok(()) => where_ = format!(" (dump: {})", path.display()),
            Err(e) => log::error!("could not write non-finite dump: {e}"),
        }
    }
    Error::NonFinite(format!("step {step}: {reason}; batch [{}]{where_}", ids.join(", ")))
}

/// One optimizer step on `batch`. Returns the cost and the number of correct argmax predictions.
///
/// Nothing in `params` or `optimizer` changes when an error is returned.
pub fn train_step(
    params: &mut ModelParams<f32>,
    optimizer: &mut AdamState<f32>,
    config: &TrainConfig,
    input: &Tensor<f32>,
    batch: &Batch,
) -> Result<(f64, usize)> {
    let labels = batch.labels();
    let k = params.config.num_classes;
    let (logits, trace) = params.forward_train(input)?;
    let probs = softmax(&logits)?;
    let probs64: Vec<f64> = probs.data().iter().map(|&v| f64::from(v)).collect();
    let cost = batch_cost(&probs64, k, &labels, &batch.weights, config.mode)?;
    if !cost.cost.is_finite() {
        return Err(Error::NonFinite(format!("batch cost {}", cost.cost)));
    }
    let correct = probs64
        .chunks(k)
        .zip(&labels)
        .filter(|(row, &y)| argmax(row) == y)
        .count();

    let mut grad = probs;
    for (i, (&y, &s)) in labels.iter().zip(&cost.grad_scale).enumerate() {
        let row = grad.row_mut(i);
        row[y] -= 1.0;
        for v in row.iter_mut() {
            *v *= s as f32;
        }
    }
    let grads = params.backward(&trace, &grad)?;
    let grad_refs = grads.trainable();
    params.with_param_muts(|muts| adam_step(muts, &grad_refs, optimizer, &config.optim))?;
    params.update_running_stats(&trace);
    Ok((cost.cost, correct))
}

/// The JSON-lines log, rewritten atomically at every checkpoint so a killed
/// run never leaves a torn line behind.
struct Outputs {
    dir: PathBuf,
    text: String,
}

impl Outputs {
    /// Keeps earlier entries up to `resume_step` when resuming.
    fn open(dir: &Path, resume_step: u64) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut text = String::new();
        if resume_step > 0 {
            if let Ok(old) = std::fs::read_to_string(dir.join(TRAIN_LOG)) {
                for line in old.lines() {
                    match serde_json::from_str::<TrainLogEntry>(line) {
                        Ok(e) if e.step <= resume_step => {
                            text.push_str(line);
                            text.push('\n');
                        }
                        _ => break,
                    }
                }
            }
        }
        Ok(Outputs {
            dir: dir.to_path_buf(),
            text,
        })
    }

    fn write(&mut self, entry: &TrainLogEntry) -> Result<()> {
        self.text.push_str(&serde_json::to_string(entry)?);
        self.text.push('\n');
        Ok(())
    }

    fn flush(&mut self) -> Result<()> {
        atomic_write(&self.dir.join(TRAIN_LOG), self.text.as_bytes())
    }
}

fn read_best(dir: &Path) -> Option<BestRecord> {
    let bytes = std::fs::read(dir.join(BEST_RECORD)).ok()?;
    serde_json::from_slice(&bytes).ok()
}

/// Trains per `config`, resuming from `checkpoint_dir/latest.ckpt` when
/// `config.resume` is set and the file exists.
pub fn train_loop(config: &TrainConfig, train: &EpochDataset, eval: Option<&EpochDataset>) -> Result<TrainOutcome> {
    let start = match (&config.checkpoint_dir, config.resume) {
        (Some(dir), true) if dir.join(LATEST_CHECKPOINT).exists() => {
            let ckpt = load_checkpoint(&dir.join(LATEST_CHECKPOINT))?;
            log::info!("resuming from {}", dir.join(LATEST_CHECKPOINT).display());
            Some(ckpt)
        }
        _ => None,
    };
    train_from(config, train, eval, start)
}

/// Trains from `start` (parameters and optimizer state) or from a fresh
/// initialization, up to `config.max_steps` optimizer steps in total.
///
/// Single-threaded runs are bit-for-bit reproducible: batch `s` is always batch
/// `s mod P` of pass `s / P`, where `P` batches make up one pass.
pub fn train_from(config: &TrainConfig, train: &EpochDataset, eval: Option<&EpochDataset>, start: Option<Checkpoint>) -> Result<TrainOutcome> {
    config.validate()?;
    let labeled = train.labeled();
    if labeled.is_empty() {
        return Err(Error::Config("training set has no scored epochs".into()));
    }
    let (mut params, mut optimizer) = match start {
        Some(c) => {
            if c.params.config != config.model {
                return Err(Error::Config("checkpoint model config differs from the run's [model] section".into()));
            }
            let opt = c.optimizer.unwrap_or_else(|| fresh_optimizer(&c.params));
            (c.params, opt)
        }
        None => {
            let p = build_model::<f32>(&config.model, config.init_seed)?;
            let o = fresh_optimizer(&p);
            (p, o)
        }
    };
    let resumed = optimizer.step > 0;
    let dir = config.checkpoint_dir.as_deref();
    let mut outputs = dir.map(|d| Outputs::open(d, optimizer.step)).transpose()?;
    let mut best = if resumed { dir.and_then(read_best) } else { None };
    let threads = config.threads.unwrap_or(1);
    let sampler = config.sampler();
    let per_pass = batches_per_pass(labeled, config.batch_size) as u64;
    let clock = Instant::now();

    let mut log = Vec::new();
    let mut pass_batches: Option<(u64, Vec<Batch>)> = None;
    let (mut pass_correct, mut pass_seen) = (0usize, 0usize);
    let mut last_eval = None;

    while optimizer.step < config.max_steps {
        let step = optimizer.step;
        let pass = step / per_pass;
        if pass_batches.as_ref().is_none_or(|(p, _)| *p != pass) {
            pass_batches = Some((pass, make_batches(labeled, &sampler, pass)?));
            (pass_correct, pass_seen) = (0, 0);
        }
        let batch = &pass_batches.as_ref().expect("set above").1[(step % per_pass) as usize];
        let input = train.gather(&batch.refs);
        let lr = lr_at(step, &config.optim);
        let (cost, correct) = match train_step(&mut params, &mut optimizer, config, &input, batch) {
            Ok(v) => v,
            Err(Error::NonFinite(reason)) => {
                if let Some(o) = outputs.as_mut() {
                    o.flush()?;
                }
                return Err(halt(dir, train, batch, step + 1, &reason));
            }
            Err(e) => return Err(e),
        };
        pass_correct += correct;
        pass_seen += batch.refs.len();
        let mut entry = TrainLogEntry {
            step: optimizer.step,
            lr,
            cost,
            batch_accuracy: correct as f64 / batch.refs.len() as f64,
            running_accuracy: pass_correct as f64 / pass_seen as f64,
            wall_time: clock.elapsed().as_secs_f64(),
            eval_accuracy: None,
            eval_kappa: None,
        };

        let done = optimizer.step == config.max_steps;
        let checkpoint_due = done || (config.eval_every > 0 && optimizer.step % config.eval_every == 0);
        if checkpoint_due {
            if let Some(eval) = eval.filter(|e| !e.labeled().is_empty()) {
                let ev = evaluate(&params, eval, threads)?;
                let acc = ev.report.aggregate.accuracy;
                entry.eval_accuracy = Some(acc);
                entry.eval_kappa = Some(ev.report.aggregate.kappa);
                log::info!("step {}: cost {cost:.4}, eval accuracy {acc:.4}", optimizer.step);
                if best.is_none_or(|b| acc > b.accuracy) {
                    let record = BestRecord {
                        step: optimizer.step,
                        accuracy: acc,
                    };
                    best = Some(record);
                    if let Some(dir) = dir {
                        save_checkpoint(&dir.join(BEST_CHECKPOINT), &params, Some(&optimizer))?;
                        atomic_write(&dir.join(BEST_RECORD), &serde_json::to_vec(&record)?)?;
                    }
                }
                last_eval = Some(ev);
            } else {
                log::info!("step {}: cost {cost:.4}", optimizer.step);
            }
            if let Some(dir) = dir {
                save_checkpoint(&dir.join(LATEST_CHECKPOINT), &params, Some(&optimizer))?;
            }
        }
        if let Some(o) = outputs.as_mut() {
            o.write(&entry)?;
            if checkpoint_due {
                o.flush()?;
            }
        }
        log.push(entry);
    }
    if let Some(o) = outputs.as_mut() {
        o.flush()?;
    }
    Ok(TrainOutcome {
        params,
        optimizer,
        log,
        best,
        last_eval,
    })
}
