//! Trains a reduced network on synthetic recordings and evaluates it on held-out ones.
//!
//! `cargo run --release --example train_desk -- [steps] [baseline|weighted|balanced]`

use psg_stager::data::{synth_recording, EpochDataset, EpochRecording, SamplingMode};
use psg_stager::metrics::confusion_csv;
use psg_stager::resnet::ModelConfig;
use psg_stager::signal::{preprocess_recording, PreprocessConfig};
use psg_stager::train::{train_loop, TrainConfig, TRAIN_LOG};

fn cohort(seeds: std::ops::Range<u64>) -> psg_stager::Result<EpochDataset> {
    let mut recs = Vec::new();
    for seed in seeds {
        let rec = synth_recording(seed, 40, None);
        let (x, _) = preprocess_recording(&rec, &PreprocessConfig::default())?;
        recs.push(EpochRecording::new(rec.id.clone(), x, rec.labels.as_deref())?);
    }
    EpochDataset::new(recs)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let steps = args.next().map(|s| s.parse()).transpose()?.unwrap_or(300);
    let mode: SamplingMode = args.next().map(|s| s.parse()).transpose()?.unwrap_or(SamplingMode::Balanced);

    let train = cohort(0..24)?;
    let eval = cohort(100..104)?;
    println!("train class counts {:?}", train.class_counts());

    let dir = tempfile::tempdir()?;
    let mut config = TrainConfig::new(mode, steps);
    config.eval_every = 100;
    config.checkpoint_dir = Some(dir.path().to_path_buf());
    config.model = ModelConfig {
        blocks_per_layer: 1,
        base_filters: 4,
        initial_filters: 16,
        ..Default::default()
    };

    let out = train_loop(&config, &train, Some(&eval))?;
    for e in out.log.iter().filter(|e| e.eval_accuracy.is_some()) {
        println!("step {:>5}  lr {:.0e}  cost {:.3}  eval accuracy {:.3}", e.step, e.lr, e.cost, e.eval_accuracy.unwrap_or_default());
    }
    if let Some(ev) = &out.last_eval {
        print!("{}", confusion_csv(&ev.confusion));
    }
    println!("log: {} lines in {TRAIN_LOG}", std::fs::read_to_string(dir.path().join(TRAIN_LOG))?.lines().count());
    Ok(())
}
