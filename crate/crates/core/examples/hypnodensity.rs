//! Per-epoch class probabilities for one night.
//!
//! Pass a checkpoint written by `psg-stager train` to use trained weights;
//! without one the network is freshly initialized and the output is only a shape demo.

use std::path::Path;

use psg_stager::data::{synth_recording, Stage};
use psg_stager::resnet::{build_model, load_checkpoint, ModelConfig};
use psg_stager::signal::{preprocess_recording, PreprocessConfig};

fn main() -> psg_stager::Result<()> {
    let params = match std::env::args().nth(1) {
        Some(p) => load_checkpoint(Path::new(&p))?.params,
        None => build_model::<f32>(&ModelConfig::default(), 1)?,
    };
    let rec = synth_recording(21, 12, None);
    let (epochs, _) = preprocess_recording(&rec, &PreprocessConfig::default())?;
    let density = params.hypnodensity(&epochs)?;

    println!("epoch  scored  {}", Stage::ALL.map(|s| format!("{:>6}", s.name())).join(""));
    let labels = rec.labels.unwrap_or_default();
    for (e, row) in density.iter().enumerate() {
        let scored = labels.get(e).copied().flatten().map_or("?", Stage::name);
        let cells: String = row.iter().map(|p| format!("{p:>6.3}")).collect();
        println!("{e:>5}  {scored:>6}  {cells}");
    }
    Ok(())
}
