use psg_stager::resnet::{build_model, ModelConfig};
use psg_stager::Tensor;

fn main() -> psg_stager::Result<()> {
    let cfg = ModelConfig::default();
    println!("block layer widths {:?}", cfg.channel_progression());
    println!("time axis          {:?}", cfg.time_progression());
    println!("weighted layers    {}", cfg.weighted_layer_count());

    let params = build_model::<f32>(&cfg, 1)?;
    println!("trainable values   {}", params.num_trainable());
    for (name, shape) in params.trainable_names().iter().zip(params.trainable_shapes()).take(8) {
        println!("  {name:<24} {shape:?}");
    }

    let x = Tensor::<f32>::zeros(&[2, cfg.input_channels, cfg.epoch_samples]);
    let probs = params.predict(&x)?;
    println!("(2, 5, 6000) -> {} rows of {} probabilities", probs.len(), probs[0].probs.len());
    Ok(())
}
