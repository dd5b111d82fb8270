//! Class shares per pass under the three sampling modes, on an N2-heavy cohort.

use psg_stager::data::{make_batches, EpochRef, SamplerConfig, SamplingMode, Stage, StageChain};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> psg_stager::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let stages = StageChain::n2_heavy().sample(2000, &mut rng);
    let labeled: Vec<EpochRef> = stages
        .iter()
        .enumerate()
        .map(|(epoch, &stage)| EpochRef { recording: 0, epoch, stage })
        .collect();

    for mode in [SamplingMode::Baseline, SamplingMode::Weighted, SamplingMode::Balanced] {
        let config = SamplerConfig { mode, batch_size: 16, seed: 4, global_weights: false };
        let batches = make_batches(&labeled, &config, 0)?;
        let mut seen = [0usize; Stage::COUNT];
        let mut weight = [0.0f64; Stage::COUNT];
        for b in &batches {
            for (r, w) in b.refs.iter().zip(&b.weights) {
                seen[r.stage.index()] += 1;
                weight[r.stage.index()] += w;
            }
        }
        let total: usize = seen.iter().sum();
        let wsum: f64 = weight.iter().sum();
        println!("{mode:?}: {} batches", batches.len());
        for s in Stage::ALL {
            let k = s.index();
            println!("  {:<4} drawn {:>5.1}%  loss weight {:>5.1}%", s.name(), 100.0 * seen[k] as f64 / total as f64, 100.0 * weight[k] / wsum);
        }
    }
    Ok(())
}
