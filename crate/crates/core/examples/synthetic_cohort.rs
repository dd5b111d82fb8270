//! Generates a few synthetic recordings and writes them as `.psgr` plus hypnogram text.
//!
//! Run with `cargo run --example synthetic_cohort -- <out-dir>`.

use std::path::PathBuf;

use psg_stager::data::{synth_recording_with, write_hypnogram, write_native, Stage, StageChain, SynthOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("psg-synth"));
    std::fs::create_dir_all(&out)?;

    for (seed, chain) in [(1, StageChain::default()), (2, StageChain::n2_heavy())] {
        let opts = SynthOptions { chain, ..Default::default() };
        let rec = synth_recording_with(seed, 120, None, &opts);
        let labels = rec.labels.clone().unwrap_or_default();
        write_native(&rec, &out.join(format!("{}.psgr", rec.id)))?;
        write_hypnogram(&labels, &out.join(format!("{}.hyp", rec.id)))?;

        let mut counts = [0usize; Stage::COUNT];
        for s in labels.iter().flatten() {
            counts[s.index()] += 1;
        }
        let summary: Vec<String> = Stage::ALL.iter().map(|s| format!("{}={}", s.name(), counts[s.index()])).collect();
        println!("{}: {} channels, {:.0} s, {}", rec.id, rec.channels.len(), rec.duration(), summary.join(" "));
    }
    println!("wrote {}", out.display());
    Ok(())
}
