//! Resample, filter, normalize and segment one recording, then save the epochs.

use psg_stager::data::{synth_recording, write_epochs, EpochRecording};
use psg_stager::signal::{preprocess_recording, PreprocessConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rec = synth_recording(7, 20, None);
    let (epochs, diag) = preprocess_recording(&rec, &PreprocessConfig::default())?;
    println!("{}: tensor {:?}", diag.recording, epochs.shape());
    for c in &diag.channels {
        println!(
            "  {:<6} {:>5.0} Hz -> {} samples, q05 {:+.3} q95 {:+.3}, {:.1}% within ±1.5",
            c.name,
            c.source_fs,
            c.resampled_samples,
            c.q_low,
            c.q_high,
            100.0 * c.within_1_5
        );
    }

    let out = std::env::temp_dir().join(format!("{}.psge", rec.id));
    write_epochs(&EpochRecording::new(rec.id.clone(), epochs, rec.labels.as_deref())?, &out)?;
    println!("wrote {}", out.display());
    Ok(())
}
