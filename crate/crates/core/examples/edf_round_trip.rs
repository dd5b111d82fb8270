//! Writes a recording as EDF, then reads it back through a channel map.

use psg_stager::data::{read_edf, read_edf_signals, synth_recording, write_edf, ChannelMap};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rec = synth_recording(3, 4, None);
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("night.edf");
    write_edf(&rec, &path)?;

    let bytes = std::fs::read(&path)?;
    let (header, signals) = read_edf_signals(&bytes, &path)?;
    println!("{} records of {} s", header.records, header.record_duration);
    for (s, values) in header.signals.iter().zip(&signals) {
        println!("  {:<8} {:>6} samples  [{} .. {}]", s.label, values.len(), s.physical_min, s.physical_max);
    }

    // 16-bit quantization bounds the error by half a digital step
    let back = read_edf(&path, &ChannelMap::default())?;
    for (a, b) in rec.channels.iter().zip(&back.channels) {
        let err = a.samples.iter().zip(&b.samples).map(|(x, y)| (x - y).abs()).fold(0.0f32, f32::max);
        println!("  {:<6} max abs error {err:.2e}", a.name);
    }
    Ok(())
}
