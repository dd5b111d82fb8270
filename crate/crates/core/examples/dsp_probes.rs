use psg_stager::signal::{butterworth, filter_zero_phase, resample, Band};

fn sine(freq: f64, fs: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| (2.0 * std::f64::consts::PI * freq * i as f64 / fs).sin()).collect()
}

fn fit(y: &[f64], freq: f64, fs: f64) -> (f64, f64) {
    let w = 2.0 * std::f64::consts::PI * freq / fs;
    let (mut s, mut c) = (0.0, 0.0);
    for (n, v) in y.iter().enumerate() {
        s += v * (w * n as f64).sin();
        c += v * (w * n as f64).cos();
    }
    let (a, b) = (2.0 * s / y.len() as f64, 2.0 * c / y.len() as f64);
    ((a * a + b * b).sqrt(), b.atan2(a).to_degrees())
}

fn main() -> psg_stager::Result<()> {
    let fs = 200.0;
    let band = Band::bandpass(0.3, 35.0);
    let sos = butterworth(2, band, fs)?;
    println!("0.3-35 Hz band-pass: {} sections, pad {} samples", sos.sections.len(), sos.pad_len());

    println!("freq  one-pass gain  zero-phase amp  phase");
    for f in [0.1, 1.0, 10.0, 30.0, 50.0, 60.0, 90.0] {
        let y = filter_zero_phase(&sine(f, fs, 12000), band, fs, 2)?;
        let (amp, phase) = fit(&y[2000..10000], f, fs);
        println!("{f:>5}  {:>12.4}  {amp:>14.4}  {phase:+.3}°", sos.gain_at(f, fs));
    }

    for fs_in in [100.0, 128.0, 256.0, 500.0, 512.0] {
        let y = resample(&sine(10.0, fs_in, fs_in as usize * 30), fs_in, fs)?;
        let (amp, _) = fit(&y[1000..5000], 10.0, fs);
        println!("{fs_in} Hz -> 200 Hz: {} samples, 10 Hz amplitude {amp:.5}", y.len());
    }
    Ok(())
}
