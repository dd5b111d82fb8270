//! Synthetic five-channel recordings with stage-specific spectral signatures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::recording::{Channel, Recording, Stage, EPOCH_SECONDS, PIPELINE_CHANNELS};

/// First-order Markov chain over stages, one transition per epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageChain {
    pub initial: Stage,
    /// `transitions[from][to]`; rows are renormalized before use.
    pub transitions: [[f64; Stage::COUNT]; Stage::COUNT],
}

impl Default for StageChain {
    /// Night-like cycling: W → N1 → N2 → N3 and back through N2 into REM.
    fn default() -> Self {
        StageChain {
            initial: Stage::W,
            transitions: [
                [0.88, 0.10, 0.02, 0.00, 0.00],
                [0.06, 0.64, 0.28, 0.00, 0.02],
                [0.02, 0.03, 0.86, 0.05, 0.04],
                [0.01, 0.01, 0.10, 0.88, 0.00],
                [0.04, 0.04, 0.04, 0.00, 0.88],
            ],
        }
    }
}

impl StageChain {
    /// Strongly N2-dominated (about 70% of epochs) with scarce N1 and N3.
    pub fn n2_heavy() -> Self {
        StageChain {
            initial: Stage::W,
            transitions: [
                [0.80, 0.08, 0.12, 0.00, 0.00],
                [0.05, 0.50, 0.45, 0.00, 0.00],
                [0.01, 0.015, 0.95, 0.012, 0.013],
                [0.00, 0.00, 0.25, 0.75, 0.00],
                [0.03, 0.02, 0.10, 0.00, 0.85],
            ],
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, epochs: usize, rng: &mut R) -> Vec<Stage> {
        let mut out = Vec::with_capacity(epochs);
        let mut s = self.initial;
        for _ in 0..epochs {
            out.push(s);
            let row = &self.transitions[s.index()];
            let total: f64 = row.iter().sum();
            let mut u = rng.random::<f64>() * total;
            let mut next = s;
            for (k, &p) in row.iter().enumerate() {
                if u < p {
                    next = Stage::ALL[k];
                    break;
                }
                u -= p;
            }
            s = next;
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthOptions {
    pub fs: f64,
    /// Signal-to-noise ratio of the added white noise, per channel and epoch.
    pub snr_db: f64,
    /// Per-channel gains are drawn log-uniformly from `[1/gain_jitter, gain_jitter]`.
    pub gain_jitter: f64,
    /// Share of epochs that blend in a neighbouring stage's recipe.
    pub transition_rate: f64,
    /// Upper end of the blend weight given to the neighbour (drawn from `[0.2, max_blend]`).
    pub max_blend: f64,
    pub chain: StageChain,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            fs: 200.0,
            snr_db: 5.0,
            gain_jitter: 1.25,
            transition_rate: 0.3,
            max_blend: 0.6,
            chain: StageChain::default(),
        }
    }
}

struct EpochWriter<'a> {
    fs: f64,
    rng: &'a mut ChaCha8Rng,
}

impl EpochWriter<'_> {
    fn time(&self, n: usize) -> f64 {
        n as f64 / self.fs
    }

    /// Sum of eight sinusoids at random frequencies in `[lo, hi]` with the given RMS.
    fn band(&mut self, buf: &mut [f64], lo: f64, hi: f64, rms: f64) {
        const PARTS: usize = 8;
        let amp = rms * (2.0 / PARTS as f64).sqrt();
        for _ in 0..PARTS {
            let f = self.rng.random_range(lo..=hi);
            let phase = self.rng.random_range(0.0..std::f64::consts::TAU);
            let w = std::f64::consts::TAU * f / self.fs;
            for (n, v) in buf.iter_mut().enumerate() {
                *v += amp * (w * n as f64 + phase).sin();
            }
        }
    }

    fn white(&mut self, buf: &mut [f64], std: f64) {
        if std <= 0.0 {
            return;
        }
        let normal = Normal::new(0.0, std).expect("positive std");
        for v in buf.iter_mut() {
            *v += normal.sample(self.rng);
        }
    }

    /// Hann-windowed 11–16 Hz bursts of 0.5–1.5 s.
    fn spindles(&mut self, c: &mut [f64], o: &mut [f64], count: usize, amp: f64) {
        let len = c.len();
        for _ in 0..count {
            let dur = self.rng.random_range(0.5..=1.5);
            let n = (dur * self.fs) as usize;
            let start = self.rng.random_range(0..len - n);
            let w = std::f64::consts::TAU * self.rng.random_range(11.0..=16.0) / self.fs;
            for i in 0..n {
                let env = 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / n as f64).cos();
                let s = amp * env * (w * i as f64).sin();
                c[start + i] += s;
                o[start + i] += 0.5 * s;
            }
        }
    }

    /// Sharp negative wave followed by a slower positive one.
    fn k_complex(&mut self, c: &mut [f64], o: &mut [f64], amp: f64) {
        let t0 = self.rng.random_range(1.0..EPOCH_SECONDS - 2.0);
        for (n, (vc, vo)) in c.iter_mut().zip(o.iter_mut()).enumerate() {
            let t = self.time(n);
            let neg = (-((t - t0) / 0.1).powi(2)).exp();
            let pos = (-((t - t0 - 0.35) / 0.2).powi(2)).exp();
            let s = amp * (-neg + 0.6 * pos);
            *vc += s;
            *vo += 0.65 * s;
        }
    }

    /// Gaussian bumps with the same polarity on both eye channels.
    fn blinks(&mut self, l: &mut [f64], r: &mut [f64], count: usize, amp: f64) {
        for _ in 0..count {
            let t0 = self.rng.random_range(0.5..EPOCH_SECONDS - 0.5);
            for (n, (vl, vr)) in l.iter_mut().zip(r.iter_mut()).enumerate() {
                let s = amp * (-((self.time(n) - t0) / 0.12).powi(2)).exp();
                *vl += s;
                *vr += s;
            }
        }
    }

    /// Quick ramp then slow return, opposite polarity left and right.
    fn saccades(&mut self, l: &mut [f64], r: &mut [f64], count: usize, amp: f64) {
        for _ in 0..count {
            let t0 = self.rng.random_range(0.0..EPOCH_SECONDS - 1.0);
            let a = amp * if self.rng.random_bool(0.5) { 1.0 } else { -1.0 };
            for (n, (vl, vr)) in l.iter_mut().zip(r.iter_mut()).enumerate() {
                let dt = self.time(n) - t0;
                let s = if dt < 0.0 {
                    0.0
                } else if dt < 0.08 {
                    dt / 0.08
                } else {
                    (-(dt - 0.08) / 0.8).exp()
                };
                *vl += a * s;
                *vr -= a * s;
            }
        }
    }

    fn epoch(&mut self, stage: Stage, t: usize) -> [Vec<f64>; 5] {
        let mut ch: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; t]);
        let [c, o, l, r, m] = &mut ch;
        match stage {
            Stage::W => {
                self.band(o, 8.0, 12.0, 20.0);
                self.band(c, 8.0, 12.0, 8.0);
                self.band(c, 15.0, 30.0, 5.0);
                self.band(o, 15.0, 30.0, 5.0);
                let n = self.rng.random_range(2..=4);
                self.blinks(l, r, n, 60.0);
                self.band(l, 0.5, 2.0, 5.0);
                self.band(r, 0.5, 2.0, 5.0);
                self.white(m, 25.0);
            }
            Stage::N1 => {
                self.band(c, 4.0, 7.0, 15.0);
                self.band(o, 4.0, 7.0, 15.0);
                self.band(c, 8.0, 12.0, 3.0);
                self.band(o, 8.0, 12.0, 4.0);
                let mut rolling = vec![0.0; t];
                self.band(&mut rolling, 0.1, 0.5, 25.0);
                for (i, v) in rolling.iter().enumerate() {
                    l[i] += v;
                    r[i] -= v;
                }
                self.white(m, 12.0);
            }
            Stage::N2 => {
                self.band(c, 4.0, 7.0, 14.0);
                self.band(o, 4.0, 7.0, 14.0);
                self.band(c, 0.5, 2.0, 10.0);
                self.band(o, 0.5, 2.0, 10.0);
                let n = self.rng.random_range(2..=4);
                self.spindles(c, o, n, 35.0);
                for _ in 0..self.rng.random_range(1..=2) {
                    self.k_complex(c, o, 90.0);
                }
                self.band(l, 0.5, 2.0, 4.0);
                self.band(r, 0.5, 2.0, 4.0);
                self.white(m, 8.0);
            }
            Stage::N3 => {
                self.band(c, 0.5, 2.0, 55.0);
                self.band(o, 0.5, 2.0, 45.0);
                self.band(c, 4.0, 7.0, 6.0);
                self.band(o, 4.0, 7.0, 6.0);
                // frontal slow waves leak into the eye leads
                for i in 0..t {
                    l[i] += 0.25 * c[i];
                    r[i] += 0.25 * c[i];
                }
                self.white(m, 6.0);
            }
            Stage::Rem => {
                for x in [&mut *c, &mut *o] {
                    self.band(x, 4.0, 7.0, 8.0);
                    self.band(x, 8.0, 12.0, 4.0);
                    self.band(x, 15.0, 30.0, 4.0);
                }
                let n = self.rng.random_range(3..=8);
                self.saccades(l, r, n, 80.0);
                self.white(m, 2.0);
            }
        }
        ch
    }
}

/// Stages an epoch of `stage` can drift towards.
fn neighbours(stage: Stage) -> &'static [Stage] {
    match stage {
        Stage::W => &[Stage::N1, Stage::Rem],
        Stage::N1 => &[Stage::W, Stage::N2, Stage::Rem],
        Stage::N2 => &[Stage::N1, Stage::N3],
        Stage::N3 => &[Stage::N2],
        Stage::Rem => &[Stage::N1, Stage::W],
    }
}

/// A labeled recording of `epochs` 30 s epochs, stages drawn from the chain unless given.
pub fn synth_recording(seed: u64, epochs: usize, stages: Option<&[Stage]>) -> Recording {
    synth_recording_with(seed, epochs, stages, &SynthOptions::default())
}

pub fn synth_recording_with(seed: u64, epochs: usize, stages: Option<&[Stage]>, opts: &SynthOptions) -> Recording {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stages: Vec<Stage> = match stages {
        Some(s) => s.iter().copied().cycle().take(if s.is_empty() { 0 } else { epochs }).collect(),
        None => opts.chain.sample(epochs, &mut rng),
    };
    let t = (opts.fs * EPOCH_SECONDS).round() as usize;
    let jitter = opts.gain_jitter.max(1.0).ln();
    let gains: Vec<f64> = (0..PIPELINE_CHANNELS.len())
        .map(|_| if jitter > 0.0 { rng.random_range(-jitter..=jitter).exp() } else { 1.0 })
        .collect();
    let noise_ratio = 10f64.powf(-opts.snr_db / 10.0);

    let mut signals: Vec<Vec<f32>> = vec![Vec::with_capacity(stages.len() * t); PIPELINE_CHANNELS.len()];
    let mut writer = EpochWriter { fs: opts.fs, rng: &mut rng };
    for &stage in &stages {
        let mut ch = writer.epoch(stage, t);
        if opts.transition_rate > 0.0 && writer.rng.random_bool(opts.transition_rate.min(1.0)) {
            let near = neighbours(stage);
            let other = near[writer.rng.random_range(0..near.len())];
            let u = writer.rng.random_range(0.2..=opts.max_blend.max(0.2));
            let mix = writer.epoch(other, t);
            for (x, y) in ch.iter_mut().zip(&mix) {
                for (a, b) in x.iter_mut().zip(y) {
                    *a = (1.0 - u) * *a + u * b;
                }
            }
        }
        for (k, x) in ch.iter_mut().enumerate() {
            let power = x.iter().map(|v| v * v).sum::<f64>() / t as f64;
            writer.white(x, (power * noise_ratio).sqrt());
            signals[k].extend(x.iter().map(|v| (v * gains[k]) as f32));
        }
    }

    Recording {
        id: format!("synth-{seed}"),
        channels: PIPELINE_CHANNELS
            .iter()
            .zip(signals)
            .map(|((name, _), samples)| Channel {
                name: name.to_string(),
                fs: opts.fs,
                samples,
            })
            .collect(),
        labels: Some(stages.into_iter().map(Some).collect()),
    }
}
