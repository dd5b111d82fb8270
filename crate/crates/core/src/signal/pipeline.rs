use serde::{Deserialize, Serialize};

use super::filter::{butterworth, Band};
use super::normalize::soft_normalize;
use super::resample::resample;
use super::segment::{epoch_samples, segment_epochs};
use crate::data::{ChannelKind, Recording, PIPELINE_CHANNELS};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub target_fs: f64,
    pub epoch_seconds: f64,
    pub q_low: f64,
    pub q_high: f64,
    /// Butterworth order per filtering direction.
    pub filter_order: usize,
    pub eeg_band: Band,
    pub eog_band: Band,
    pub emg_band: Band,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            target_fs: 200.0,
            epoch_seconds: 30.0,
            q_low: 0.05,
            q_high: 0.95,
            filter_order: 2,
            eeg_band: Band::bandpass(0.3, 35.0),
            eog_band: Band::bandpass(0.3, 35.0),
            // 100 Hz would sit on the Nyquist frequency at 200 Hz
            emg_band: Band::highpass(10.0),
        }
    }
}

impl PreprocessConfig {
    pub fn band(&self, kind: ChannelKind) -> Band {
        match kind {
            ChannelKind::Eeg => self.eeg_band,
            ChannelKind::Eog => self.eog_band,
            ChannelKind::Emg => self.emg_band,
        }
    }

    pub fn epoch_samples(&self) -> Result<usize> {
        epoch_samples(self.target_fs, self.epoch_seconds)
    }

    pub fn validate(&self) -> Result<()> {
        self.epoch_samples()?;
        if !(0.0 <= self.q_low && self.q_low < self.q_high && self.q_high <= 1.0) {
            return Err(Error::Config(format!(
                "quantiles must satisfy 0 <= q_low < q_high <= 1, got {} and {}",
                self.q_low, self.q_high
            )));
        }
        if self.filter_order == 0 {
            return Err(Error::Config("filter_order must be >= 1".into()));
        }
        for band in [self.eeg_band, self.eog_band, self.emg_band] {
            band.validate(self.target_fs)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelDiagnostics {
    pub name: String,
    pub source_fs: f64,
    pub source_samples: usize,
    pub resampled_samples: usize,
    pub q_low: f64,
    pub q_high: f64,
    pub degenerate: bool,
    /// Share of normalized samples inside [-1.5, 1.5].
    pub within_1_5: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreprocessDiagnostics {
    pub recording: String,
    pub epochs: usize,
    pub epoch_samples: usize,
    /// Samples dropped from the end of each channel to line all channels up.
    pub aligned_samples: usize,
    pub channels: Vec<ChannelDiagnostics>,
}

/// Resample, filter, normalize, then segment the five pipeline channels.
pub fn preprocess_recording(rec: &Recording, config: &PreprocessConfig) -> Result<(Tensor<f32>, PreprocessDiagnostics)> {
    config.validate()?;
    let mut processed = Vec::with_capacity(PIPELINE_CHANNELS.len());
    let mut diags = Vec::with_capacity(PIPELINE_CHANNELS.len());
    for (name, kind) in PIPELINE_CHANNELS {
        let ch = rec.channel(name)?;
        let raw: Vec<f64> = ch.samples.iter().map(|&v| f64::from(v)).collect();
        let x = resample(&raw, ch.fs, config.target_fs)?;
        let resampled_samples = x.len();
        let x = butterworth(config.filter_order, config.band(kind), config.target_fs)?.filtfilt(&x)?;
        let norm = soft_normalize(&x, config.q_low, config.q_high);
        if norm.degenerate {
            log::warn!("{}: channel {name} is flat; normalized to zeros", rec.id);
        }
        let inside = norm.values.iter().filter(|v| v.abs() <= 1.5).count();
        diags.push(ChannelDiagnostics {
            name: name.to_string(),
            source_fs: ch.fs,
            source_samples: ch.samples.len(),
            resampled_samples,
            q_low: norm.q_low,
            q_high: norm.q_high,
            degenerate: norm.degenerate,
            within_1_5: inside as f64 / norm.values.len().max(1) as f64,
        });
        processed.push(norm.values);
    }
    // rounding at different source rates can leave channels a sample or two apart
    let len = processed.iter().map(Vec::len).min().unwrap_or(0);
    let longest = processed.iter().map(Vec::len).max().unwrap_or(0);
    for p in &mut processed {
        p.truncate(len);
    }
    let epochs = segment_epochs(&processed, config.target_fs, config.epoch_seconds)?;
    let diag = PreprocessDiagnostics {
        recording: rec.id.clone(),
        epochs: epochs.shape()[0],
        epoch_samples: epochs.shape()[2],
        aligned_samples: longest - len,
        channels: diags,
    };
    Ok((epochs, diag))
}
