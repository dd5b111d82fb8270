use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Seconds per scored epoch.
pub const EPOCH_SECONDS: f64 = 30.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Stage {
    W = 0,
    N1 = 1,
    N2 = 2,
    N3 = 3,
    Rem = 4,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::W, Stage::N1, Stage::N2, Stage::N3, Stage::Rem];
    pub const COUNT: usize = 5;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Stage> {
        Stage::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Stage::W => "W",
            Stage::N1 => "N1",
            Stage::N2 => "N2",
            Stage::N3 => "N3",
            Stage::Rem => "REM",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_uppercase().as_str() {
            "W" | "WAKE" => Ok(Stage::W),
            "N1" => Ok(Stage::N1),
            "N2" => Ok(Stage::N2),
            "N3" => Ok(Stage::N3),
            "R" | "REM" => Ok(Stage::Rem),
            other => Err(format!("unknown stage `{other}`")),
        }
    }
}

impl From<Stage> for u8 {
    fn from(s: Stage) -> u8 {
        s as u8
    }
}

impl TryFrom<u8> for Stage {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        Stage::from_index(v as usize).ok_or_else(|| format!("stage code {v} out of range"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKind {
    Eeg,
    Eog,
    Emg,
}

/// The five network input channels, in tensor order.
pub const PIPELINE_CHANNELS: [(&str, ChannelKind); 5] = [
    ("EEG_C", ChannelKind::Eeg),
    ("EEG_O", ChannelKind::Eeg),
    ("EOG_L", ChannelKind::Eog),
    ("EOG_R", ChannelKind::Eog),
    ("EMG", ChannelKind::Emg),
];

#[derive(Clone, Debug, PartialEq)]
pub struct Channel {
    pub name: String,
    /// Sampling rate in Hz.
    pub fs: f64,
    pub samples: Vec<f32>,
}

impl Channel {
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.fs
    }
}

/// A polysomnogram: named channels at their own rates plus optional per-epoch labels.
///
/// A `None` label marks an unscored epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct Recording {
    pub id: String,
    pub channels: Vec<Channel>,
    pub labels: Option<Vec<Option<Stage>>>,
}

impl Recording {
    pub fn channel(&self, name: &str) -> Result<&Channel> {
        self.channels
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::MissingChannel(name.to_string()))
    }

    /// Shortest channel duration in seconds.
    pub fn duration(&self) -> f64 {
        self.channels
            .iter()
            .map(Channel::duration)
            .reduce(f64::min)
            .unwrap_or(0.0)
    }

    pub fn whole_epochs(&self) -> usize {
        (self.duration() / EPOCH_SECONDS + 1e-9).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        for c in &self.channels {
            if !(c.fs > 0.0 && c.fs.is_finite()) {
                return Err(Error::Config(format!("channel `{}` has sampling rate {}", c.name, c.fs)));
            }
        }
        let longest = self.channels.iter().map(Channel::duration).fold(0.0, f64::max);
        if longest - self.duration() > EPOCH_SECONDS {
            return Err(Error::Config(format!(
                "recording `{}`: channel spans differ by more than one epoch",
                self.id
            )));
        }
        if let Some(labels) = &self.labels {
            if labels.len() > self.whole_epochs() {
                return Err(Error::Config(format!(
                    "recording `{}`: {} labels for {} whole epochs",
                    self.id,
                    labels.len(),
                    self.whole_epochs()
                )));
            }
        }
        Ok(())
    }
}
