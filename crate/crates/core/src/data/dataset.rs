//! Preprocessed epochs, their `psge/1` file format, and labeled-epoch indexing.
//!
//! `psge/1`: one JSON header line (`format`, `id`, `epochs`, `channels`,
//! `samples`, `labels`), then `epochs * channels * samples` little-endian f32
//! values, then the u64 little-endian byte count of everything before it.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::recording::Stage;
use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::util::{atomic_write, read_file};

pub const EPOCH_FORMAT: &str = "psge/1";

/// One recording's network-ready epochs `[E, C, T]` with per-epoch labels.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecording {
    pub id: String,
    pub epochs: Tensor<f32>,
    /// Exactly `E` entries; `None` marks unscored (or unlabeled) epochs.
    pub labels: Vec<Option<Stage>>,
}

impl EpochRecording {
    /// Pairs epochs with a label list that may be shorter (missing tail = unscored).
    pub fn new(id: impl Into<String>, epochs: Tensor<f32>, labels: Option<&[Option<Stage>]>) -> Result<Self> {
        let (e, _, _) = epochs.dims3("EpochRecording")?;
        let mut l: Vec<Option<Stage>> = labels.map(|l| l.iter().take(e).copied().collect()).unwrap_or_default();
        l.resize(e, None);
        Ok(EpochRecording {
            id: id.into(),
            epochs,
            labels: l,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EpochHeader {
    format: String,
    id: String,
    epochs: usize,
    channels: usize,
    samples: usize,
    labels: Vec<Option<Stage>>,
}

pub fn encode_epochs(rec: &EpochRecording) -> Result<Vec<u8>> {
    let (e, c, t) = rec.epochs.dims3("encode_epochs")?;
    let header = EpochHeader {
        format: EPOCH_FORMAT.into(),
        id: rec.id.clone(),
        epochs: e,
        channels: c,
        samples: t,
        labels: rec.labels.clone(),
    };
    let mut out = serde_json::to_vec(&header)?;
    out.push(b'\n');
    out.reserve(rec.epochs.len() * 4 + 8);
    for v in rec.epochs.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let len = out.len() as u64;
    out.extend_from_slice(&len.to_le_bytes());
    Ok(out)
}

pub fn decode_epochs(bytes: &[u8], source: &Path) -> Result<EpochRecording> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::parse(source, 0, "missing header line"))?;
    let h: EpochHeader = serde_json::from_slice(&bytes[..nl])
        .map_err(|e| Error::parse(source, e.column() as u64, format!("bad header: {e}")))?;
    if h.format != EPOCH_FORMAT {
        return Err(Error::parse(source, 0, format!("unsupported format `{}`", h.format)));
    }
    if h.labels.len() != h.epochs {
        return Err(Error::parse(source, 0, "label count differs from epoch count"));
    }
    let count = h
        .epochs
        .checked_mul(h.channels)
        .and_then(|v| v.checked_mul(h.samples))
        .ok_or_else(|| Error::parse(source, 0, "tensor size overflows"))?;
    let body = nl + 1;
    if bytes.len() != body + count * 4 + 8 {
        return Err(Error::parse(source, bytes.len() as u64, "file length does not match header"));
    }
    let trailer_at = bytes.len() - 8;
    if u64::from_le_bytes(bytes[trailer_at..].try_into().unwrap()) != trailer_at as u64 {
        return Err(Error::parse(source, trailer_at as u64, "trailing length check failed"));
    }
    let data = bytes[body..trailer_at]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(EpochRecording {
        id: h.id,
        epochs: Tensor::from_vec(&[h.epochs, h.channels, h.samples], data)?,
        labels: h.labels,
    })
}

pub fn write_epochs(rec: &EpochRecording, path: &Path) -> Result<()> {
    atomic_write(path, &encode_epochs(rec)?)
}

pub fn read_epochs(path: &Path) -> Result<EpochRecording> {
    decode_epochs(&read_file(path)?, path)
}

/// Position of one labeled epoch inside an [`EpochDataset`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct EpochRef {
    pub recording: usize,
    pub epoch: usize,
    pub stage: Stage,
}

/// A set of preprocessed recordings; only scored epochs take part in training.
#[derive(Clone, Debug, Default)]
pub struct EpochDataset {
    pub recordings: Vec<EpochRecording>,
    labeled: Vec<EpochRef>,
}

impl EpochDataset {
    pub fn new(recordings: Vec<EpochRecording>) -> Result<Self> {
        let mut shape: Option<(usize, usize)> = None;
        let mut labeled = Vec::new();
        for (r, rec) in recordings.iter().enumerate() {
            let (_, c, t) = rec.epochs.dims3("EpochDataset")?;
            if rec.labels.len() != rec.epochs.shape()[0] {
                return Err(Error::dim("EpochDataset", rec.epochs.shape()[0], rec.labels.len()));
            }
            match shape {
                Some(s) if s != (c, t) && !rec.is_empty() => {
                    return Err(Error::dim("EpochDataset", format!("{s:?}"), format!("{:?}", (c, t))));
                }
                None if !rec.is_empty() => shape = Some((c, t)),
                _ => {}
            }
            for (e, l) in rec.labels.iter().enumerate() {
                if let Some(stage) = l {
                    labeled.push(EpochRef {
                        recording: r,
                        epoch: e,
                        stage: *stage,
                    });
                }
            }
        }
        Ok(EpochDataset { recordings, labeled })
    }

    /// Scored epochs in recording-then-time order.
    pub fn labeled(&self) -> &[EpochRef] {
        &self.labeled
    }

    pub fn class_counts(&self) -> [usize; Stage::COUNT] {
        let mut c = [0; Stage::COUNT];
        for r in &self.labeled {
            c[r.stage.index()] += 1;
        }
        c
    }

    /// Stacks the referenced epochs into `[N, C, T]`.
    pub fn gather(&self, refs: &[EpochRef]) -> Tensor<f32> {
        let Some(first) = refs.first() else {
            return Tensor::zeros(&[0, 0, 0]);
        };
        let shape = self.recordings[first.recording].epochs.shape();
        let (c, t) = (shape[1], shape[2]);
        let mut data = Vec::with_capacity(refs.len() * c * t);
        for r in refs {
            data.extend_from_slice(self.recordings[r.recording].epochs.row(r.epoch));
        }
        Tensor::from_vec(&[refs.len(), c, t], data).expect("sizes agree")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epoch_file_round_trip() {
        let rec = EpochRecording::new(
            "a",
            Tensor::from_fn(&[3, 2, 4], |i| i as f32 * 0.5 - 3.0),
            Some(&[Some(Stage::N2), None]),
        )
        .unwrap();
        assert_eq!(rec.labels, vec![Some(Stage::N2), None, None]);
        let bytes = encode_epochs(&rec).unwrap();
        assert_eq!(decode_epochs(&bytes, Path::new("m")).unwrap(), rec);
        assert!(decode_epochs(&bytes[..bytes.len() - 4], Path::new("m")).is_err());
    }

    #[test]
    fn dataset_indexes_scored_epochs() {
        let a = EpochRecording::new("a", Tensor::from_fn(&[2, 1, 3], |i| i as f32), Some(&[Some(Stage::W), None])).unwrap();
        let b = EpochRecording::new("b", Tensor::from_fn(&[1, 1, 3], |i| 10.0 + i as f32), Some(&[Some(Stage::Rem)])).unwrap();
        let ds = EpochDataset::new(vec![a, b]).unwrap();
        assert_eq!(ds.labeled().len(), 2);
        assert_eq!(ds.class_counts(), [1, 0, 0, 0, 1]);
        let x = ds.gather(&[ds.labeled()[1], ds.labeled()[0]]);
        assert_eq!(x.data(), &[10.0, 11.0, 12.0, 0.0, 1.0, 2.0]);
    }
}
