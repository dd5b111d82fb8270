//! Binary checkpoint: `PSGN`, a u32 version, then a sequence of named f32 records.
//!
//! Record layout (all little-endian): name length u32, UTF-8 name, rank u32,
//! `rank` u64 extents, then the f32 values. Besides the model tensors a file
//! carries `model.config` (topology as small integers), and optionally
//! `optim.step` (the u64 counter as two u32 words, low first, stored bit-for-bit)
//! with `optim.m.<name>` / `optim.v.<name>` moment records.

use std::path::Path;

use super::config::ModelConfig;
use super::params::{build_model, ModelParams};
use crate::error::{Error, Result};
use crate::optim::AdamState;
use crate::tensor::Tensor;
use crate::util::{atomic_write, read_file};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"PSGN";
pub const CHECKPOINT_VERSION: u32 = 1;

const CONFIG_RECORD: &str = "model.config";
const STEP_RECORD: &str = "optim.step";

#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

/// Model parameters plus, for resumable files, the optimizer state.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams<f32>,
    pub optimizer: Option<AdamState<f32>>,
}

impl Checkpoint {
    pub fn to_records(&self) -> Vec<Record> {
        let mut out = vec![config_record(&self.params.config)];
        for (name, _, t) in self.params.entries() {
            out.push(Record {
                name,
                shape: t.shape().to_vec(),
                data: t.data().to_vec(),
            });
        }
        if let Some(opt) = &self.optimizer {
            let words = [opt.step as u32, (opt.step >> 32) as u32];
            out.push(Record {
                name: STEP_RECORD.into(),
                shape: vec![2],
                data: words.iter().map(|&w| f32::from_bits(w)).collect(),
            });
            let names = self.params.trainable_names();
            for (prefix, moments) in [("optim.m.", &opt.first), ("optim.v.", &opt.second)] {
                for (name, t) in names.iter().zip(moments) {
                    out.push(Record {
                        name: format!("{prefix}{name}"),
                        shape: t.shape().to_vec(),
                        data: t.data().to_vec(),
                    });
                }
            }
        }
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        encode_records(&self.to_records())
    }

    pub fn from_bytes(bytes: &[u8], source: &Path) -> Result<Self> {
        let records = decode_records(bytes, source)?;
        Self::from_records(records, source)
    }

    fn from_records(records: Vec<Record>, source: &Path) -> Result<Self> {
        let bad = |msg: String| Error::parse(source, 0, msg);
        let mut by_name: std::collections::HashMap<String, Record> = std::collections::HashMap::new();
        for r in records {
            if by_name.contains_key(&r.name) {
                return Err(bad(format!("duplicate record `{}`", r.name)));
            }
            by_name.insert(r.name.clone(), r);
        }
        let cfg_rec = by_name
            .remove(CONFIG_RECORD)
            .ok_or_else(|| bad(format!("missing `{CONFIG_RECORD}` record")))?;
        let config = config_from_record(&cfg_rec).map_err(|e| bad(e.to_string()))?;
        let mut params = build_model::<f32>(&config, 0).map_err(|e| bad(e.to_string()))?;

        let mut take = |name: &str, shape: &[usize]| -> Result<Tensor<f32>> {
            let r = by_name
                .remove(name)
                .ok_or_else(|| bad(format!("missing record `{name}`")))?;
            if r.shape != shape {
                return Err(bad(format!("record `{name}` has shape {:?}, expected {shape:?}", r.shape)));
            }
            Tensor::from_vec(shape, r.data)
        };
        for (name, _, t) in params.entries_mut() {
            *t = take(&name, t.shape())?;
        }

        let optimizer = match take(STEP_RECORD, &[2]) {
            Ok(words) => {
                let lo = words.data()[0].to_bits() as u64;
                let hi = words.data()[1].to_bits() as u64;
                let mut state = AdamState {
                    step: lo | (hi << 32),
                    first: Vec::new(),
                    second: Vec::new(),
                };
                let names = params.trainable_names();
                let shapes = params.trainable_shapes();
                for (n, s) in names.iter().zip(&shapes) {
                    state.first.push(take(&format!("optim.m.{n}"), s)?);
                }
                for (n, s) in names.iter().zip(&shapes) {
                    state.second.push(take(&format!("optim.v.{n}"), s)?);
                }
                Some(state)
            }
            Err(_) => None,
        };
        if let Some(extra) = by_name.keys().min() {
            return Err(bad(format!("unexpected record `{extra}`")));
        }
        Ok(Checkpoint { params, optimizer })
    }
}

fn config_record(c: &ModelConfig) -> Record {
    let fields = [
        c.num_block_layers,
        c.blocks_per_layer,
        c.base_filters,
        c.bottleneck_expansion,
        c.initial_filters,
        c.initial_kernel,
        c.num_classes,
        c.input_channels,
        c.epoch_samples,
        usize::from(c.stem_pool),
    ];
    Record {
        name: CONFIG_RECORD.into(),
        shape: vec![fields.len()],
        data: fields.iter().map(|&v| v as f32).collect(),
    }
}

fn config_from_record(r: &Record) -> Result<ModelConfig> {
    if r.shape != [10] {
        return Err(Error::Config(format!("model.config has shape {:?}", r.shape)));
    }
    let mut v = [0usize; 10];
    for (dst, &x) in v.iter_mut().zip(&r.data) {
        if !(x >= 0.0 && x.fract() == 0.0 && x < 16_777_216.0) {
            return Err(Error::Config(format!("model.config holds non-integer value {x}")));
        }
        *dst = x as usize;
    }
    let c = ModelConfig {
        num_block_layers: v[0],
        blocks_per_layer: v[1],
        base_filters: v[2],
        bottleneck_expansion: v[3],
        initial_filters: v[4],
        initial_kernel: v[5],
        num_classes: v[6],
        input_channels: v[7],
        epoch_samples: v[8],
        stem_pool: v[9] != 0,
    };
    c.validate()?;
    Ok(c)
}

pub fn encode_records(records: &[Record]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    for r in records {
        out.extend_from_slice(&(r.name.len() as u32).to_le_bytes());
        out.extend_from_slice(r.name.as_bytes());
        out.extend_from_slice(&(r.shape.len() as u32).to_le_bytes());
        for &d in &r.shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in &r.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    source: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::parse(self.source, self.pos as u64, format!("truncated {what}")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

pub fn decode_records(bytes: &[u8], source: &Path) -> Result<Vec<Record>> {
    let mut cur = Cursor { bytes, pos: 0, source };
    if cur.take(4, "magic")? != CHECKPOINT_MAGIC {
        return Err(Error::parse(source, 0, "not a checkpoint (bad magic)"));
    }
    let version = cur.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::parse(source, 4, format!("unsupported checkpoint version {version}")));
    }
    let mut out = Vec::new();
    while cur.pos < bytes.len() {
        let start = cur.pos as u64;
        let len = cur.u32("name length")? as usize;
        let name = std::str::from_utf8(cur.take(len, "name")?)
            .map_err(|_| Error::parse(source, start, "record name is not UTF-8"))?
            .to_string();
        let rank = cur.u32("rank")? as usize;
        let mut shape = Vec::with_capacity(rank.min(8));
        let mut count: usize = 1;
        for _ in 0..rank {
            let d = cur.u64("extent")?;
            let d = usize::try_from(d).map_err(|_| Error::parse(source, start, "extent overflows"))?;
            count = count
                .checked_mul(d)
                .ok_or_else(|| Error::parse(source, start, "record size overflows"))?;
            shape.push(d);
        }
        let nbytes = count
            .checked_mul(4)
            .ok_or_else(|| Error::parse(source, start, "record size overflows"))?;
        let raw = cur.take(nbytes, &format!("data of `{name}`"))?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        out.push(Record { name, shape, data });
    }
    Ok(out)
}

pub fn save_checkpoint(path: &Path, params: &ModelParams<f32>, optimizer: Option<&AdamState<f32>>) -> Result<()> {
    let ck = Checkpoint {
        params: params.clone(),
        optimizer: optimizer.cloned(),
    };
    atomic_write(path, &ck.to_bytes())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::from_bytes(&read_file(path)?, path)
}
