//! Continuous EDF: fixed-width ASCII header plus 16-bit little-endian samples.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::recording::{Channel, Recording, PIPELINE_CHANNELS};
use crate::error::{Error, Result};
use crate::util::{atomic_write, read_file};

/// Accepted EDF signal labels for each pipeline channel, compared case-insensitively.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChannelMap(pub BTreeMap<String, Vec<String>>);

impl Default for ChannelMap {
    fn default() -> Self {
        let aliases: [(&str, &[&str]); 5] = [
            ("EEG_C", &["EEG_C", "C3-M2", "C4-M1", "C3-A2", "C4-A1", "EEG C3-A2", "EEG C4-A1", "C3", "C4"]),
            ("EEG_O", &["EEG_O", "O1-M2", "O2-M1", "O1-A2", "O2-A1", "EEG O1-A2", "EEG O2-A1", "O1", "O2"]),
            ("EOG_L", &["EOG_L", "E1-M2", "LOC", "EOG(L)", "EOG LOC-A2", "E1"]),
            ("EOG_R", &["EOG_R", "E2-M1", "ROC", "EOG(R)", "EOG ROC-A1", "E2"]),
            ("EMG", &["EMG", "CHIN", "EMG CHIN", "CHIN1-CHIN2", "CHIN EMG"]),
        ];
        ChannelMap(
            aliases
                .iter()
                .map(|(k, v)| (k.to_string(), v.iter().map(|s| s.to_string()).collect()))
                .collect(),
        )
    }
}

impl ChannelMap {
    fn resolve(&self, canonical: &str, labels: &[String]) -> Option<usize> {
        let aliases = self.0.get(canonical)?;
        aliases.iter().find_map(|a| {
            labels
                .iter()
                .position(|l| l.trim().eq_ignore_ascii_case(a.trim()))
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdfSignal {
    pub label: String,
    pub physical_min: f64,
    pub physical_max: f64,
    pub digital_min: i32,
    pub digital_max: i32,
    pub samples_per_record: usize,
}

impl EdfSignal {
    /// `(d - dmin) * (pmax - pmin) / (dmax - dmin) + pmin`
    pub fn to_physical(&self, digital: i16) -> f64 {
        let span_d = f64::from(self.digital_max - self.digital_min);
        (f64::from(digital) - f64::from(self.digital_min)) * (self.physical_max - self.physical_min) / span_d
            + self.physical_min
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdfHeader {
    pub patient: String,
    pub recording: String,
    pub records: usize,
    pub record_duration: f64,
    pub signals: Vec<EdfSignal>,
}

struct Fields<'a> {
    bytes: &'a [u8],
    pos: usize,
    source: &'a Path,
}

impl Fields<'_> {
    fn text(&mut self, width: usize, what: &str) -> Result<String> {
        if self.bytes.len() < self.pos + width {
            return Err(Error::parse(self.source, self.pos as u64, format!("header truncated in {what}")));
        }
        let raw = &self.bytes[self.pos..self.pos + width];
        if !raw.iter().all(|b| (0x20..=0x7e).contains(b)) {
            return Err(Error::parse(self.source, self.pos as u64, format!("non-ASCII bytes in {what}")));
        }
        self.pos += width;
        Ok(String::from_utf8_lossy(raw).trim().to_string())
    }

    fn number<T: std::str::FromStr>(&mut self, width: usize, what: &str) -> Result<T> {
        let at = self.pos as u64;
        let s = self.text(width, what)?;
        s.parse()
            .map_err(|_| Error::parse(self.source, at, format!("{what}: `{s}` is not a number")))
    }
}

pub fn parse_edf_header(bytes: &[u8], source: &Path) -> Result<(EdfHeader, usize)> {
    let mut f = Fields { bytes, pos: 0, source };
    let version = f.text(8, "version")?;
    if version != "0" {
        return Err(Error::parse(source, 0, format!("unsupported EDF version `{version}`")));
    }
    let patient = f.text(80, "patient id")?;
    let recording = f.text(80, "recording id")?;
    f.text(8, "start date")?;
    f.text(8, "start time")?;
    let header_bytes: usize = f.number(8, "header size")?;
    let reserved = f.text(44, "reserved")?;
    if reserved.starts_with("EDF+D") {
        return Err(Error::parse(source, 192, "discontinuous EDF+ is not supported"));
    }
    let records_at = f.pos as u64;
    let records: i64 = f.number(8, "record count")?;
    if records < 0 {
        return Err(Error::parse(source, records_at, "unknown record count (-1) is not supported"));
    }
    let record_duration: f64 = f.number(8, "record duration")?;
    if !(record_duration > 0.0) {
        return Err(Error::parse(source, 244, "record duration must be positive"));
    }
    let ns: usize = f.number(4, "signal count")?;
    if header_bytes != 256 * (ns + 1) {
        return Err(Error::parse(source, 184, format!("header size {header_bytes} != 256 * ({ns} + 1)")));
    }

    let mut columns = |width: usize, what: &str| -> Result<Vec<String>> { (0..ns).map(|_| f.text(width, what)).collect() };
    let labels = columns(16, "label")?;
    columns(80, "transducer")?;
    columns(8, "physical dimension")?;
    let pmin = columns(8, "physical minimum")?;
    let pmax = columns(8, "physical maximum")?;
    let dmin = columns(8, "digital minimum")?;
    let dmax = columns(8, "digital maximum")?;
    columns(80, "prefiltering")?;
    let spr = columns(8, "samples per record")?;
    columns(32, "reserved")?;

    let field_offset = |col_start: usize, width: usize, i: usize| (256 + ns * col_start + i * width) as u64;
    let num = |s: &str, at: u64, what: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| Error::parse(source, at, format!("{what}: `{s}` is not a number")))
    };
    let mut signals = Vec::with_capacity(ns);
    for i in 0..ns {
        let physical_min = num(&pmin[i], field_offset(16 + 80 + 8, 8, i), "physical minimum")?;
        let physical_max = num(&pmax[i], field_offset(16 + 80 + 16, 8, i), "physical maximum")?;
        let dmin_at = field_offset(16 + 80 + 24, 8, i);
        let digital_min = num(&dmin[i], dmin_at, "digital minimum")? as i32;
        let digital_max = num(&dmax[i], field_offset(16 + 80 + 32, 8, i), "digital maximum")? as i32;
        if digital_max == digital_min {
            return Err(Error::parse(source, dmin_at, format!("signal `{}` has digital max == digital min", labels[i])));
        }
        let samples_per_record = num(&spr[i], field_offset(16 + 80 + 40 + 80, 8, i), "samples per record")? as usize;
        signals.push(EdfSignal {
            label: labels[i].clone(),
            physical_min,
            physical_max,
            digital_min,
            digital_max,
            samples_per_record,
        });
    }
    Ok((
        EdfHeader {
            patient,
            recording,
            records: records as usize,
            record_duration,
            signals,
        },
        header_bytes,
    ))
}

/// Reads all signals of an EDF file, converted to physical units.
pub fn read_edf_signals(bytes: &[u8], source: &Path) -> Result<(EdfHeader, Vec<Vec<f64>>)> {
    let (header, start) = parse_edf_header(bytes, source)?;
    let per_record: usize = header.signals.iter().map(|s| s.samples_per_record).sum();
    let need = start + header.records * per_record * 2;
    if bytes.len() < need {
        return Err(Error::parse(
            source,
            bytes.len() as u64,
            format!("data truncated: {} records need {need} bytes", header.records),
        ));
    }
    let mut out: Vec<Vec<f64>> = header
        .signals
        .iter()
        .map(|s| Vec::with_capacity(s.samples_per_record * header.records))
        .collect();
    let mut pos = start;
    for _ in 0..header.records {
        for (sig, dst) in header.signals.iter().zip(&mut out) {
            for c in bytes[pos..pos + 2 * sig.samples_per_record].chunks_exact(2) {
                dst.push(sig.to_physical(i16::from_le_bytes([c[0], c[1]])));
            }
            pos += 2 * sig.samples_per_record;
        }
    }
    Ok((header, out))
}

/// Reads an EDF file and keeps the five pipeline channels, renamed to their canonical names.
pub fn read_edf(path: &Path, map: &ChannelMap) -> Result<Recording> {
    let bytes = read_file(path)?;
    let (header, signals) = read_edf_signals(&bytes, path)?;
    let labels: Vec<String> = header.signals.iter().map(|s| s.label.clone()).collect();
    let mut channels = Vec::with_capacity(PIPELINE_CHANNELS.len());
    for (name, _) in PIPELINE_CHANNELS {
        let i = map.resolve(name, &labels).ok_or_else(|| Error::MissingChannel(name.to_string()))?;
        channels.push(Channel {
            name: name.to_string(),
            fs: header.signals[i].samples_per_record as f64 / header.record_duration,
            samples: signals[i].iter().map(|&v| v as f32).collect(),
        });
    }
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(Recording {
        id,
        channels,
        labels: None,
    })
}

/// Header-renderable physical range enclosing `[lo, hi]`, never empty.
fn bracket(lo: f64, hi: f64) -> (f64, f64) {
    let span = (hi - lo).max(1e-3);
    let mut l = lo - span * 1e-4;
    let mut h = hi + span * 1e-4;
    loop {
        let lr: f64 = fit8(l).parse().unwrap();
        let hr: f64 = fit8(h).parse().unwrap();
        if lr <= lo && hr >= hi && hr > lr {
            return (lr, hr);
        }
        l -= span * 1e-3;
        h += span * 1e-3;
    }
}

/// Shortest decimal rendering that fits an 8-character header field.
fn fit8(v: f64) -> String {
    for prec in (0..=6).rev() {
        let s = format!("{v:.prec$}");
        let s = if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        };
        if s.len() <= 8 {
            return s;
        }
    }
    format!("{}", v.round() as i64)
}

fn pad(out: &mut Vec<u8>, s: &str, width: usize) {
    let mut b: Vec<u8> = s.bytes().filter(|c| (0x20..=0x7e).contains(c)).take(width).collect();
    b.resize(width, b' ');
    out.extend_from_slice(&b);
}

/// Writes every channel with one-second records.
///
/// Each channel is quantized to 16 bits over its own range, and partial
/// trailing seconds are dropped.
pub fn encode_edf(rec: &Recording) -> Result<Vec<u8>> {
    let mut spr = Vec::with_capacity(rec.channels.len());
    for c in &rec.channels {
        if c.fs.fract() != 0.0 {
            return Err(Error::Config(format!(
                "channel `{}`: EDF writing needs an integer sampling rate, got {}",
                c.name, c.fs
            )));
        }
        spr.push(c.fs as usize);
    }
    let records = rec.duration().floor() as usize;
    let ns = rec.channels.len();
    let ranges: Vec<(f64, f64)> = rec
        .channels
        .iter()
        .map(|c| {
            let lo = c.samples.iter().fold(f64::INFINITY, |a, &v| a.min(f64::from(v)));
            let hi = c.samples.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(f64::from(v)));
            if lo.is_finite() { bracket(lo, hi) } else { (0.0, 1.0) }
        })
        .collect();

    let mut out = Vec::with_capacity(256 * (ns + 1) + records * spr.iter().sum::<usize>() * 2);
    pad(&mut out, "0", 8);
    pad(&mut out, "X X X X", 80);
    pad(&mut out, &format!("Startdate X X X {}", rec.id), 80);
    pad(&mut out, "01.01.00", 8);
    pad(&mut out, "00.00.00", 8);
    pad(&mut out, &(256 * (ns + 1)).to_string(), 8);
    pad(&mut out, "", 44);
    pad(&mut out, &records.to_string(), 8);
    pad(&mut out, "1", 8);
    pad(&mut out, &ns.to_string(), 4);
    for c in &rec.channels {
        pad(&mut out, &c.name, 16);
    }
    for _ in 0..ns {
        pad(&mut out, "", 80);
    }
    for _ in 0..ns {
        pad(&mut out, "uV", 8);
    }
    for &(lo, _) in &ranges {
        pad(&mut out, &fit8(lo), 8);
    }
    for &(_, hi) in &ranges {
        pad(&mut out, &fit8(hi), 8);
    }
    for _ in 0..ns {
        pad(&mut out, "-32768", 8);
    }
    for _ in 0..ns {
        pad(&mut out, "32767", 8);
    }
    for _ in 0..ns {
        pad(&mut out, "", 80);
    }
    for &s in &spr {
        pad(&mut out, &s.to_string(), 8);
    }
    for _ in 0..ns {
        pad(&mut out, "", 32);
    }
    for r in 0..records {
        for ((c, &n), &(lo, hi)) in rec.channels.iter().zip(&spr).zip(&ranges) {
            let scale = 65535.0 / (hi - lo);
            for &v in &c.samples[r * n..(r + 1) * n] {
                let d = ((f64::from(v) - lo) * scale - 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                out.extend_from_slice(&d.to_le_bytes());
            }
        }
    }
    Ok(out)
}

pub fn write_edf(rec: &Recording, path: &Path) -> Result<()> {
    atomic_write(path, &encode_edf(rec)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit8_fits() {
        for v in [0.0, -1.0, 123.456789, -1234.5678, 99999999.0, -0.000123, 1e-9] {
            let s = fit8(v);
            assert!(s.len() <= 8, "{v} -> {s}");
            let back: f64 = s.parse().unwrap();
            assert!((back - v).abs() <= 1e-3 * v.abs().max(1.0), "{v} -> {s}");
        }
    }

    #[test]
    fn physical_endpoints() {
        let s = EdfSignal {
            label: "x".into(),
            physical_min: -250.0,
            physical_max: 250.0,
            digital_min: -2048,
            digital_max: 2047,
            samples_per_record: 1,
        };
        assert_eq!(s.to_physical(-2048), -250.0);
        assert_eq!(s.to_physical(2047), 250.0);
    }
}
