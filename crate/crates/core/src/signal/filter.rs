use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pass band in Hz; a missing edge makes the filter high- or low-pass.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub low: Option<f64>,
    pub high: Option<f64>,
}

impl Band {
    pub const fn bandpass(low: f64, high: f64) -> Self {
        Band {
            low: Some(low),
            high: Some(high),
        }
    }

    pub const fn highpass(low: f64) -> Self {
        Band { low: Some(low), high: None }
    }

    pub const fn lowpass(high: f64) -> Self {
        Band { low: None, high: Some(high) }
    }

    pub fn validate(&self, fs: f64) -> Result<()> {
        let nyq = fs / 2.0;
        let ok = |f: f64| f > 0.0 && f < nyq;
        match (self.low, self.high) {
            (None, None) => Err(Error::FilterDesign("band has neither edge".into())),
            (Some(l), Some(h)) if !(l < h) => Err(Error::FilterDesign(format!("low edge {l} Hz is not below high edge {h} Hz"))),
            (l, h) => {
                for f in [l, h].into_iter().flatten() {
                    if !ok(f) {
                        return Err(Error::FilterDesign(format!(
                            "band edge {f} Hz outside (0, {nyq}) for fs = {fs} Hz"
                        )));
                    }
                }
                Ok(())
            }
        }
    }
}

/// One biquad: `b0 b1 b2` over `1 a1 a2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

/// Cascade of second-order sections.
#[derive(Clone, Debug, PartialEq)]
pub struct Sos {
    pub sections: Vec<Biquad>,
}

/// Digital Butterworth design by bilinear transform with frequency prewarping.
///
/// `order` is that of the low-pass prototype, so a band-pass has twice as many poles.
pub fn butterworth(order: usize, band: Band, fs: f64) -> Result<Sos> {
    if order == 0 {
        return Err(Error::FilterDesign("order must be >= 1".into()));
    }
    band.validate(fs)?;
    let warp = |f: f64| 2.0 * fs * (std::f64::consts::PI * f / fs).tan();
    let proto: Vec<Complex64> = (0..order)
        .map(|k| {
            let theta = std::f64::consts::PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
            Complex64::from_polar(1.0, theta)
        })
        .collect();

    // analog zeros, poles, gain
    let (zeros, poles, gain): (Vec<Complex64>, Vec<Complex64>, f64) = match (band.low, band.high) {
        (None, Some(h)) => {
            let wo = warp(h);
            (Vec::new(), proto.iter().map(|p| p * wo).collect(), wo.powi(order as i32))
        }
        (Some(l), None) => {
            let wo = warp(l);
            let poles: Vec<Complex64> = proto.iter().map(|p| wo / p).collect();
            let prod: Complex64 = proto.iter().map(|p| -p).product();
            (vec![Complex64::new(0.0, 0.0); order], poles, (1.0 / prod).re)
        }
        (Some(l), Some(h)) => {
            let (wl, wh) = (warp(l), warp(h));
            let bw = wh - wl;
            let wo2 = wl * wh;
            let mut poles = Vec::with_capacity(2 * order);
            for p in &proto {
                let p = p * (bw / 2.0);
                let d = (p * p - wo2).sqrt();
                poles.push(p + d);
                poles.push(p - d);
            }
            (vec![Complex64::new(0.0, 0.0); order], poles, bw.powi(order as i32))
        }
        (None, None) => unreachable!("validated"),
    };

    // bilinear transform; zeros at infinity land on z = -1
    let fs2 = 2.0 * fs;
    let bilinear = |s: &Complex64| (fs2 + s) / (fs2 - s);
    let num: Complex64 = zeros.iter().map(|z| fs2 - z).product();
    let den: Complex64 = poles.iter().map(|p| fs2 - p).product();
    let k = gain * (num / den).re;
    let mut zd: Vec<f64> = zeros.iter().map(|z| bilinear(z).re).collect();
    zd.extend(std::iter::repeat_n(-1.0, poles.len() - zeros.len()));
    let pd: Vec<Complex64> = poles.iter().map(bilinear).collect();

    Ok(Sos {
        sections: pair_sections(&zd, &pd, k),
    })
}

/// Groups conjugate pole pairs (and leftover real poles) into biquads; each
/// section takes one zero from each end of the sorted zero list so band-pass
/// sections get one zero at +1 and one at -1.
fn pair_sections(zeros: &[f64], poles: &[Complex64], gain: f64) -> Vec<Biquad> {
    let mut complex: Vec<Complex64> = poles.iter().filter(|p| p.im > 1e-12).copied().collect();
    let mut real: Vec<f64> = poles.iter().filter(|p| p.im.abs() <= 1e-12).map(|p| p.re).collect();
    // poles nearest the unit circle last, so the high-Q sections come at the end of the cascade
    complex.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    real.sort_by(|a, b| a.abs().total_cmp(&b.abs()));

    let mut z: Vec<f64> = zeros.to_vec();
    z.sort_by(f64::total_cmp);
    let mut take_zeros = |n: usize| -> Vec<f64> {
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            if z.is_empty() {
                break;
            }
            out.push(if i % 2 == 0 { z.remove(0) } else { z.pop().unwrap() });
        }
        out
    };

    let mut sections = Vec::new();
    let mut pole_groups: Vec<[f64; 3]> = Vec::new();
    for chunk in real.chunks(2) {
        let a = match chunk {
            [p] => [1.0, -p, 0.0],
            [p, q] => [1.0, -(p + q), p * q],
            _ => unreachable!(),
        };
        pole_groups.push(a);
    }
    for p in &complex {
        pole_groups.push([1.0, -2.0 * p.re, p.norm_sqr()]);
    }
    for a in pole_groups {
        let order = if a[2] == 0.0 { 1 } else { 2 };
        let zs = take_zeros(order);
        let b = match zs.as_slice() {
            [] => [1.0, 0.0, 0.0],
            [r] => [1.0, -r, 0.0],
            [r, s] => [1.0, -(r + s), r * s],
            _ => unreachable!(),
        };
        sections.push(Biquad { b, a });
    }
    for v in &mut sections[0].b {
        *v *= gain;
    }
    sections
}

impl Sos {
    /// Zero-input response of each section to a unit step, scaled so that
    /// filtering from these states starts in steady state for a constant input of 1.
    fn steady_state(&self) -> Vec<[f64; 2]> {
        let mut scale = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let g = (s.b[0] + s.b[1] + s.b[2]) / (s.a[0] + s.a[1] + s.a[2]);
                let z1 = s.b[2] - s.a[2] * g;
                let z0 = s.b[1] - s.a[1] * g + z1;
                let zi = [z0 * scale, z1 * scale];
                scale *= g;
                zi
            })
            .collect()
    }

    /// Direct-form II transposed filtering, in place.
    fn run(&self, x: &mut [f64], init: &[[f64; 2]], x0: f64) {
        for (s, zi) in self.sections.iter().zip(init) {
            let (mut z0, mut z1) = (zi[0] * x0, zi[1] * x0);
            let [b0, b1, b2] = s.b;
            let [_, a1, a2] = s.a;
            for v in x.iter_mut() {
                let xin = *v;
                let y = b0 * xin + z0;
                z0 = b1 * xin - a1 * y + z1;
                z1 = b2 * xin - a2 * y;
                *v = y;
            }
        }
    }

    /// Largest pole radius across the cascade.
    fn max_pole_radius(&self) -> f64 {
        self.sections
            .iter()
            .map(|s| {
                let disc = Complex64::new(s.a[1] * s.a[1] - 4.0 * s.a[2], 0.0).sqrt();
                let r1 = ((-s.a[1] + disc) / 2.0).norm();
                let r2 = ((-s.a[1] - disc) / 2.0).norm();
                r1.max(r2)
            })
            .fold(0.0, f64::max)
    }

    /// Samples for the impulse response to fall by 60 dB (slowest pole),
    /// never less than the tap count of the cascade.
    pub fn effective_len(&self) -> usize {
        let taps = 2 * self.sections.len() + 1;
        let r = self.max_pole_radius();
        if r <= 0.0 {
            return taps;
        }
        let decay = (1e-3f64.ln() / r.ln()).ceil();
        if decay.is_finite() {
            (decay as usize).max(taps)
        } else {
            taps
        }
    }

    /// Edge samples reflected on each side: three effective lengths.
    pub fn pad_len(&self) -> usize {
        3 * self.effective_len()
    }

    /// Forward-backward filtering with odd reflection padding and steady-state
    /// initial conditions: zero phase, squared magnitude response.
    pub fn filtfilt(&self, signal: &[f64]) -> Result<Vec<f64>> {
        let n = signal.len();
        if n == 0 {
            return Ok(Vec::new());
        }
        // short signals get as much padding as reflection allows
        let pad = self.pad_len().min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * signal[0] - signal[i]));
        ext.extend_from_slice(signal);
        ext.extend((1..=pad).map(|i| 2.0 * signal[n - 1] - signal[n - 1 - i]));

        let zi = self.steady_state();
        let x0 = ext[0];
        self.run(&mut ext, &zi, x0);
        ext.reverse();
        let x0 = ext[0];
        self.run(&mut ext, &zi, x0);
        ext.reverse();
        Ok(ext[pad..pad + n].to_vec())
    }

    /// Magnitude response at `f` Hz.
    pub fn gain_at(&self, f: f64, fs: f64) -> f64 {
        let w = 2.0 * std::f64::consts::PI * f / fs;
        let z1 = Complex64::from_polar(1.0, -w);
        let z2 = z1 * z1;
        self.sections
            .iter()
            .map(|s| {
                let num = s.b[0] + z1 * s.b[1] + z2 * s.b[2];
                let den = s.a[0] + z1 * s.a[1] + z2 * s.a[2];
                (num / den).norm()
            })
            .product()
    }
}

/// Designs and applies a zero-phase Butterworth filter in one call.
pub fn filter_zero_phase(signal: &[f64], band: Band, fs: f64, order: usize) -> Result<Vec<f64>> {
    butterworth(order, band, fs)?.filtfilt(signal)
}
