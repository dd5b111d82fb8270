use crate::error::{Error, Result};

/// Kaiser window shape; about 80 dB stop-band rejection.
const KAISER_BETA: f64 = 8.0;
/// Filter half-length per unit of `max(up, down)`.
const HALF_LEN_FACTOR: usize = 32;
/// Largest interpolation or decimation factor accepted.
const MAX_FACTOR: u64 = 4096;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `fs_out / fs_in` as a reduced fraction `(up, down)`, resolving rates to 1 mHz.
pub fn rational_ratio(fs_in: f64, fs_out: f64) -> Result<(usize, usize)> {
    if !(fs_in > 0.0 && fs_out > 0.0 && fs_in.is_finite() && fs_out.is_finite()) {
        return Err(Error::Config(format!("sampling rates must be positive, got {fs_in} -> {fs_out}")));
    }
    let a = (fs_out * 1000.0).round() as u64;
    let b = (fs_in * 1000.0).round() as u64;
    if a == 0 || b == 0 {
        return Err(Error::Config(format!("sampling rate below 1 mHz: {fs_in} -> {fs_out}")));
    }
    let g = gcd(a, b);
    let (up, down) = (a / g, b / g);
    if up.max(down) > MAX_FACTOR {
        return Err(Error::Config(format!(
            "no small rational ratio for {fs_in} -> {fs_out} Hz ({up}/{down})"
        )));
    }
    Ok((up as usize, down as usize))
}

/// Modified Bessel function of the first kind, order zero.
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Kaiser-windowed sinc low-pass at the upsampled rate, cut off at the lower
/// Nyquist frequency and scaled to a DC gain of `up`.
fn design_lowpass(up: usize, down: usize) -> Vec<f64> {
    let factor = up.max(down);
    let half = HALF_LEN_FACTOR * factor;
    let cutoff = 1.0 / factor as f64;
    let denom = bessel_i0(KAISER_BETA);
    let mut h: Vec<f64> = (0..=2 * half)
        .map(|n| {
            let x = n as f64 - half as f64;
            let r = x / half as f64;
            let window = bessel_i0(KAISER_BETA * (1.0 - r * r).max(0.0).sqrt()) / denom;
            let arg = std::f64::consts::PI * cutoff * x;
            let sinc = if x == 0.0 { 1.0 } else { arg.sin() / arg };
            cutoff * sinc * window
        })
        .collect();
    // each polyphase branch then has unit DC gain
    let sum: f64 = h.iter().sum();
    for v in &mut h {
        *v *= up as f64 / sum;
    }
    h
}

/// Odd (point-symmetric) extension: `x[-k] = 2 x[0] - x[k]`.
fn odd_extend(x: &[f64], pad: usize) -> Vec<f64> {
    let n = x.len();
    let at = |i: isize| -> f64 {
        let last = n as isize - 1;
        if i < 0 {
            2.0 * x[0] - x[(-i).min(last) as usize]
        } else if i > last {
            2.0 * x[n - 1] - x[(2 * last - i).max(0) as usize]
        } else {
            x[i as usize]
        }
    };
    (-(pad as isize)..(n + pad) as isize).map(at).collect()
}

/// Rational-ratio polyphase resampling with a windowed-sinc anti-aliasing filter.
///
/// The output has `round(len * fs_out / fs_in)` samples. Edges are handled by
/// odd reflection so slow trends do not produce start-up transients.
pub fn resample(signal: &[f64], fs_in: f64, fs_out: f64) -> Result<Vec<f64>> {
    let (up, down) = rational_ratio(fs_in, fs_out)?;
    if up == down {
        return Ok(signal.to_vec());
    }
    if signal.is_empty() {
        return Ok(Vec::new());
    }
    let h = design_lowpass(up, down);
    let half = (h.len() - 1) / 2;
    let out_len = ((signal.len() * up) as f64 / down as f64).round() as usize;

    let pad = half / up + 2;
    let ext = odd_extend(signal, pad);
    let mut out = Vec::with_capacity(out_len);
    for m in 0..out_len {
        // output m sits at upsampled index m*down, padded input j at (j - pad)*up
        let centre = m * down + half + pad * up;
        let j_hi = centre / up;
        let j_lo = (centre + 1 - h.len()).div_ceil(up);
        let mut acc = 0.0;
        let mut k = centre - j_lo * up;
        for &x in &ext[j_lo..=j_hi] {
            acc += x * h[k];
            k = k.wrapping_sub(up);
        }
        out.push(acc);
    }
    Ok(out)
}
