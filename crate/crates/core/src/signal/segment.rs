use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Samples per epoch for a rate and epoch length, which must multiply to a whole number.
pub fn epoch_samples(fs: f64, epoch_seconds: f64) -> Result<usize> {
    let t = fs * epoch_seconds;
    if !(t >= 1.0) || (t - t.round()).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "{fs} Hz x {epoch_seconds} s is not a whole number of samples"
        )));
    }
    Ok(t.round() as usize)
}

/// Cuts equal-length channels into `[E, C, T]` epochs; a trailing partial epoch is dropped.
pub fn segment_epochs<S: AsRef<[f64]>>(channels: &[S], fs: f64, epoch_seconds: f64) -> Result<Tensor<f32>> {
    let t = epoch_samples(fs, epoch_seconds)?;
    let c = channels.len();
    let len = channels.first().map_or(0, |ch| ch.as_ref().len());
    if let Some(bad) = channels.iter().find(|ch| ch.as_ref().len() != len) {
        return Err(Error::dim("segment_epochs", format!("channels of {len} samples"), bad.as_ref().len()));
    }
    let e = len / t;
    let mut out = Tensor::zeros(&[e, c, t]);
    let data = out.data_mut();
    for epoch in 0..e {
        for (ci, ch) in channels.iter().enumerate() {
            let src = &ch.as_ref()[epoch * t..(epoch + 1) * t];
            let dst = &mut data[(epoch * c + ci) * t..(epoch * c + ci + 1) * t];
            for (d, &s) in dst.iter_mut().zip(src) {
                *d = s as f32;
            }
        }
    }
    Ok(out)
}
