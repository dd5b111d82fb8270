/// Ranges narrower than this are treated as a flat signal.
pub const DEGENERATE_RANGE: f64 = 1e-12;

/// Quantile of already-sorted values by linear interpolation between order statistics.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty slice");
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Clone, Debug, PartialEq)]
pub struct SoftNormalized {
    pub values: Vec<f64>,
    pub q_low: f64,
    pub q_high: f64,
    /// Set when the quantile range collapsed and the output was zeroed.
    pub degenerate: bool,
}

/// Affine map sending the `q_low` quantile to -1 and the `q_high` quantile to +1.
///
/// Values outside the quantile range land beyond ±1; nothing is clipped.
pub fn soft_normalize(signal: &[f64], q_low: f64, q_high: f64) -> SoftNormalized {
    if signal.is_empty() {
        return SoftNormalized {
            values: Vec::new(),
            q_low: 0.0,
            q_high: 0.0,
            degenerate: true,
        };
    }
    let mut sorted = signal.to_vec();
    sorted.sort_by(f64::total_cmp);
    let lo = quantile_sorted(&sorted, q_low);
    let hi = quantile_sorted(&sorted, q_high);
    let range = hi - lo;
    if !(range >= DEGENERATE_RANGE) {
        return SoftNormalized {
            values: vec![0.0; signal.len()],
            q_low: lo,
            q_high: hi,
            degenerate: true,
        };
    }
    let scale = 2.0 / range;
    SoftNormalized {
        values: signal.iter().map(|&x| (x - lo) * scale - 1.0).collect(),
        q_low: lo,
        q_high: hi,
        degenerate: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolated_quantiles() {
        let s = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&s, 0.0), 1.0);
        assert_eq!(quantile_sorted(&s, 1.0), 5.0);
        assert_eq!(quantile_sorted(&s, 0.5), 3.0);
        assert!((quantile_sorted(&s, 0.05) - 1.2).abs() < 1e-12);
        assert!((quantile_sorted(&s, 0.95) - 4.8).abs() < 1e-12);
    }

    #[test]
    fn symmetric_signal_centre_maps_to_zero() {
        let x: Vec<f64> = (-50..=50).map(|i| 3.0 + i as f64 * 0.1).collect();
        let y = soft_normalize(&x, 0.05, 0.95);
        assert!(y.values[50].abs() < 1e-12);
        assert!(!y.degenerate);
    }

    #[test]
    fn constant_signal_is_degenerate() {
        let y = soft_normalize(&[4.0; 100], 0.05, 0.95);
        assert!(y.degenerate);
        assert!(y.values.iter().all(|&v| v == 0.0));
    }
}
