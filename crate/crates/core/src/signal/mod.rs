//! Channel preprocessing: resampling, zero-phase band filtering, quantile
//! normalization and epoch segmentation.

mod filter;
mod normalize;
mod pipeline;
mod resample;
mod segment;

pub use filter::{butterworth, filter_zero_phase, Band, Biquad, Sos};
pub use normalize::{quantile_sorted, soft_normalize, SoftNormalized, DEGENERATE_RANGE};
pub use pipeline::{preprocess_recording, ChannelDiagnostics, PreprocessConfig, PreprocessDiagnostics};
pub use resample::{rational_ratio, resample};
pub use segment::{epoch_samples, segment_epochs};
