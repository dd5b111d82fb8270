//! Recordings, file formats, cohort splits, batch samplers and the synthetic generator.

mod dataset;
mod edf;
mod native;
mod recording;
mod sampler;
mod split;
mod synth;

pub use dataset::{decode_epochs, encode_epochs, read_epochs, write_epochs, EpochDataset, EpochRecording, EpochRef, EPOCH_FORMAT};
pub use edf::{encode_edf, parse_edf_header, read_edf, read_edf_signals, write_edf, ChannelMap, EdfHeader, EdfSignal};
pub use native::{
    decode_native, encode_native, format_hypnogram, parse_hypnogram, read_hypnogram, read_native, write_hypnogram,
    write_native, NATIVE_FORMAT, UNSCORED_TOKEN,
};
pub use recording::{Channel, ChannelKind, Recording, Stage, EPOCH_SECONDS, PIPELINE_CHANNELS};
pub use sampler::{batches_per_pass, make_batches, Batch, SamplerConfig, SamplingMode};
pub use split::{split_cohort, CohortSplit};
pub use synth::{synth_recording, synth_recording_with, StageChain, SynthOptions};
