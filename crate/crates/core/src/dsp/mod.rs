//! Spectrogram features, frame-wise references and sequence chunking.

pub mod cache;
pub mod features;
pub mod sequence;
pub mod stft;
pub mod targets;

pub use features::{extract_features, spectrograms, FeatureStats, FeatureTensor};
pub use sequence::{segment_sequences, Sequence};
pub use stft::{stft, Spectrogram};
pub use targets::{frame_targets, DoaFormat, FrameTiming, TargetTensor};
