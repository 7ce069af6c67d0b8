//! Sound event localization and detection workbench: spatial scene
//! synthesis, spectrogram features, a CRNN with hand-written gradients, a
//! MUSIC baseline and the segment/frame metric suite.

pub mod audio;
pub mod dsp;
pub mod error;
pub mod experiment;
pub mod fft;
pub mod metrics;
pub mod music;
pub mod neural;
pub mod scene;

pub use error::{Result, SeldError};
