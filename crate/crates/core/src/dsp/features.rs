use serde::{Deserialize, Serialize};

use super::stft::{phase, stft, Spectrogram};
use crate::error::{Result, SeldError};

/// `T x F x 2C` stack: planes `0..C` are magnitudes, `C..2C` phases.
/// Stored row-major, `data[(t * bins + f) * planes + p]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    pub frames: usize,
    pub bins: usize,
    pub planes: usize,
    pub data: Vec<f64>,
}

impl FeatureTensor {
    pub fn channels(&self) -> usize {
        self.planes / 2
    }

    pub fn get(&self, t: usize, f: usize, p: usize) -> f64 {
        self.data[(t * self.bins + f) * self.planes + p]
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        let w = self.bins * self.planes;
        &self.data[t * w..(t + 1) * w]
    }
}

/// STFT of every channel.
pub fn spectrograms(audio: &[Vec<f64>], window: usize) -> Result<Vec<Spectrogram>> {
    if let Some(first) = audio.first() {
        if audio.iter().any(|c| c.len() != first.len()) {
            return Err(SeldError::ShapeMismatch("channels differ in length".into()));
        }
    }
    audio.iter().map(|c| stft(c, window)).collect()
}

pub fn features_from_spectrograms(specs: &[Spectrogram]) -> FeatureTensor {
    let c = specs.len();
    let (frames, bins) = specs.first().map_or((0, 0), |s| (s.frames, s.bins));
    let planes = 2 * c;
    let mut data = vec![0.0; frames * bins * planes];
    for (ch, s) in specs.iter().enumerate() {
        for (i, v) in s.data.iter().enumerate() {
            data[i * planes + ch] = v.norm();
            data[i * planes + c + ch] = phase(*v);
        }
    }
    FeatureTensor {
        frames,
        bins,
        planes,
        data,
    }
}

/// Magnitude and phase features of a multichannel recording.
pub fn extract_features(audio: &[Vec<f64>], window: usize, expected_channels: usize) -> Result<FeatureTensor> {
    if audio.len() != expected_channels {
        return Err(SeldError::ChannelMismatch {
            expected: expected_channels,
            got: audio.len(),
        });
    }
    Ok(features_from_spectrograms(&spectrograms(audio, window)?))
}

/// Per-bin magnitude statistics pooled over frames and channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureStats {
    pub fn fit<'a>(tensors: impl IntoIterator<Item = &'a FeatureTensor>) -> Result<Self> {
        let mut sum = Vec::new();
        let mut sq = Vec::new();
        let mut count = 0usize;
        for x in tensors {
            if sum.is_empty() {
                sum = vec![0.0; x.bins];
                sq = vec![0.0; x.bins];
            } else if sum.len() != x.bins {
                return Err(SeldError::ShapeMismatch("feature tensors differ in bin count".into()));
            }
            let c = x.channels();
            for t in 0..x.frames {
                for f in 0..x.bins {
                    for p in 0..c {
                        let v = x.get(t, f, p);
                        sum[f] += v;
                        sq[f] += v * v;
                    }
                }
            }
            count += x.frames * c;
        }
        if count == 0 {
            return Err(SeldError::MissingData("no frames to fit feature statistics".into()));
        }
        let n = count as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| {
                let var = (q / n - m * m).max(0.0);
                if var > 0.0 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, std })
    }

    /// Standardizes magnitude planes in place; phases are untouched.
    pub fn apply(&self, x: &mut FeatureTensor) -> Result<()> {
        if self.mean.len() != x.bins {
            return Err(SeldError::ShapeMismatch(format!(
                "statistics for {} bins applied to {}",
                self.mean.len(),
                x.bins
            )));
        }
        let c = x.channels();
        for t in 0..x.frames {
            for f in 0..x.bins {
                let base = (t * x.bins + f) * x.planes;
                for v in &mut x.data[base..base + c] {
                    *v = (*v - self.mean[f]) / self.std[f];
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn audio(c: usize) -> Vec<Vec<f64>> {
        (0..c)
            .map(|ch| (0..2048).map(|n| ((n * (ch + 3)) as f64 * 0.01).sin()).collect())
            .collect()
    }

    #[test]
    fn plane_counts() {
        assert_eq!(extract_features(&audio(4), 256, 4).unwrap().planes, 8);
        assert_eq!(extract_features(&audio(8), 256, 8).unwrap().planes, 16);
        assert!(matches!(
            extract_features(&audio(4), 256, 8),
            Err(SeldError::ChannelMismatch { .. })
        ));
    }

    #[test]
    fn magnitude_nonnegative_and_phase_in_range() {
        let x = extract_features(&audio(4), 128, 4).unwrap();
        for t in 0..x.frames {
            for f in 0..x.bins {
                for p in 0..4 {
                    assert!(x.get(t, f, p) >= 0.0);
                    let ph = x.get(t, f, 4 + p);
                    assert!(ph > -PI && ph <= PI);
                }
            }
        }
    }

    #[test]
    fn refitting_statistics_reproduces_tensor() {
        let raw = extract_features(&audio(4), 128, 4).unwrap();
        let s1 = FeatureStats::fit([&raw]).unwrap();
        let s2 = FeatureStats::fit([&raw]).unwrap();
        let (mut a, mut b) = (raw.clone(), raw.clone());
        s1.apply(&mut a).unwrap();
        s2.apply(&mut b).unwrap();
        assert_eq!(a, b);
        let phases_kept = (0..raw.data.len()).filter(|i| i % 8 >= 4).all(|i| a.data[i] == raw.data[i]);
        assert!(phases_kept);
    }

    #[test]
    fn standardized_training_magnitudes_have_zero_mean() {
        let raw = extract_features(&audio(4), 128, 4).unwrap();
        let s = FeatureStats::fit([&raw]).unwrap();
        let mut x = raw.clone();
        s.apply(&mut x).unwrap();
        let refit = FeatureStats::fit([&x]).unwrap();
        for (m, sd) in refit.mean.iter().zip(&refit.std) {
            assert!(m.abs() < 1e-9);
            assert!((sd - 1.0).abs() < 1e-6 || *sd == 1.0);
        }
    }
}
