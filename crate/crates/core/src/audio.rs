//! Multichannel 32-bit float WAV files.

use std::path::Path;

use hound::{SampleFormat, WavSpec, WavWriter};

use crate::error::{Result, SeldError};

pub fn write_wav(path: &Path, channels: &[Vec<f64>], sample_rate: u32) -> Result<()> {
    let c = channels.len();
    if c == 0 {
        return Err(SeldError::InvalidArgument("no channels to write".into()));
    }
    let len = channels[0].len();
    if channels.iter().any(|ch| ch.len() != len) {
        return Err(SeldError::ShapeMismatch("channels differ in length".into()));
    }
    let spec = WavSpec {
        channels: c as u16,
        sample_rate,
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let mut w = WavWriter::create(path, spec)?;
    for n in 0..len {
        for ch in channels {
            w.write_sample(ch[n] as f32)?;
        }
    }
    w.finalize()?;
    Ok(())
}

/// Reads a WAV file as `channels[c][n]` plus its sample rate. Integer
/// formats are scaled to [-1, 1).
pub fn read_wav(path: &Path) -> Result<(Vec<Vec<f64>>, u32)> {
    let mut r = hound::WavReader::open(path)?;
    let spec = r.spec();
    let c = spec.channels as usize;
    let interleaved: Vec<f64> = match spec.sample_format {
        SampleFormat::Float => r.samples::<f32>().map(|s| s.map(f64::from)).collect::<std::result::Result<_, _>>()?,
        SampleFormat::Int => {
            let scale = 1.0 / (1u64 << (spec.bits_per_sample - 1)) as f64;
            r.samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<std::result::Result<_, _>>()?
        }
    };
    let mut out = vec![Vec::with_capacity(interleaved.len() / c); c];
    for (i, v) in interleaved.into_iter().enumerate() {
        out[i % c].push(v);
    }
    Ok((out, spec.sample_rate))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_wav_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.wav");
        let chans = vec![vec![0.25, -0.5, 0.125], vec![1.0, 0.0, -1.0], vec![0.1, 0.2, 0.3], vec![0.0; 3]];
        write_wav(&p, &chans, 44100).unwrap();
        let (back, fs) = read_wav(&p).unwrap();
        assert_eq!(fs, 44100);
        for (a, b) in back.iter().zip(&chans) {
            for (x, y) in a.iter().zip(b) {
                assert_eq!(*x, *y as f32 as f64);
            }
        }
    }
}
