use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{invalid, Result, SeldError};

/// Complex spectrogram, frame-major: `data[t * bins + f]` holds DFT bin `f + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub frames: usize,
    pub bins: usize,
    pub window: usize,
    pub data: Vec<Complex64>,
}

impl Spectrogram {
    pub fn frame(&self, t: usize) -> &[Complex64] {
        &self.data[t * self.bins..(t + 1) * self.bins]
    }

    pub fn at(&self, t: usize, f: usize) -> Complex64 {
        self.data[t * self.bins + f]
    }

    /// Center frequency of stored bin `f`.
    pub fn bin_frequency(&self, f: usize, sample_rate: f64) -> f64 {
        (f + 1) as f64 * sample_rate / self.window as f64
    }
}

/// Periodic Hamming window.
pub fn hamming(m: usize) -> Vec<f64> {
    (0..m).map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / m as f64).cos()).collect()
}

pub fn hop_length(window: usize) -> usize {
    window / 2
}

pub fn frame_count(len: usize, window: usize) -> usize {
    if len < window {
        0
    } else {
        (len - window) / hop_length(window) + 1
    }
}

/// Short-time Fourier transform with a Hamming window and 50% overlap,
/// keeping the `M/2` positive-frequency bins without DC.
pub fn stft(signal: &[f64], window: usize) -> Result<Spectrogram> {
    if window < 2 || !window.is_power_of_two() {
        return Err(invalid(format!("window length {window} must be a power of two")));
    }
    if signal.len() < window {
        return Err(SeldError::SignalTooShort {
            len: signal.len(),
            window,
        });
    }
    let hop = hop_length(window);
    let bins = window / 2;
    let frames = frame_count(signal.len(), window);
    let win = hamming(window);
    let fft = FftPlanner::new().plan_fft_forward(window);
    let mut buf = vec![Complex64::new(0.0, 0.0); window];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut data = Vec::with_capacity(frames * bins);
    for t in 0..frames {
        let seg = &signal[t * hop..t * hop + window];
        for ((b, &x), &w) in buf.iter_mut().zip(seg).zip(&win) {
            *b = Complex64::new(x * w, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        data.extend_from_slice(&buf[1..=bins]);
    }
    Ok(Spectrogram {
        frames,
        bins,
        window,
        data,
    })
}

/// Phase in `(-pi, pi]`.
pub fn phase(c: Complex64) -> f64 {
    let p = c.im.atan2(c.re);
    if p <= -PI {
        PI
    } else {
        p
    }
}
