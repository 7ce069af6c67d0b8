//! Thin helpers over `rustfft` for real-valued buffers.

use num_complex::Complex64;
use rustfft::FftPlanner;

pub fn forward(signal: &[f64], n: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = signal
        .iter()
        .take(n)
        .map(|&x| Complex64::new(x, 0.0))
        .collect();
    buf.resize(n, Complex64::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf
}

/// Inverse transform returning the (scaled) real part.
pub fn inverse_real(mut spectrum: Vec<Complex64>) -> Vec<f64> {
    let n = spectrum.len();
    FftPlanner::new().plan_fft_inverse(n).process(&mut spectrum);
    let s = 1.0 / n as f64;
    spectrum.into_iter().map(|c| c.re * s).collect()
}

/// Full linear convolution via zero-padded FFT.
pub fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    let n = out_len.next_power_of_two();
    let fa = forward(a, n);
    let fb = forward(b, n);
    let prod = fa.iter().zip(&fb).map(|(x, y)| x * y).collect();
    let mut y = inverse_real(prod);
    y.truncate(out_len);
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convolution_matches_direct_sum() {
        let a = [1.0, 2.0, -1.0, 0.5];
        let b = [0.3, -0.7, 2.0];
        let y = convolve(&a, &b);
        let mut direct = vec![0.0; 6];
        for (i, x) in a.iter().enumerate() {
            for (j, h) in b.iter().enumerate() {
                direct[i + j] += x * h;
            }
        }
        for (p, q) in y.iter().zip(&direct) {
            assert!((p - q).abs() < 1e-12);
        }
    }
}
