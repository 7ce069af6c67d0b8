//! Band-limited fractional delay with a windowed-sinc kernel.

use std::f64::consts::PI;

/// Kernel length of the fractional-delay interpolator.
pub const FRACTIONAL_DELAY_TAPS: usize = 32;
const HALF: isize = (FRACTIONAL_DELAY_TAPS / 2) as isize;

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = PI * x;
        px.sin() / px
    }
}

/// Blackman window evaluated at offset `t` from the kernel center, support `|t| < HALF`.
fn window(t: f64) -> f64 {
    let n = (t + HALF as f64) / (2 * HALF) as f64;
    if !(0.0..=1.0).contains(&n) {
        return 0.0;
    }
    0.42 - 0.5 * (2.0 * PI * n).cos() + 0.08 * (4.0 * PI * n).cos()
}

/// Interpolation weights for a delay with fractional part `frac` in `[0, 1)`.
///
/// Entry `j` applies to output offset `j as isize - HALF + 1` relative to the
/// integer part of the delay. For `frac == 0` the kernel is a unit impulse.
pub fn kernel(frac: f64) -> [f64; FRACTIONAL_DELAY_TAPS] {
    let mut h = [0.0; FRACTIONAL_DELAY_TAPS];
    if frac == 0.0 {
        h[(HALF - 1) as usize] = 1.0;
        return h;
    }
    for (j, w) in h.iter_mut().enumerate() {
        let t = (j as isize - HALF + 1) as f64 - frac;
        *w = sinc(t) * window(t);
    }
    h
}

/// Adds `gain * signal` delayed by `delay` samples into `out`, starting at
/// `offset`. Samples falling outside `out` are dropped.
pub fn add_delayed(out: &mut [f64], offset: isize, signal: &[f64], delay: f64, gain: f64) {
    if gain == 0.0 || signal.is_empty() {
        return;
    }
    let whole = delay.floor();
    let frac = delay - whole;
    let h = kernel(frac);
    let base = offset + whole as isize - HALF + 1;
    let len = out.len() as isize;
    for (k, &x) in signal.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        let start = base + k as isize;
        if start >= len {
            break;
        }
        let gx = gain * x;
        for (j, &w) in h.iter().enumerate() {
            let n = start + j as isize;
            if n >= 0 && n < len {
                out[n as usize] += gx * w;
            }
        }
    }
}

/// Adds a single scaled impulse at a fractional position.
pub fn add_impulse(out: &mut [f64], position: f64, gain: f64) {
    FractionalImpulse::new(position).add_to(out, gain);
}

/// Precomputed interpolation kernel for repeatedly adding one impulse
/// position into several buffers.
#[derive(Debug, Clone)]
pub struct FractionalImpulse {
    base: isize,
    h: [f64; FRACTIONAL_DELAY_TAPS],
}

impl FractionalImpulse {
    pub fn new(position: f64) -> Self {
        let whole = position.floor();
        Self {
            base: whole as isize - HALF + 1,
            h: kernel(position - whole),
        }
    }

    pub fn add_to(&self, out: &mut [f64], gain: f64) {
        let len = out.len() as isize;
        let lo = (-self.base).max(0) as usize;
        let hi = (len - self.base).clamp(0, FRACTIONAL_DELAY_TAPS as isize) as usize;
        for j in lo..hi {
            out[(self.base + j as isize) as usize] += gain * self.h[j];
        }
    }
}

/// Number of extra samples past `delay` touched by the kernel tail.
pub fn tail_len() -> usize {
    HALF as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_delay_is_exact_shift() {
        let x = [1.0, -2.0, 3.0];
        let mut out = vec![0.0; 10];
        add_delayed(&mut out, 0, &x, 4.0, 0.5);
        assert_eq!(out, vec![0.0, 0.0, 0.0, 0.0, 0.5, -1.0, 1.5, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn half_sample_delay_is_symmetric() {
        let h = kernel(0.5);
        for j in 0..FRACTIONAL_DELAY_TAPS / 2 {
            let a = h[(HALF - 1) as usize - j];
            let b = h[HALF as usize + j];
            assert!((a - b).abs() < 1e-15, "{j}: {a} vs {b}");
        }
    }

    #[test]
    fn delayed_sinusoid_matches_analytic_shift() {
        let fs = 44100.0;
        let f = 1000.0;
        let x: Vec<f64> = (0..2000).map(|n| (2.0 * PI * f * n as f64 / fs).sin()).collect();
        let d = 12.37;
        let mut out = vec![0.0; 2100];
        add_delayed(&mut out, 0, &x, d, 1.0);
        for n in 200..1900 {
            let expect = (2.0 * PI * f * (n as f64 - d) / fs).sin();
            assert!((out[n] - expect).abs() < 1e-3, "n={n}");
        }
    }
}
