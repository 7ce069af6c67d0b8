//! Shoebox room impulse responses with the image-source method.
//!
//! One image-source pass is accumulated per octave band, using a uniform wall
//! reflection coefficient derived from that band's RT60 through Eyring's
//! formula. The band responses are split with a zero-phase octave filter bank
//! whose magnitude responses sum to one, then added to the broadband response.

use serde::{Deserialize, Serialize};

use super::ambisonics::sh_gains;
use super::array::ArraySpec;
use super::delay::FractionalImpulse;
use super::direction::{Direction, SPEED_OF_SOUND};
use crate::error::{invalid, Result, SeldError};
use crate::fft;

/// Octave band centers of the per-band reverberation times.
pub const OCTAVE_CENTERS: [f64; 6] = [125.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0];

/// Half-width, in octaves, of each crossover transition of the filter bank.
const CROSSOVER_HALF_WIDTH: f64 = 0.25;

/// Band gains below this are not accumulated.
const AMPLITUDE_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    pub dimensions: [f64; 3],
    pub rt60_bands: [f64; 6],
    pub mic_position: [f64; 3],
}

impl RoomSpec {
    /// 10 × 8 × 4 m, moderately reverberant, microphone at the center.
    pub fn room1() -> Self {
        Self::centered([10.0, 8.0, 4.0], [1.0, 0.8, 0.7, 0.6, 0.5, 0.4])
    }

    /// 80 % of the room-1 volume, same reverberation times.
    pub fn room2() -> Self {
        Self::centered([8.0, 8.0, 4.0], [1.0, 0.8, 0.7, 0.6, 0.5, 0.4])
    }

    /// 125 % of the room-1 volume, same reverberation times.
    pub fn room3() -> Self {
        Self::centered([10.0, 10.0, 4.0], [1.0, 0.8, 0.7, 0.6, 0.5, 0.4])
    }

    pub fn centered(dimensions: [f64; 3], rt60_bands: [f64; 6]) -> Self {
        Self {
            dimensions,
            rt60_bands,
            mic_position: [dimensions[0] / 2.0, dimensions[1] / 2.0, dimensions[2] / 2.0],
        }
    }

    pub fn volume(&self) -> f64 {
        self.dimensions.iter().product()
    }

    pub fn surface(&self) -> f64 {
        let [x, y, z] = self.dimensions;
        2.0 * (x * y + y * z + x * z)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimensions.iter().any(|&d| !(d > 0.0)) {
            return Err(invalid("room dimensions must be positive"));
        }
        if self.rt60_bands.iter().any(|&t| !(t > 0.0)) {
            return Err(invalid("reverberation times must be positive"));
        }
        if !self.contains(self.mic_position) {
            return Err(SeldError::OutsideRoom(self.mic_position));
        }
        Ok(())
    }

    /// Strict interior test.
    pub fn contains(&self, p: [f64; 3]) -> bool {
        p.iter().zip(&self.dimensions).all(|(&c, &l)| c > 0.0 && c < l)
    }

    /// Distance from the microphone to the nearest wall along `direction`.
    pub fn distance_to_wall(&self, direction: Direction) -> f64 {
        let u = direction.to_cartesian().as_array();
        (0..3)
            .filter_map(|i| {
                if u[i] > 1e-12 {
                    Some((self.dimensions[i] - self.mic_position[i]) / u[i])
                } else if u[i] < -1e-12 {
                    Some(-self.mic_position[i] / u[i])
                } else {
                    None
                }
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Source position at `distance` meters from the microphone.
    pub fn source_position(&self, direction: Direction, distance: f64) -> [f64; 3] {
        let u = direction.to_cartesian().as_array();
        [
            self.mic_position[0] + distance * u[0],
            self.mic_position[1] + distance * u[1],
            self.mic_position[2] + distance * u[2],
        ]
    }
}

/// Uniform absorption coefficient reproducing `rt60` under Eyring's formula.
pub fn eyring_absorption(volume: f64, surface: f64, rt60: f64) -> f64 {
    let k = 24.0 * std::f64::consts::LN_10 / SPEED_OF_SOUND;
    1.0 - (-k * volume / (surface * rt60)).exp()
}

/// Pressure reflection coefficient of a wall with energy absorption `alpha`.
pub fn reflection_coefficient(alpha: f64) -> f64 {
    (1.0 - alpha).max(0.0).sqrt()
}

/// Truncation controls for the image enumeration.
#[derive(Debug, Clone, Copy)]
pub struct RirOptions {
    /// Response length in seconds; defaults to 1.2 × the longest band RT60.
    pub max_time: Option<f64>,
    /// Optional cap on the total reflection order of an image.
    pub max_order: Option<u32>,
    /// Per-band reflection coefficients. `None` uses the plain Eyring values;
    /// see [`calibrated_reflection`] for coefficients matching the band RT60s.
    pub reflection: Option<[f64; 6]>,
}

impl Default for RirOptions {
    fn default() -> Self {
        Self {
            max_time: None,
            max_order: None,
            reflection: None,
        }
    }
}

/// Sample rate of the responses rendered during calibration.
const CALIBRATION_RATE: f64 = 16000.0;

/// Source offset from the microphone used when calibrating a room.
const CALIBRATION_OFFSET: [f64; 3] = [1.3, 0.9, 0.4];

/// Finds the attenuation `g = -ln(beta)` at which `rt(g)` crosses `target`,
/// assuming `rt` decreases with `g`. Starts from `g0`.
fn solve_attenuation(rt: impl Fn(f64) -> Option<f64>, target: f64, g0: f64) -> f64 {
    let too_long = |g: f64| rt(g).is_some_and(|t| t > target);
    let (mut lo, mut hi) = (g0, g0);
    if too_long(g0) {
        for _ in 0..60 {
            hi *= 2.0;
            if !too_long(hi) {
                break;
            }
            lo = hi;
        }
    } else {
        for _ in 0..60 {
            lo /= 2.0;
            if too_long(lo) {
                break;
            }
            hi = lo;
        }
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if too_long(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Per-band reflection coefficients for `room`.
///
/// Eyring's formula gives the starting point. In a shoebox with uniform
/// absorption the image-source decay is not diffuse (axial paths meet few
/// walls), so each coefficient is then adjusted until the T20 of the
/// band-filtered omnidirectional response, for a source at a fixed offset
/// from the microphone, equals the band's RT60.
pub fn calibrated_reflection(room: &RoomSpec, max_time: f64) -> Result<[f64; 6]> {
    room.validate()?;
    let mut eyring = [0.0; 6];
    for (b, &t) in eyring.iter_mut().zip(&room.rt60_bands) {
        *b = reflection_coefficient(eyring_absorption(room.volume(), room.surface(), t));
    }
    let mut src = [0.0; 3];
    for i in 0..3 {
        let m = room.mic_position[i];
        let l = room.dimensions[i];
        // stay inside small rooms: fall back towards the center of the free span
        let off = CALIBRATION_OFFSET[i].min(0.4 * (l - m)).max(-0.4 * m);
        src[i] = m + off;
    }
    let fs = CALIBRATION_RATE;
    let len = (max_time * fs).ceil() as usize + 1;
    let images = enumerate_images(room, src, max_time * SPEED_OF_SOUND, None)?;
    let max_order = images.iter().map(|i| i.order).max().unwrap_or(0) as usize;
    // impulse trains split by reflection order
    let mut by_order = vec![vec![0.0; len]; max_order + 1];
    for img in &images {
        FractionalImpulse::new(img.distance / SPEED_OF_SOUND * fs).add_to(&mut by_order[img.order as usize], 1.0 / img.distance);
    }
    let n = (2 * len).next_power_of_two();
    let masks = octave_masks(n, fs);
    let mut out = eyring;
    for (band, beta) in out.iter_mut().enumerate() {
        if !(*beta > 0.0 && *beta < 1.0) {
            continue;
        }
        let rt = |g: f64| -> Option<f64> {
            let mut y = vec![0.0; len];
            let mut w = 1.0;
            let r = (-g).exp();
            for train in &by_order {
                if w < AMPLITUDE_FLOOR {
                    break;
                }
                for (a, v) in y.iter_mut().zip(train) {
                    *a += w * v;
                }
                w *= r;
            }
            let spec = fft::forward(&y, n);
            let filtered: Vec<_> = spec.iter().zip(&masks[band]).map(|(s, m)| s * *m).collect();
            let mut z = fft::inverse_real(filtered);
            z.truncate(len);
            decay_rt60(&schroeder_decay_db(&z), fs, -5.0, -25.0)
        };
        let g = solve_attenuation(rt, room.rt60_bands[band], -beta.ln());
        *beta = (-g).exp();
    }
    Ok(out)
}

/// One virtual source seen from the microphone.
#[derive(Debug, Clone, Copy)]
pub struct ImageSource {
    pub distance: f64,
    pub order: u32,
    pub direction: Direction,
}

fn axis_images(src: f64, len: f64, reach: f64, max_order: Option<u32>) -> Vec<(f64, u32)> {
    let mut n_max = (reach / (2.0 * len)).min(1e6).ceil() as i64 + 1;
    if let Some(m) = max_order {
        // an image with index n has at least 2|n| - 1 reflections on this axis
        n_max = n_max.min(m as i64 / 2 + 1);
    }
    let mut out = Vec::new();
    for n in -n_max..=n_max {
        for q in 0..=1i64 {
            let pos = (1 - 2 * q) as f64 * src + 2.0 * n as f64 * len;
            let refl = ((n - q).abs() + n.abs()) as u32;
            out.push((pos, refl));
        }
    }
    out
}

/// Enumerates all image sources within `max_distance` of the microphone.
pub fn enumerate_images(
    room: &RoomSpec,
    source: [f64; 3],
    max_distance: f64,
    max_order: Option<u32>,
) -> Result<Vec<ImageSource>> {
    room.validate()?;
    if !room.contains(source) {
        return Err(SeldError::OutsideRoom(source));
    }
    let mic = room.mic_position;
    let direct = (0..3).map(|i| (source[i] - mic[i]).powi(2)).sum::<f64>().sqrt();
    if direct < 1e-6 {
        return Err(SeldError::SourceAtMicrophone);
    }
    let ax: Vec<_> = (0..3)
        .map(|i| axis_images(source[i], room.dimensions[i], max_distance, max_order))
        .collect();
    let mut images = Vec::new();
    for &(px, rx) in &ax[0] {
        let dx = px - mic[0];
        if dx.abs() > max_distance {
            continue;
        }
        for &(py, ry) in &ax[1] {
            let dy = py - mic[1];
            let dxy2 = dx * dx + dy * dy;
            if dxy2 > max_distance * max_distance {
                continue;
            }
            for &(pz, rz) in &ax[2] {
                let dz = pz - mic[2];
                let d = (dxy2 + dz * dz).sqrt();
                let order = rx + ry + rz;
                if d > max_distance || max_order.is_some_and(|m| order > m) {
                    continue;
                }
                let direction = Direction::new(
                    dy.atan2(dx).to_degrees(),
                    (dz / d).clamp(-1.0, 1.0).asin().to_degrees(),
                )?;
                images.push(ImageSource {
                    distance: d,
                    order,
                    direction,
                });
            }
        }
    }
    Ok(images)
}

/// Complementary raised-cosine masks forming a partition of unity over the
/// FFT bins of an `n`-point transform.
pub fn octave_masks(n: usize, sample_rate: f64) -> Vec<Vec<f64>> {
    let crossovers: Vec<f64> = OCTAVE_CENTERS
        .windows(2)
        .map(|w| (w[0] * w[1]).sqrt())
        .collect();
    // fraction of energy routed above crossover `c` for frequency `f`
    let upper = |f: f64, c: f64| -> f64 {
        if f <= 0.0 {
            return 0.0;
        }
        let oct = (f / c).log2();
        if oct <= -CROSSOVER_HALF_WIDTH {
            0.0
        } else if oct >= CROSSOVER_HALF_WIDTH {
            1.0
        } else {
            let phase = (oct + CROSSOVER_HALF_WIDTH) / (2.0 * CROSSOVER_HALF_WIDTH);
            (phase * std::f64::consts::FRAC_PI_2).sin().powi(2)
        }
    };
    let mut masks = vec![vec![0.0; n]; OCTAVE_CENTERS.len()];
    for k in 0..n {
        let kk = if k <= n / 2 { k } else { n - k };
        let f = kk as f64 * sample_rate / n as f64;
        // band b receives prod_{c < b} up_c * (1 - up_b)
        let mut remaining = 1.0;
        for (b, mask) in masks.iter_mut().enumerate() {
            if b < crossovers.len() {
                let up = upper(f, crossovers[b]);
                mask[k] = remaining * (1.0 - up);
                remaining *= up;
            } else {
                mask[k] = remaining;
            }
        }
    }
    masks
}

/// Zero-phase filtering of each band buffer followed by summation.
fn combine_bands(bands: &[Vec<f64>], sample_rate: f64) -> Vec<f64> {
    let len = bands[0].len();
    let n = (2 * len).next_power_of_two();
    let masks = octave_masks(n, sample_rate);
    let mut total = vec![num_complex::Complex64::new(0.0, 0.0); n];
    for (band, mask) in bands.iter().zip(&masks) {
        if band.iter().all(|&v| v == 0.0) {
            continue;
        }
        let spec = fft::forward(band, n);
        for ((t, s), m) in total.iter_mut().zip(&spec).zip(mask) {
            *t += s * *m;
        }
    }
    let mut out = fft::inverse_real(total);
    out.truncate(len);
    out
}

/// Multichannel room impulse response for `array` placed at the room's
/// microphone position, one response per array channel.
pub fn image_source_rir(
    room: &RoomSpec,
    source: [f64; 3],
    array: &ArraySpec,
    sample_rate: f64,
    options: RirOptions,
) -> Result<Vec<Vec<f64>>> {
    room.validate()?;
    let max_rt = room.rt60_bands.iter().cloned().fold(0.0, f64::max);
    let max_time = options.max_time.unwrap_or(1.2 * max_rt);
    if !(max_time > 0.0) {
        return Err(invalid("impulse response length must be positive"));
    }
    let len = (max_time * sample_rate).ceil() as usize + 1;
    let reach = max_time * SPEED_OF_SOUND;
    let images = enumerate_images(room, source, reach, options.max_order)?;

    let mut betas: Vec<f64> = room
        .rt60_bands
        .iter()
        .map(|&t| reflection_coefficient(eyring_absorption(room.volume(), room.surface(), t)))
        .collect();
    if let Some(r) = options.reflection {
        betas = r.to_vec();
    }
    let channels = array.channels();
    let mut bands = vec![vec![vec![0.0; len]; OCTAVE_CENTERS.len()]; channels];
    let mut powers = vec![0.0; OCTAVE_CENTERS.len()];

    for img in &images {
        for (p, &b) in powers.iter_mut().zip(&betas) {
            *p = if img.order == 0 { 1.0 } else { b.powi(img.order as i32) };
        }
        if powers.iter().all(|&p| p < AMPLITUDE_FLOOR) {
            continue;
        }
        let delay = img.distance / SPEED_OF_SOUND * sample_rate;
        let amp = 1.0 / img.distance;
        match array {
            ArraySpec::Foa => {
                let g = sh_gains(img.direction);
                let imp = FractionalImpulse::new(delay);
                for (ch, bufs) in bands.iter_mut().enumerate() {
                    for (buf, &p) in bufs.iter_mut().zip(&powers) {
                        if p >= AMPLITUDE_FLOOR {
                            imp.add_to(buf, amp * p * g[ch]);
                        }
                    }
                }
            }
            ArraySpec::Circular { .. } => {
                let rel = array.relative_delays(img.direction);
                for (bufs, tau) in bands.iter_mut().zip(&rel) {
                    let imp = FractionalImpulse::new(delay + tau * sample_rate);
                    for (buf, &p) in bufs.iter_mut().zip(&powers) {
                        if p >= AMPLITUDE_FLOOR {
                            imp.add_to(buf, amp * p);
                        }
                    }
                }
            }
        }
    }
    Ok(bands.iter().map(|b| combine_bands(b, sample_rate)).collect())
}

/// Omnidirectional response between `source` and `mic_position`.
pub fn image_source_rir_omni(
    room: &RoomSpec,
    source: [f64; 3],
    sample_rate: f64,
    options: RirOptions,
) -> Result<Vec<f64>> {
    let mut rir = image_source_rir(room, source, &ArraySpec::Foa, sample_rate, options)?;
    Ok(rir.swap_remove(0))
}

/// Backward-integrated energy decay curve in dB, normalized to 0 dB at t = 0.
pub fn schroeder_decay_db(ir: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut edc: Vec<f64> = ir
        .iter()
        .rev()
        .map(|v| {
            acc += v * v;
            acc
        })
        .collect();
    edc.reverse();
    let e0 = edc.first().copied().unwrap_or(0.0);
    edc.iter()
        .map(|&e| if e0 > 0.0 && e > 0.0 { 10.0 * (e / e0).log10() } else { f64::NEG_INFINITY })
        .collect()
}

/// Reverberation time from a decay curve by a least-squares line fit
/// between `from_db` and `to_db` (negative), extrapolated to -60 dB.
pub fn decay_rt60(edc_db: &[f64], sample_rate: f64, from_db: f64, to_db: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = edc_db
        .iter()
        .enumerate()
        .filter(|(_, &d)| d <= from_db && d >= to_db)
        .map(|(i, &d)| (i as f64 / sample_rate, d))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (mt, md) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0 / n, b + p.1 / n));
    let (sxy, sxx) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), p| (a + (p.0 - mt) * (p.1 - md), b + (p.0 - mt).powi(2)));
    let slope = sxy / sxx;
    (slope < 0.0).then(|| -60.0 / slope)
}

/// Per-octave-band T20 estimates of an impulse response.
pub fn band_rt60(ir: &[f64], sample_rate: f64) -> Vec<Option<f64>> {
    let n = (2 * ir.len()).next_power_of_two();
    let spec = fft::forward(ir, n);
    octave_masks(n, sample_rate)
        .iter()
        .map(|mask| {
            let band: Vec<_> = spec.iter().zip(mask).map(|(s, m)| s * *m).collect();
            let mut y = fft::inverse_real(band);
            y.truncate(ir.len());
            decay_rt60(&schroeder_decay_db(&y), sample_rate, -5.0, -25.0)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masks_partition_unity() {
        let n = 4096;
        let masks = octave_masks(n, 44100.0);
        for k in 0..n {
            let s: f64 = masks.iter().map(|m| m[k]).sum();
            assert!((s - 1.0).abs() < 1e-12, "bin {k}: {s}");
        }
        // each band peaks near its center
        for (b, &fc) in OCTAVE_CENTERS.iter().enumerate() {
            let k = (fc * n as f64 / 44100.0).round() as usize;
            assert!(masks[b][k] > 0.99, "band {b}");
        }
    }

    #[test]
    fn eyring_round_trip() {
        let room = RoomSpec::room1();
        for &t in &room.rt60_bands {
            let a = eyring_absorption(room.volume(), room.surface(), t);
            let k = 24.0 * std::f64::consts::LN_10 / SPEED_OF_SOUND;
            let back = k * room.volume() / (-room.surface() * (1.0 - a).ln());
            assert!((back - t).abs() < 1e-12);
        }
    }

    #[test]
    fn anechoic_limit_is_single_impulse() {
        let mut room = RoomSpec::room1();
        room.rt60_bands = [1e-9; 6];
        let fs = 8000.0;
        let src = [7.0, 4.0, 2.0];
        let ir = image_source_rir_omni(&room, src, fs, RirOptions { max_time: Some(0.1), ..Default::default() })
            .unwrap();
        let delay = 2.0 / SPEED_OF_SOUND * fs;
        let mut expect = vec![0.0; ir.len()];
        crate::scene::delay::add_impulse(&mut expect, delay, 0.5);
        for (a, b) in ir.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn direct_path_follows_inverse_distance() {
        let room = RoomSpec::room1();
        // whole-sample delays: 1 m and 2 m are 100 and 200 samples
        let fs = SPEED_OF_SOUND * 100.0;
        let opts = RirOptions { max_time: Some(0.05), max_order: Some(0), ..Default::default() };
        let near = image_source_rir_omni(&room, [6.0, 4.0, 2.0], fs, opts).unwrap();
        let far = image_source_rir_omni(&room, [7.0, 4.0, 2.0], fs, opts).unwrap();
        assert!((near[100] - 1.0).abs() < 1e-12);
        assert!((far[200] - 0.5).abs() < 1e-12);
        assert!((near[100] / far[200] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn coincident_source_rejected() {
        let room = RoomSpec::room1();
        let err = image_source_rir_omni(&room, room.mic_position, 8000.0, RirOptions::default()).unwrap_err();
        assert!(matches!(err, SeldError::SourceAtMicrophone));
        assert!(image_source_rir_omni(&room, [11.0, 1.0, 1.0], 8000.0, RirOptions::default()).is_err());
    }

    #[test]
    fn image_count_and_reflection_orders() {
        let room = RoomSpec::centered([3.0, 4.0, 5.0], [0.5; 6]);
        let imgs = enumerate_images(&room, [1.0, 1.0, 1.0], 1e9, Some(1)).unwrap();
        // direct path plus one image per wall
        assert_eq!(imgs.len(), 7);
        assert_eq!(imgs.iter().filter(|i| i.order == 0).count(), 1);
    }

    #[test]
    fn wall_distance_along_axes() {
        let room = RoomSpec::room1();
        let d = room.distance_to_wall(Direction::new(0.0, 0.0).unwrap());
        assert!((d - 5.0).abs() < 1e-12);
        let d = room.distance_to_wall(Direction::new(0.0, 90.0).unwrap());
        assert!((d - 2.0).abs() < 1e-12);
    }

    #[test]
    fn line_fit_of_exact_exponential_decay() {
        let fs = 1000.0;
        let edc: Vec<f64> = (0..2000).map(|i| -60.0 * i as f64 / fs / 0.8).collect();
        let t = decay_rt60(&edc, fs, -5.0, -25.0).unwrap();
        assert!((t - 0.8).abs() < 1e-9);
    }

    #[test]
    fn room1_band_reverberation_times() {
        let room = RoomSpec::room1();
        let src = room.source_position(Direction::new(40.0, 10.0).unwrap(), 3.0);
        let fs = 16000.0;
        let opts = RirOptions {
            reflection: Some(calibrated_reflection(&room, 1.2).unwrap()),
            ..Default::default()
        };
        let ir = image_source_rir_omni(&room, src, fs, opts).unwrap();
        let edc = schroeder_decay_db(&ir);
        assert!(edc.windows(2).all(|w| w[1] <= w[0] || w[1] == f64::NEG_INFINITY));
        let est = band_rt60(&ir, fs);
        for (e, want) in est.iter().zip(room.rt60_bands) {
            let e = e.unwrap();
            eprintln!("{want} -> {e}");
            assert!((e / want - 1.0).abs() <= 0.2, "{want}: {e}");
        }
    }
}
