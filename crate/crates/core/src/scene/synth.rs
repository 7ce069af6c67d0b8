use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ambisonics::encode_foa;
use super::array::{simulate_circular_array, ArraySpec};
use super::bank::EventBank;
use super::room::{calibrated_reflection, image_source_rir, RirOptions};
use super::spec::{EventInstance, SceneSpec};
use crate::error::{invalid, Result, SeldError};
use crate::fft;

/// Rendered scene: `channels[c][n]` plus the reference annotations.
#[derive(Debug, Clone)]
pub struct SceneAudio {
    pub channels: Vec<Vec<f64>>,
    pub annotations: Vec<EventInstance>,
    pub warnings: Vec<String>,
}

/// Peak magnitude above which a warning is recorded.
pub const DEFAULT_HEADROOM: f64 = 1.0;

fn add_at(out: &mut [Vec<f64>], rendered: &[Vec<f64>], onset: usize) {
    for (dst, src) in out.iter_mut().zip(rendered) {
        if onset >= dst.len() {
            continue;
        }
        let n = (dst.len() - onset).min(src.len());
        for (d, s) in dst[onset..onset + n].iter_mut().zip(&src[..n]) {
            *d += s;
        }
    }
}

/// Renders every event of `spec` and sums them into one recording.
///
/// Anechoic scenes use direct encoding (FOA) or plane-wave delays (circular
/// array); reverberant scenes convolve each clip with its per-channel
/// image-source response. Reverberant scenes without explicit reflection
/// coefficients use [`calibrated_reflection`]. No ambiance is added here.
pub fn synthesize_scene(spec: &SceneSpec, bank: &EventBank) -> Result<SceneAudio> {
    synthesize_scene_with(spec, bank, DEFAULT_HEADROOM, RirOptions::default())
}

pub fn synthesize_scene_with(
    spec: &SceneSpec,
    bank: &EventBank,
    headroom: f64,
    rir_options: RirOptions,
) -> Result<SceneAudio> {
    spec.validate(bank)?;
    if (bank.sample_rate - spec.sample_rate).abs() > 1e-9 {
        return Err(invalid("bank and scene sample rates differ"));
    }
    let fs = spec.sample_rate;
    let len = spec.total_samples();
    let mut rir_options = rir_options;
    if let (Some(room), None) = (&spec.room, rir_options.reflection) {
        let max_time = rir_options
            .max_time
            .unwrap_or(1.2 * room.rt60_bands.iter().cloned().fold(0.0, f64::max));
        rir_options.reflection = Some(calibrated_reflection(room, max_time)?);
    }
    let mut channels = vec![vec![0.0; len]; spec.array.channels()];
    for ev in &spec.events {
        let clip = &bank.clips[ev.clip_id].samples;
        let e = &ev.event;
        let onset = (e.onset * fs).round() as usize;
        let rendered = match &spec.room {
            None => match spec.array {
                ArraySpec::Foa => encode_foa(clip, e.direction, e.distance, fs)?,
                ArraySpec::Circular { .. } => simulate_circular_array(clip, e.direction, e.distance, &spec.array, fs)?,
            },
            Some(room) => {
                let pos = room.source_position(e.direction, e.distance);
                let rir = image_source_rir(room, pos, &spec.array, fs, rir_options)?;
                rir.iter().map(|h| fft::convolve(clip, h)).collect()
            }
        };
        add_at(&mut channels, &rendered, onset);
    }
    let peak = peak_abs(&channels);
    let mut warnings = Vec::new();
    if peak > headroom {
        warnings.push(format!("peak {peak:.3} exceeds headroom {headroom:.3}"));
    }
    Ok(SceneAudio {
        channels,
        annotations: spec.annotations(),
        warnings,
    })
}

pub fn peak_abs(channels: &[Vec<f64>]) -> f64 {
    channels.iter().flatten().fold(0.0, |m, &v| m.max(v.abs()))
}

/// Mean power over all channels and samples.
pub fn mean_power(channels: &[Vec<f64>]) -> f64 {
    let n: usize = channels.iter().map(|c| c.len()).sum();
    if n == 0 {
        return 0.0;
    }
    channels.iter().flatten().map(|v| v * v).sum::<f64>() / n as f64
}

/// Scales the whole recording so that its peak magnitude equals `target`.
pub fn normalize_peak(channels: &mut [Vec<f64>], target: f64) {
    let peak = peak_abs(channels);
    if peak > 0.0 {
        let g = target / peak;
        channels.iter_mut().flatten().for_each(|v| *v *= g);
    }
}

/// How a recorded ambiance of a different length is fitted to the scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmbianceFit {
    /// Repeat the ambiance when it is shorter than the scene.
    Loop,
    /// Require the ambiance to be at least as long as the scene.
    Crop,
}

/// Adds `ambiance` scaled so that the scene-to-ambiance power ratio over the
/// whole recording equals `snr_db`.
pub fn mix_ambiance(scene: &[Vec<f64>], ambiance: &[Vec<f64>], snr_db: f64, fit: AmbianceFit) -> Result<Vec<Vec<f64>>> {
    if scene.len() != ambiance.len() {
        return Err(SeldError::ChannelMismatch {
            expected: scene.len(),
            got: ambiance.len(),
        });
    }
    if !snr_db.is_finite() {
        return Err(invalid("snr must be finite"));
    }
    let len = scene.first().map_or(0, |c| c.len());
    let fitted: Vec<Vec<f64>> = ambiance
        .iter()
        .map(|a| {
            if a.is_empty() {
                return Err(SeldError::UndefinedSnr("empty ambiance"));
            }
            if a.len() >= len {
                Ok(a[..len].to_vec())
            } else if fit == AmbianceFit::Loop {
                Ok(a.iter().cycle().take(len).copied().collect())
            } else {
                Err(invalid(format!("ambiance of {} samples shorter than scene of {len}", a.len())))
            }
        })
        .collect::<Result<_>>()?;
    let ps = mean_power(scene);
    let pa = mean_power(&fitted);
    if ps == 0.0 {
        return Err(SeldError::UndefinedSnr("silent scene"));
    }
    if pa == 0.0 {
        return Err(SeldError::UndefinedSnr("silent ambiance"));
    }
    let gain = (ps / (pa * 10f64.powf(snr_db / 10.0))).sqrt();
    Ok(scene
        .iter()
        .zip(&fitted)
        .map(|(s, a)| s.iter().zip(a).map(|(x, y)| x + gain * y).collect())
        .collect())
}

/// Diffuse-like synthetic ambiance: independent low-tilted noise per channel.
pub fn synthetic_ambiance(channels: usize, len: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..channels)
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0xA5A5_0000 + c as u64));
            let (mut slow, mut mid) = (0.0, 0.0);
            (0..len)
                .map(|_| {
                    let w: f64 = rng.gen_range(-1.0..1.0);
                    slow += 0.01 * (w - slow);
                    mid += 0.2 * (w - mid);
                    3.0 * slow + mid + 0.2 * w
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::bank::BankConfig;
    use crate::scene::direction::{Direction, SPEED_OF_SOUND};
    use crate::scene::spec::ScheduledEvent;

    fn bank() -> EventBank {
        EventBank::synthetic(&BankConfig {
            classes: 3,
            examples_per_class: 2,
            test_examples_per_class: 1,
            min_duration: 0.1,
            max_duration: 0.2,
            sample_rate: 8000.0,
            seed: 3,
        })
        .unwrap()
    }

    fn spec_with(events: Vec<ScheduledEvent>) -> SceneSpec {
        SceneSpec {
            duration: 1.0,
            sample_rate: 8000.0,
            events,
            room: None,
            array: ArraySpec::Foa,
            ambiance_snr_db: None,
            max_overlap: 3,
            rng_seed: 0,
        }
    }

    fn event(b: &EventBank, clip_id: usize, onset: f64, az: f64, dist: f64) -> ScheduledEvent {
        let clip = &b.clips[clip_id];
        ScheduledEvent {
            clip_id,
            event: EventInstance {
                class_id: clip.class_id,
                onset,
                offset: onset + clip.samples.len() as f64 / 8000.0,
                direction: Direction::new(az, 0.0).unwrap(),
                distance: dist,
            },
        }
    }

    #[test]
    fn single_event_omni_channel_is_shifted_scaled_clip() {
        // at 6860 Hz every 0.5 m of distance is exactly 10 samples of delay
        let fs = 6860.0;
        let b = EventBank::synthetic(&BankConfig {
            classes: 1,
            examples_per_class: 2,
            test_examples_per_class: 1,
            min_duration: 0.1,
            max_duration: 0.2,
            sample_rate: fs,
            seed: 9,
        })
        .unwrap();
        let clip = &b.clips[0].samples;
        let onset_n = 700usize;
        let ev = ScheduledEvent {
            clip_id: 0,
            event: EventInstance {
                class_id: 0,
                onset: onset_n as f64 / fs,
                offset: (onset_n + clip.len()) as f64 / fs,
                direction: Direction::new(-70.0, 20.0).unwrap(),
                distance: 1.5,
            },
        };
        let mut spec = spec_with(vec![ev]);
        spec.sample_rate = fs;
        let out = synthesize_scene(&spec, &b).unwrap();
        let delay = (1.5 / SPEED_OF_SOUND * fs).round() as usize;
        assert_eq!(delay, 30);
        for (n, &w) in out.channels[0].iter().enumerate() {
            let expect = n
                .checked_sub(onset_n + delay)
                .and_then(|k| clip.get(k))
                .map_or(0.0, |x| x / 1.5);
            assert!((w - expect).abs() < 1e-15, "n = {n}");
        }
    }

    #[test]
    fn empty_scene_is_silent() {
        let out = synthesize_scene(&spec_with(vec![]), &bank()).unwrap();
        assert_eq!(out.channels.len(), 4);
        assert!(out.channels.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn superposition_of_events() {
        let b = bank();
        let e1 = event(&b, 0, 0.1, 30.0, 2.0);
        let e2 = event(&b, 2, 0.15, -60.0, 3.5);
        let both = synthesize_scene(&spec_with(vec![e1, e2]), &b).unwrap();
        let a = synthesize_scene(&spec_with(vec![e1]), &b).unwrap();
        let c = synthesize_scene(&spec_with(vec![e2]), &b).unwrap();
        for ch in 0..4 {
            for n in 0..both.channels[ch].len() {
                let s = a.channels[ch][n] + c.channels[ch][n];
                assert!((both.channels[ch][n] - s).abs() <= 1e-9);
            }
        }
        assert_eq!(both.annotations, vec![e1.event, e2.event]);
    }

    #[test]
    fn ambiance_snr_definitions() {
        let scene = synthetic_ambiance(2, 5000, 1);
        let amb = synthetic_ambiance(2, 3000, 2);
        for snr in [0.0, 10.0, 20.0] {
            let mixed = mix_ambiance(&scene, &amb, snr, AmbianceFit::Loop).unwrap();
            let noise: Vec<Vec<f64>> = mixed
                .iter()
                .zip(&scene)
                .map(|(m, s)| m.iter().zip(s).map(|(a, b)| a - b).collect())
                .collect();
            let measured = 10.0 * (mean_power(&scene) / mean_power(&noise)).log10();
            assert!((measured - snr).abs() < 0.01, "{snr}: {measured}");
        }
        assert!(mix_ambiance(&scene, &amb, 0.0, AmbianceFit::Crop).is_err());
    }

    #[test]
    fn silent_scene_has_no_snr() {
        let scene = vec![vec![0.0; 100]];
        let amb = vec![vec![1.0; 100]];
        assert!(matches!(
            mix_ambiance(&scene, &amb, 10.0, AmbianceFit::Loop).unwrap_err(),
            SeldError::UndefinedSnr(_)
        ));
    }

    #[test]
    fn peak_normalization() {
        let mut x = vec![vec![0.5, -2.0], vec![1.0, 0.0]];
        normalize_peak(&mut x, 0.9);
        assert!((peak_abs(&x) - 0.9).abs() < 1e-15);
    }
}
