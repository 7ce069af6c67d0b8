//! Bundled synthetic event bank: labeled mono clips from procedural
//! generators, one generator family per class.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

const FAMILIES: [&str; 11] = [
    "harmonic",
    "noise_low",
    "chirp_up",
    "chirp_down",
    "clicks",
    "tone_high",
    "am_tone",
    "fm_tone",
    "noise_high",
    "impacts",
    "bell",
];

/// Target RMS of every generated clip.
const CLIP_RMS: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Clip {
    pub id: usize,
    pub class_id: usize,
    pub split: Split,
    pub samples: Vec<f64>,
}

impl Clip {
    pub fn duration(&self, sample_rate: f64) -> f64 {
        self.samples.len() as f64 / sample_rate
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankConfig {
    pub classes: usize,
    pub examples_per_class: usize,
    pub test_examples_per_class: usize,
    pub min_duration: f64,
    pub max_duration: f64,
    pub sample_rate: f64,
    pub seed: u64,
}

impl Default for BankConfig {
    fn default() -> Self {
        Self {
            classes: 11,
            examples_per_class: 20,
            test_examples_per_class: 4,
            min_duration: 0.5,
            max_duration: 2.5,
            sample_rate: 44100.0,
            seed: 2018,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EventBank {
    pub class_names: Vec<String>,
    pub clips: Vec<Clip>,
    pub sample_rate: f64,
}

impl EventBank {
    /// A bank with no clips; scene sampling rejects it.
    pub fn empty(sample_rate: f64) -> Self {
        Self {
            class_names: Vec::new(),
            clips: Vec::new(),
            sample_rate,
        }
    }

    pub fn synthetic(cfg: &BankConfig) -> Result<Self> {
        if cfg.classes == 0 || cfg.examples_per_class == 0 {
            return Err(invalid("bank needs at least one class and one example"));
        }
        if cfg.test_examples_per_class >= cfg.examples_per_class {
            return Err(invalid("every class needs at least one training example"));
        }
        if !(cfg.min_duration > 0.0 && cfg.max_duration >= cfg.min_duration) {
            return Err(invalid("clip duration range is empty"));
        }
        let class_names = (0..cfg.classes)
            .map(|c| {
                let base = FAMILIES[c % FAMILIES.len()];
                if c < FAMILIES.len() {
                    base.to_string()
                } else {
                    format!("{base}_{}", c / FAMILIES.len())
                }
            })
            .collect();
        let mut clips = Vec::with_capacity(cfg.classes * cfg.examples_per_class);
        for class_id in 0..cfg.classes {
            for ex in 0..cfg.examples_per_class {
                let id = clips.len();
                let stream = cfg.seed ^ ((class_id as u64) << 32 | ex as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
                let mut rng = ChaCha8Rng::seed_from_u64(stream);
                let dur = rng.gen_range(cfg.min_duration..=cfg.max_duration);
                let n = (dur * cfg.sample_rate).round().max(1.0) as usize;
                // variant offsets the parameter ranges for classes beyond the family count
                let variant = (class_id / FAMILIES.len()) as f64;
                let mut samples = generate(class_id % FAMILIES.len(), variant, n, cfg.sample_rate, &mut rng);
                normalize_rms(&mut samples, CLIP_RMS);
                let split = if ex < cfg.examples_per_class - cfg.test_examples_per_class {
                    Split::Train
                } else {
                    Split::Test
                };
                clips.push(Clip {
                    id,
                    class_id,
                    split,
                    samples,
                });
            }
        }
        Ok(Self {
            class_names,
            clips,
            sample_rate: cfg.sample_rate,
        })
    }

    pub fn classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn clip(&self, id: usize) -> Option<&Clip> {
        self.clips.get(id)
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &Clip> {
        self.clips.iter().filter(move |c| c.split == split)
    }
}

fn normalize_rms(x: &mut [f64], target: f64) {
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt();
    if rms > 0.0 {
        let g = target / rms;
        x.iter_mut().for_each(|v| *v *= g);
    }
}

/// Attack/release envelope with linear ramps.
fn envelope(n: usize, i: usize, attack: usize, release: usize) -> f64 {
    let a = if attack > 0 && i < attack { i as f64 / attack as f64 } else { 1.0 };
    let r = if release > 0 && i + release > n {
        (n - i) as f64 / release as f64
    } else {
        1.0
    };
    a.min(r)
}

fn generate(family: usize, variant: f64, n: usize, fs: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let t = |i: usize| i as f64 / fs;
    let attack = (rng.gen_range(0.005..0.04) * fs) as usize;
    let release = (rng.gen_range(0.02..0.15) * fs) as usize;
    let shift = 1.0 + 0.15 * variant;
    let mut out = vec![0.0; n];
    match family {
        0 => {
            let f0 = rng.gen_range(180.0..280.0) * shift;
            for (i, o) in out.iter_mut().enumerate() {
                let s: f64 = (1..=8).map(|k| (2.0 * PI * f0 * k as f64 * t(i)).sin() / k as f64).sum();
                *o = s * envelope(n, i, attack, release);
            }
        }
        1 | 8 => {
            // one-pole lowpass noise; the high family takes the residual
            let a = if family == 1 { rng.gen_range(0.04..0.08) } else { rng.gen_range(0.3..0.5) };
            let mut lp = 0.0;
            for (i, o) in out.iter_mut().enumerate() {
                let w: f64 = rng.gen_range(-1.0..1.0);
                lp += a * (w - lp);
                let v = if family == 1 { lp } else { w - lp };
                *o = v * envelope(n, i, attack, release);
            }
        }
        2 | 3 => {
            let (f_start, f_end) = if family == 2 {
                (rng.gen_range(300.0..600.0), rng.gen_range(3000.0..5000.0))
            } else {
                (rng.gen_range(4000.0..6000.0), rng.gen_range(600.0..1000.0))
            };
            let dur = n as f64 / fs;
            let k = (f_end - f_start) / dur;
            for (i, o) in out.iter_mut().enumerate() {
                let ti = t(i);
                let phase = 2.0 * PI * (f_start * shift * ti + 0.5 * k * shift * ti * ti);
                *o = phase.sin() * envelope(n, i, attack, release);
            }
        }
        4 => {
            let rate = rng.gen_range(8.0..15.0) * shift;
            let period = (fs / rate) as usize;
            let decay = rng.gen_range(150.0..300.0);
            for (i, o) in out.iter_mut().enumerate() {
                let local = (i % period.max(1)) as f64 / fs;
                let w: f64 = rng.gen_range(-1.0..1.0);
                *o = w * (-decay * local).exp() * envelope(n, i, attack.min(64), release);
            }
        }
        5 => {
            let f0 = rng.gen_range(900.0..1400.0) * shift;
            for (i, o) in out.iter_mut().enumerate() {
                let s: f64 = (1..=3).map(|k| (2.0 * PI * f0 * k as f64 * t(i)).sin() * 0.6f64.powi(k - 1)).sum();
                *o = s * envelope(n, i, attack, release);
            }
        }
        6 => {
            let fc = rng.gen_range(500.0..800.0) * shift;
            let fm = rng.gen_range(4.0..8.0);
            for (i, o) in out.iter_mut().enumerate() {
                let am = 0.5 * (1.0 + (2.0 * PI * fm * t(i)).sin());
                let s = (2.0 * PI * fc * t(i)).sin() + 0.5 * (2.0 * PI * 2.0 * fc * t(i)).sin();
                *o = s * am * envelope(n, i, attack, release);
            }
        }
        7 => {
            let fc = rng.gen_range(1300.0..1800.0) * shift;
            let dev = rng.gen_range(100.0..300.0);
            let rate = rng.gen_range(4.0..7.0);
            let mut phase = 0.0;
            for (i, o) in out.iter_mut().enumerate() {
                let f = fc + dev * (2.0 * PI * rate * t(i)).sin();
                phase += 2.0 * PI * f / fs;
                *o = (phase.sin() + 0.3 * (2.0 * phase).sin()) * envelope(n, i, attack, release);
            }
        }
        9 => {
            let hits = rng.gen_range(2..5usize);
            let starts: Vec<usize> = (0..hits).map(|h| h * n / hits + rng.gen_range(0..(n / (2 * hits)).max(1))).collect();
            let decay = rng.gen_range(20.0..50.0);
            for (i, o) in out.iter_mut().enumerate() {
                let w: f64 = rng.gen_range(-1.0..1.0);
                let e: f64 = starts
                    .iter()
                    .filter(|&&s| i >= s)
                    .map(|&s| (-decay * (i - s) as f64 / fs).exp())
                    .sum();
                *o = w * e * envelope(n, i, 0, release);
            }
        }
        _ => {
            let f0 = rng.gen_range(300.0..500.0) * shift;
            let ratios = [1.0, 2.76, 5.4, 8.93];
            let decay = rng.gen_range(2.0..5.0);
            for (i, o) in out.iter_mut().enumerate() {
                let s: f64 = ratios
                    .iter()
                    .enumerate()
                    .map(|(k, r)| (2.0 * PI * f0 * r * t(i)).sin() * (-(decay * (1.0 + k as f64)) * t(i)).exp())
                    .sum();
                *o = s * envelope(n, i, 32, release);
            }
        }
    }
    out
}
