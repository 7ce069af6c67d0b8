//! Browser demo: MUSIC pseudo-spectrum heatmaps, array responses and room
//! energy decay, computed by the core crate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seld_core::dsp::stft::stft;
use seld_core::music::{music_spectrum, spatial_covariance, MusicConfig, SteeringGrid};
use seld_core::scene::room::{decay_rt60, image_source_rir_omni, schroeder_decay_db};
use seld_core::scene::{calibrated_reflection, encode_foa, sh_gains, ArraySpec, Direction, RirOptions, RoomSpec};
use wasm_bindgen::prelude::*;

const DEMO_RATE: f64 = 16000.0;
const DEMO_WINDOW: usize = 512;

fn js_err(e: seld_core::SeldError) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// MUSIC pseudo-spectrum for one or two white-noise sources in anechoic
/// FOA, on the 10-degree grid (13 elevation rows of 36 azimuths, starting
/// at -60, -180). `sources` is flat `[az, el, az, el, ...]`. Values are
/// normalized to a peak of 1.
#[wasm_bindgen]
pub fn music_heatmap(sources: &[f64], noise_db: f64, seed: u32) -> Result<Vec<f32>, JsValue> {
    if sources.is_empty() || sources.len() % 2 != 0 || sources.len() > 6 {
        return Err(JsValue::from_str("give one to three (azimuth, elevation) pairs"));
    }
    let len = DEMO_WINDOW * 8;
    let mut rng = ChaCha8Rng::seed_from_u64(u64::from(seed));
    let mut mix = vec![vec![0.0; len]; 4];
    for pair in sources.chunks_exact(2) {
        let dir = Direction::new(pair[0], pair[1]).map_err(js_err)?;
        let sig: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let enc = encode_foa(&sig, dir, 1.0, DEMO_RATE).map_err(js_err)?;
        for (m, e) in mix.iter_mut().zip(&enc) {
            for (a, b) in m.iter_mut().zip(e) {
                *a += b;
            }
        }
    }
    let noise = 10f64.powf(noise_db / 20.0);
    for ch in &mut mix {
        ch.iter_mut().for_each(|v| *v += noise * rng.gen_range(-1.0..1.0));
    }
    let specs = mix.iter().map(|c| stft(c, DEMO_WINDOW)).collect::<Result<Vec<_>, _>>().map_err(js_err)?;
    let cfg = MusicConfig {
        context: specs[0].frames,
        ..MusicConfig::default()
    };
    let center = specs[0].frames / 2;
    let cov = spatial_covariance(&specs, center, &ArraySpec::Foa, DEMO_RATE, &cfg).map_err(js_err)?;
    let grid = SteeringGrid::from_config(&cfg).map_err(js_err)?;
    let p = music_spectrum(&cov, &ArraySpec::Foa, &grid, sources.len() / 2).map_err(js_err)?;
    let peak = p.iter().cloned().fold(0.0, f64::max);
    Ok(p.iter().map(|v| (v / peak) as f32).collect())
}

/// FOA channel gains (W, Y, Z, X) followed by the eight circular-array
/// arrival delays in microseconds, for a far-field source.
#[wasm_bindgen]
pub fn array_response(azimuth: f64, elevation: f64) -> Result<Vec<f64>, JsValue> {
    let dir = Direction::new(azimuth, elevation).map_err(js_err)?;
    let mut out = sh_gains(dir).to_vec();
    out.extend(ArraySpec::default_circular().relative_delays(dir).iter().map(|d| d * 1e6));
    Ok(out)
}

/// Schroeder energy decay (dB, one value per millisecond) of a centred
/// source-receiver pair in a `w x d x h` room with the same RT60 in every
/// band, using calibrated wall reflection. The last value is the T20-based RT60 estimate in seconds (NaN if
/// the decay is too short).
#[wasm_bindgen]
pub fn room_decay(width: f64, depth: f64, height: f64, rt60: f64) -> Result<Vec<f64>, JsValue> {
    let room = RoomSpec::centered([width, depth, height], [rt60; 6]);
    room.validate().map_err(js_err)?;
    let fs = 8000.0;
    let m = room.mic_position;
    let src = [m[0] + 0.3 * width / 2.0, m[1] + 0.2 * depth / 2.0, m[2] + 0.1 * height / 2.0];
    let max_time = 1.5 * rt60;
    let opts = RirOptions {
        max_time: Some(max_time),
        reflection: Some(calibrated_reflection(&room, max_time).map_err(js_err)?),
        ..RirOptions::default()
    };
    let ir = image_source_rir_omni(&room, src, fs, opts).map_err(js_err)?;
    let edc = schroeder_decay_db(&ir);
    let mut out: Vec<f64> = edc.iter().step_by((fs / 1000.0) as usize).map(|v| v.max(-100.0)).collect();
    out.push(decay_rt60(&edc, fs, -5.0, -25.0).unwrap_or(f64::NAN));
    Ok(out)
}
