//! Dataset generation, manifests and loading of features and references.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{DatasetConfig, ExperimentConfig};
use super::pool::parallel_map;
use crate::audio::{read_wav, write_wav};
use crate::dsp::cache::{read_tensor, write_tensor};
use crate::dsp::features::{extract_features, FeatureStats, FeatureTensor};
use crate::dsp::targets::{frame_targets, DoaFormat, FrameTiming, TargetTensor};
use crate::error::{Result, SeldError};
use crate::scene::synth::{normalize_peak, synthetic_ambiance};
use crate::scene::{
    mix_ambiance, read_annotations, sample_scene_spec, synthesize_scene, write_annotations, AmbianceFit, EventBank, EventInstance, SceneSpec,
    Split,
};

pub const MANIFEST: &str = "manifest.json";
/// Peak level of written recordings.
pub const WRITE_PEAK: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub split: Split,
    pub seed: u64,
    pub wav: String,
    pub annotations: String,
    pub snr_db: Option<f64>,
    /// Complete scene description; with the bank settings it regenerates the
    /// recording without any RNG state.
    pub spec: SceneSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub dataset: DatasetConfig,
    pub class_names: Vec<String>,
    pub channels: usize,
    pub recordings: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|_| {
            SeldError::MissingData(format!("no dataset manifest at {}; run `seld generate` with this config first", path.display()))
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.recordings.iter().filter(move |r| r.split == split)
    }
}

/// Seed of recording `index` in `split`, independent across splits.
pub fn recording_seed(seed: u64, split: Split, index: usize) -> u64 {
    let tag = match split {
        Split::Train => 0x5452_4149_4e00_0000u64,
        Split::Test => 0x5445_5354_0000_0000u64,
    };
    (seed ^ tag).wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Renders one recording: events, optional ambiance, peak normalization.
pub fn render(spec: &SceneSpec, bank: &EventBank, snr_db: Option<f64>, seed: u64) -> Result<Vec<Vec<f64>>> {
    let audio = synthesize_scene(spec, bank)?;
    let mut channels = match snr_db {
        Some(snr) => {
            let len = spec.total_samples();
            mix_ambiance(&audio.channels, &synthetic_ambiance(spec.array.channels(), len, seed), snr, AmbianceFit::Loop)?
        }
        None => audio.channels,
    };
    normalize_peak(&mut channels, WRITE_PEAK);
    Ok(channels)
}

/// Writes WAVs, annotation CSVs and the manifest. Returns the manifest.
pub fn generate(cfg: &ExperimentConfig) -> Result<Manifest> {
    let d = &cfg.dataset;
    let bank = EventBank::synthetic(&d.bank)?;
    let mut entries = Vec::new();
    for split in [Split::Train, Split::Test] {
        for i in 0..d.count(split) {
            let seed = recording_seed(cfg.seed, split, i);
            let mut spec = sample_scene_spec(&d.constraints(split, seed), &bank)?;
            if split == Split::Test && (d.test_azimuth_offset != 0.0 || d.test_elevation_offset != 0.0) {
                spec = spec.shifted(d.test_azimuth_offset, d.test_elevation_offset)?;
            }
            let snr_db = (!d.snr_db.is_empty()).then(|| d.snr_db[entries.len() % d.snr_db.len()]);
            let name = format!("{}_{i:03}", split.as_str());
            entries.push(ManifestEntry {
                wav: format!("wav/{name}.wav"),
                annotations: format!("meta/{name}.csv"),
                name,
                split,
                seed,
                snr_db,
                spec,
            });
        }
    }
    let root = &cfg.data;
    fs::create_dir_all(root.join("wav"))?;
    fs::create_dir_all(root.join("meta"))?;
    parallel_map(&entries, cfg.jobs, |e| {
        let channels = render(&e.spec, &bank, e.snr_db, e.seed)?;
        write_wav(&root.join(&e.wav), &channels, d.sample_rate.round() as u32)?;
        write_annotations(BufWriter::new(fs::File::create(root.join(&e.annotations))?), &e.spec.annotations())
    })?;
    let manifest = Manifest {
        dataset: d.clone(),
        class_names: bank.class_names.clone(),
        channels: d.array.channels(),
        recordings: entries,
    };
    fs::write(root.join(MANIFEST), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

/// A loaded recording: features and frame-wise references.
#[derive(Debug, Clone)]
pub struct LoadedRecording {
    pub name: String,
    pub features: FeatureTensor,
    pub targets: TargetTensor,
    pub annotations: Vec<EventInstance>,
}

fn cache_path(root: &Path, name: &str, window: usize) -> PathBuf {
    root.join("features").join(format!("{name}_m{window}.bin"))
}

/// Features of one recording, read from the single-precision cache or
/// computed from its WAV and cached. Values are always single-precision
/// rounded so cached and fresh runs agree.
pub fn load_features(root: &Path, entry: &ManifestEntry, window: usize, channels: usize) -> Result<FeatureTensor> {
    let path = cache_path(root, &entry.name, window);
    if let Ok(file) = fs::File::open(&path) {
        let (dims, data) = read_tensor(std::io::BufReader::new(file))?;
        if let [frames, bins, planes] = dims[..] {
            if bins == window / 2 && planes == 2 * channels {
                return Ok(FeatureTensor { frames, bins, planes, data });
            }
        }
    }
    let (audio, _) = read_wav(&root.join(&entry.wav))?;
    let mut x = extract_features(&audio, window, channels)?;
    x.data.iter_mut().for_each(|v| *v = f64::from(*v as f32));
    fs::create_dir_all(root.join("features"))?;
    let tmp = path.with_extension("tmp");
    write_tensor(BufWriter::new(fs::File::create(&tmp)?), &[x.frames, x.bins, x.planes], &x.data)?;
    fs::rename(&tmp, &path)?;
    Ok(x)
}

/// Loads every recording of `split` in manifest order.
pub fn load_split(root: &Path, manifest: &Manifest, split: Split, window: usize, format: DoaFormat, jobs: usize) -> Result<Vec<LoadedRecording>> {
    let entries: Vec<&ManifestEntry> = manifest.split(split).collect();
    if entries.is_empty() {
        return Err(SeldError::MissingData(format!("dataset {} has no {} recordings", root.display(), split.as_str())));
    }
    let fs_rate = manifest.dataset.sample_rate;
    let classes = manifest.dataset.classes();
    parallel_map(&entries, jobs, |e| {
        let features = load_features(root, e, window, manifest.channels)?;
        let annotations = read_annotations(fs::File::open(root.join(&e.annotations))?)?;
        let targets = frame_targets(&annotations, features.frames, FrameTiming::new(window, fs_rate), classes, format)?;
        Ok(LoadedRecording {
            name: e.name.clone(),
            features,
            targets,
            annotations,
        })
    })
}

/// Per-bin magnitude statistics of the training recordings.
pub fn fit_stats(recs: &[LoadedRecording]) -> Result<FeatureStats> {
    FeatureStats::fit(recs.iter().map(|r| &r.features))
}

pub fn save_stats(path: &Path, stats: &FeatureStats) -> Result<()> {
    fs::write(path, serde_json::to_string(stats)?)?;
    Ok(())
}

pub fn load_stats(path: &Path) -> Result<FeatureStats> {
    let text = fs::read_to_string(path).map_err(|_| SeldError::MissingData(format!("no feature statistics at {}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}
