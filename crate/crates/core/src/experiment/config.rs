use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::settings::Settings;
use crate::dsp::targets::DoaFormat;
use crate::error::{invalid, Result};
use crate::metrics::Association;
use crate::music::MusicConfig;
use crate::neural::{GruMerge, SeldnetConfig, TrainOptions};
use crate::scene::{ArraySpec, BankConfig, DirectionGrid, RoomSpec, SceneConstraints, Split};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub name: String,
    pub train: usize,
    pub test: usize,
    pub duration: f64,
    pub sample_rate: f64,
    pub overlap: usize,
    pub room: Option<RoomSpec>,
    pub array: ArraySpec,
    /// Cycled over recordings; empty means no ambiance.
    pub snr_db: Vec<f64>,
    pub grid_step: f64,
    pub distance_min: f64,
    pub distance_max: f64,
    pub gap_min: f64,
    pub gap_max: f64,
    pub test_azimuth_offset: f64,
    pub test_elevation_offset: f64,
    pub bank: BankConfig,
}

impl DatasetConfig {
    pub fn classes(&self) -> usize {
        self.bank.classes
    }

    pub fn count(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train,
            Split::Test => self.test,
        }
    }

    /// Scene constraints for one recording; test offsets are applied after
    /// sampling so shifted and unshifted sets share their scenes.
    pub fn constraints(&self, split: Split, seed: u64) -> SceneConstraints {
        SceneConstraints {
            duration: self.duration,
            sample_rate: self.sample_rate,
            max_overlap: self.overlap,
            room: self.room.clone(),
            array: self.array.clone(),
            ambiance_snr_db: None,
            split,
            grid: DirectionGrid {
                step: self.grid_step,
                ..DirectionGrid::default()
            },
            distance_min: self.distance_min,
            distance_max: self.distance_max,
            gap_min: self.gap_min,
            gap_max: self.gap_max,
            seed,
            ..SceneConstraints::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub data: PathBuf,
    pub split: Split,
    pub tag: String,
    pub threshold: f64,
    pub association: Association,
}

/// Everything a command needs, parsed from [`Settings`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub settings: Settings,
    pub seed: u64,
    pub jobs: usize,
    pub out: PathBuf,
    pub data: PathBuf,
    pub dataset: DatasetConfig,
    pub window: usize,
    pub normalize: bool,
    pub model: SeldnetConfig,
    pub train: TrainOptions,
    pub resume: bool,
    pub eval: EvalConfig,
    pub music: MusicConfig,
}

fn room(name: &str) -> Result<Option<RoomSpec>> {
    Ok(match name {
        "none" => None,
        "room1" => Some(RoomSpec::room1()),
        "room2" => Some(RoomSpec::room2()),
        "room3" => Some(RoomSpec::room3()),
        other => return Err(invalid(format!("unknown room {other:?}"))),
    })
}

impl ExperimentConfig {
    pub fn from_settings(s: Settings) -> Result<Self> {
        let seed: u64 = s.parse("seed")?;
        let jobs: usize = s.parse("jobs")?;
        let out = PathBuf::from(s.get("paths.out")?);
        let data = match s.get("paths.data")? {
            "" => out.join("data"),
            p => PathBuf::from(p),
        };
        let array = match s.get("dataset.array")? {
            "foa" => ArraySpec::Foa,
            "circular" => ArraySpec::default_circular(),
            other => return Err(invalid(format!("unknown array {other:?}"))),
        };
        let sample_rate: f64 = s.parse("dataset.sample_rate")?;
        let bank = BankConfig {
            classes: s.parse("dataset.classes")?,
            examples_per_class: s.parse("bank.examples_per_class")?,
            test_examples_per_class: s.parse("bank.test_examples_per_class")?,
            min_duration: s.parse("bank.min_duration")?,
            max_duration: s.parse("bank.max_duration")?,
            sample_rate,
            seed,
        };
        let dataset = DatasetConfig {
            name: s.get("dataset.name")?.to_string(),
            train: s.parse("dataset.train")?,
            test: s.parse("dataset.test")?,
            duration: s.parse("dataset.duration")?,
            sample_rate,
            overlap: s.parse("dataset.overlap")?,
            room: room(s.get("dataset.room")?)?,
            array,
            snr_db: s.list("dataset.snr_db")?,
            grid_step: s.parse("dataset.grid_step")?,
            distance_min: s.parse("dataset.distance_min")?,
            distance_max: s.parse("dataset.distance_max")?,
            gap_min: s.parse("dataset.gap_min")?,
            gap_max: s.parse("dataset.gap_max")?,
            test_azimuth_offset: s.parse("dataset.test_azimuth_offset")?,
            test_elevation_offset: s.parse("dataset.test_elevation_offset")?,
            bank,
        };
        let window: usize = s.parse("features.window")?;
        if window < 2 || !window.is_power_of_two() {
            return Err(invalid("features.window must be a power of two"));
        }
        let model = SeldnetConfig {
            conv_filters: s.list("model.conv_filters")?,
            freq_pools: s.list("model.freq_pools")?,
            gru_layers: s.parse("model.gru_layers")?,
            gru_width: s.parse("model.gru_width")?,
            gru_merge: match s.get("model.gru_merge")? {
                "mul" => GruMerge::Mul,
                "concat" => GruMerge::Concat,
                other => return Err(invalid(format!("unknown merge mode {other:?}"))),
            },
            fc_width: s.parse("model.fc_width")?,
            classes: dataset.classes(),
            channels: dataset.array.channels(),
            bins: window / 2,
            seq_len: s.parse("model.seq_len")?,
            doa_format: match s.get("model.doa_format")? {
                "cartesian" => DoaFormat::Cartesian,
                "azel" => DoaFormat::AzEl,
                other => return Err(invalid(format!("unknown DOA format {other:?}"))),
            },
            w_doa: s.parse("model.w_doa")?,
            learning_rate: s.parse("model.learning_rate")?,
            beta1: s.parse("model.beta1")?,
            beta2: s.parse("model.beta2")?,
            epsilon: s.parse("model.epsilon")?,
            seed,
        };
        model.validate()?;
        let threshold: f64 = s.parse("eval.threshold")?;
        let train = TrainOptions {
            epochs: s.parse("train.epochs")?,
            patience: s.parse("train.patience")?,
            batch_size: s.parse("train.batch_size")?,
            frames_per_second: sample_rate / (window / 2) as f64,
            threshold,
        };
        let eval = EvalConfig {
            data: match s.get("eval.data")? {
                "" => data.clone(),
                p => PathBuf::from(p),
            },
            split: match s.get("eval.split")? {
                "train" => Split::Train,
                "test" => Split::Test,
                other => return Err(invalid(format!("unknown split {other:?}"))),
            },
            tag: s.get("eval.tag")?.to_string(),
            threshold,
            association: match s.get("eval.association")? {
                "class_tied" => Association::ClassTied,
                "min_cost" => Association::MinCost,
                other => return Err(invalid(format!("unknown association {other:?}"))),
            },
        };
        let music = MusicConfig {
            f_min: s.parse("music.f_min")?,
            f_max: s.parse("music.f_max")?,
            context: s.parse("music.context")?,
            grid_step: s.parse("music.grid_step")?,
            elevation_min: s.parse("music.elevation_min")?,
            elevation_max: s.parse("music.elevation_max")?,
        };
        Ok(Self {
            resume: s.parse("train.resume")?,
            normalize: s.parse("features.normalize")?,
            settings: s,
            seed,
            jobs: jobs.max(1),
            out,
            data,
            dataset,
            window,
            model,
            train,
            eval,
            music,
        })
    }

    /// Preset or file, then `key=value` overrides.
    pub fn load(source: &str, overrides: &[String]) -> Result<Self> {
        let mut s = Settings::load(source)?;
        for o in overrides {
            s.apply_override(o)?;
        }
        Self::from_settings(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mini_presets_parse() {
        for name in super::super::settings::preset_names() {
            let c = ExperimentConfig::load(name, &[]).unwrap();
            assert_eq!(c.dataset.train + c.dataset.test, 30);
            assert_eq!(c.model.bins, 256);
        }
        let c = ExperimentConfig::load("cansyn-mini", &[]).unwrap();
        assert_eq!(c.model.channels, 8);
        let c = ExperimentConfig::load("shifted-grid", &[]).unwrap();
        assert_eq!((c.dataset.test_azimuth_offset, c.dataset.test_elevation_offset), (5.0, 5.0));
    }

    #[test]
    fn data_path_follows_out() {
        let c = ExperimentConfig::load("ansyn-mini", &["paths.out=/tmp/x".into()]).unwrap();
        assert_eq!(c.data, PathBuf::from("/tmp/x/data"));
        assert_eq!(c.eval.data, c.data);
    }

    #[test]
    fn bad_values_are_usage_errors() {
        let e = ExperimentConfig::load("ansyn-mini", &["model.freq_pools=8,8,3".into()]).unwrap_err();
        assert_eq!(e.exit_code(), 1);
        let e = ExperimentConfig::load("ansyn-mini", &["dataset.array=sphere".into()]).unwrap_err();
        assert_eq!(e.exit_code(), 1);
    }
}
