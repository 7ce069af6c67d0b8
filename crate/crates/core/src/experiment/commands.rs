//! The five experiment commands. Every artifact is a pure function of the
//! resolved settings and the input files, so reruns are byte-identical.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::config::ExperimentConfig;
use super::dataset::{self, load_split, LoadedRecording, Manifest};
use super::pool::parallel_map;
use crate::audio::read_wav;
use crate::dsp::features::{spectrograms, FeatureStats};
use crate::dsp::sequence::{segment_sequences, Sequence};
use crate::dsp::targets::{frame_targets, DoaFormat, FrameTiming};
use crate::error::{Result, SeldError};
use crate::metrics::{Association, Evaluator, MetricsReport};
use crate::music::{estimate_doas, write_estimates};
use crate::neural::checkpoint::{read_state, read_weights, write_state, write_weights};
use crate::neural::{history_csv, predict_recordings, Outcome, Recording, SeldModel, TrainState, Trainer};
use crate::scene::{read_annotations, CartesianDoa, Split};

pub const CONFIG_FILE: &str = "config.txt";
pub const STATS_FILE: &str = "feature_stats.json";
pub const HISTORY_FILE: &str = "history.csv";
pub const CHECKPOINT_FILE: &str = "best.ckpt";
pub const STATE_FILE: &str = "state.bin";
pub const SUMMARY_FILE: &str = "train_summary.txt";

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// `frame -> [(class, direction)]` from frame-wise targets.
fn reference_labels(rec: &LoadedRecording) -> Vec<Vec<(usize, CartesianDoa)>> {
    let t = &rec.targets;
    (0..t.frames)
        .map(|f| (0..t.classes).filter(|&n| t.active(f, n)).filter_map(|n| t.cartesian(f, n).map(|d| (n, d))).collect())
        .collect()
}

fn normalize(recs: &mut [LoadedRecording], stats: Option<&FeatureStats>) -> Result<()> {
    if let Some(s) = stats {
        for r in recs {
            s.apply(&mut r.features)?;
        }
    }
    Ok(())
}

fn to_recordings(recs: &[LoadedRecording], seq_len: usize) -> Result<Vec<Recording>> {
    recs.iter()
        .map(|r| {
            let seqs = segment_sequences(&r.features, &r.targets, seq_len)?;
            Ok(Recording {
                sequences: seqs,
                reference: reference_labels(r),
            })
        })
        .collect()
}

fn check_dataset(cfg: &ExperimentConfig, manifest: &Manifest) -> Result<()> {
    if manifest.dataset.classes() != cfg.model.classes || manifest.channels != cfg.model.channels {
        return Err(SeldError::ShapeMismatch(format!(
            "dataset has {} classes and {} channels, model expects {} and {}",
            manifest.dataset.classes(),
            manifest.channels,
            cfg.model.classes,
            cfg.model.channels
        )));
    }
    Ok(())
}

/// Writes the dataset described by `cfg` and returns its manifest.
pub fn generate(cfg: &ExperimentConfig) -> Result<Manifest> {
    dataset::generate(cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub outcome: Outcome,
    pub epochs: usize,
    pub best_epoch: usize,
    pub best_report: Option<MetricsReport>,
}

impl TrainSummary {
    fn to_text(&self) -> String {
        let outcome = match self.outcome {
            Outcome::Completed => "completed",
            Outcome::EarlyStopped => "early_stopped",
            Outcome::Diverged => "diverged",
        };
        let mut s = format!("outcome = {outcome}\nepochs = {}\nbest_epoch = {}\n", self.epochs, self.best_epoch);
        if let Some(r) = &self.best_report {
            s.push_str(&r.to_key_value());
        }
        s
    }
}

/// Trains on the train split with the test split as validation, writing the
/// history, best checkpoint and resumable state to `cfg.out`.
pub fn train(cfg: &ExperimentConfig, log: &mut dyn FnMut(&str)) -> Result<TrainSummary> {
    let manifest = Manifest::load(&cfg.data)?;
    check_dataset(cfg, &manifest)?;
    let format = cfg.model.doa_format;
    let mut train_recs = load_split(&cfg.data, &manifest, Split::Train, cfg.window, format, cfg.jobs)?;
    let mut val_recs = load_split(&cfg.data, &manifest, Split::Test, cfg.window, format, cfg.jobs)?;
    fs::create_dir_all(&cfg.out)?;
    fs::write(cfg.out.join(CONFIG_FILE), cfg.settings.to_text())?;
    let stats = if cfg.normalize {
        let s = dataset::fit_stats(&train_recs)?;
        dataset::save_stats(&cfg.out.join(STATS_FILE), &s)?;
        Some(s)
    } else {
        None
    };
    normalize(&mut train_recs, stats.as_ref())?;
    normalize(&mut val_recs, stats.as_ref())?;
    let seq_len = cfg.model.seq_len;
    let train_seqs: Vec<Sequence> = train_recs
        .iter()
        .map(|r| segment_sequences(&r.features, &r.targets, seq_len))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    drop(train_recs);
    let validation = to_recordings(&val_recs, seq_len)?;
    drop(val_recs);

    let state_path = cfg.out.join(STATE_FILE);
    let state = if cfg.resume && state_path.exists() {
        let st = read_state(&mut BufReader::new(fs::File::open(&state_path)?))?;
        if st.model.config != cfg.model {
            return Err(SeldError::InvalidArgument(format!(
                "saved state at {} was trained with a different model configuration",
                state_path.display()
            )));
        }
        log(&format!("resuming after epoch {}", st.epoch));
        st
    } else {
        TrainState::new(SeldModel::new(cfg.model.clone())?)
    };
    let mut trainer = Trainer::new(state, &train_seqs, &validation, cfg.train)?;
    let out = cfg.out.clone();
    let outcome = trainer.run(|rec, st| {
        let r = &rec.report;
        log(&format!(
            "epoch {:4}  loss {:.5}  ER {:.3}  F {:.3}  DOA {:.2}  recall {:.3}  SELD {:.4}{}",
            rec.epoch,
            rec.train_loss,
            r.er,
            r.f,
            r.doa_error,
            r.frame_recall,
            r.seld_score,
            if st.best_epoch == rec.epoch { "  *" } else { "" }
        ));
        write_atomic(&out.join(HISTORY_FILE), history_csv(&st.history).as_bytes())?;
        if st.best_epoch == rec.epoch {
            let mut buf = Vec::new();
            write_weights(&mut buf, &st.best_model())?;
            write_atomic(&out.join(CHECKPOINT_FILE), &buf)?;
        }
        let mut buf = Vec::new();
        write_state(&mut buf, st)?;
        write_atomic(&out.join(STATE_FILE), &buf)
    })?;
    let st = &trainer.state;
    let summary = TrainSummary {
        outcome,
        epochs: st.epoch,
        best_epoch: st.best_epoch,
        best_report: st.history.iter().find(|h| h.epoch == st.best_epoch).map(|h| h.report),
    };
    fs::write(cfg.out.join(SUMMARY_FILE), summary.to_text())?;
    // the final state records the outcome
    let mut buf = Vec::new();
    write_state(&mut buf, st)?;
    write_atomic(&state_path, &buf)?;
    Ok(summary)
}

pub fn load_model(out: &Path) -> Result<SeldModel> {
    let path = out.join(CHECKPOINT_FILE);
    let file = fs::File::open(&path).map_err(|_| SeldError::MissingData(format!("no checkpoint at {}; run `seld train` first", path.display())))?;
    read_weights(&mut BufReader::new(file))
}

/// Directory for one evaluation run.
pub fn eval_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.out.join(format!("eval_{}", cfg.eval.tag))
}

fn write_report(dir: &Path, report: &MetricsReport) -> Result<()> {
    fs::write(dir.join("report.txt"), report.to_key_value())?;
    fs::write(dir.join("report.csv"), format!("{}\n{}\n", MetricsReport::csv_header(), report.to_csv_row()))?;
    Ok(())
}

fn write_counts(path: &Path, rows: &[(String, Vec<usize>, Vec<usize>)]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "recording,frame,reference,estimated")?;
    for (name, reference, est) in rows {
        for (t, (r, e)) in reference.iter().zip(est).enumerate() {
            writeln!(w, "{name},{t},{r},{e}")?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Scores the trained network on `eval.split` of `eval.data`.
pub fn evaluate(cfg: &ExperimentConfig) -> Result<MetricsReport> {
    let model = load_model(&cfg.out)?;
    let manifest = Manifest::load(&cfg.eval.data)?;
    check_dataset(cfg, &manifest)?;
    let mut recs = load_split(&cfg.eval.data, &manifest, cfg.eval.split, cfg.window, model.config.doa_format, cfg.jobs)?;
    let stats = if cfg.normalize { Some(dataset::load_stats(&cfg.out.join(STATS_FILE))?) } else { None };
    normalize(&mut recs, stats.as_ref())?;
    let recordings = to_recordings(&recs, model.config.seq_len)?;
    let fps = manifest.dataset.sample_rate / (cfg.window / 2) as f64;
    let preds = parallel_map(&recordings, cfg.jobs, |r| {
        Ok(predict_recordings(&model, std::slice::from_ref(r), cfg.train.batch_size, cfg.eval.threshold)?.remove(0))
    })?;
    let mut ev = Evaluator::default();
    let dir = eval_dir(cfg);
    fs::create_dir_all(dir.join("predictions"))?;
    let mut counts = Vec::new();
    for ((p, rec), loaded) in preds.iter().zip(&recordings).zip(&recs) {
        ev.add_recording(p, &rec.reference, model.config.classes, fps, cfg.eval.association)?;
        let mut w = BufWriter::new(fs::File::create(dir.join("predictions").join(format!("{}.csv", loaded.name)))?);
        writeln!(w, "frame,class_id,x,y,z")?;
        for (t, frame) in p.iter().enumerate() {
            for (c, d) in frame {
                writeln!(w, "{t},{c},{},{},{}", d.x, d.y, d.z)?;
            }
        }
        w.flush()?;
        counts.push((loaded.name.clone(), rec.reference.iter().map(Vec::len).collect(), p.iter().map(Vec::len).collect()));
    }
    let report = ev.report()?;
    write_report(&dir, &report)?;
    write_counts(&dir.join("counts.csv"), &counts)?;
    Ok(report)
}

/// Runs MUSIC with reference source counts on `eval.split` of `eval.data`.
pub fn music(cfg: &ExperimentConfig) -> Result<MetricsReport> {
    let manifest = Manifest::load(&cfg.eval.data)?;
    let entries: Vec<_> = manifest.split(cfg.eval.split).collect();
    if entries.is_empty() {
        return Err(SeldError::MissingData("no recordings to analyse".into()));
    }
    let root = &cfg.eval.data;
    let fs_rate = manifest.dataset.sample_rate;
    let classes = manifest.dataset.classes();
    let dir = cfg.out.join("music");
    fs::create_dir_all(dir.join("estimates"))?;
    type Labels = Vec<Vec<(usize, CartesianDoa)>>;
    let results: Vec<(Labels, Labels)> = parallel_map(&entries, cfg.jobs, |e| {
        let (audio, _) = read_wav(&root.join(&e.wav))?;
        let specs = spectrograms(&audio, cfg.window)?;
        let frames = specs.first().map_or(0, |s| s.frames);
        let ann = read_annotations(fs::File::open(root.join(&e.annotations))?)?;
        let targets = frame_targets(&ann, frames, FrameTiming::new(cfg.window, fs_rate), classes, DoaFormat::Cartesian)?;
        let reference: Labels = (0..frames)
            .map(|t| (0..classes).filter_map(|n| targets.cartesian(t, n).map(|d| (n, d))).collect())
            .collect();
        let counts: Vec<usize> = reference.iter().map(Vec::len).collect();
        let est = estimate_doas(&specs, &counts, &manifest.dataset.array, fs_rate, &cfg.music)?;
        write_estimates(BufWriter::new(fs::File::create(dir.join("estimates").join(format!("{}.csv", e.name)))?), &est)?;
        // MUSIC has no class output; every estimate is labelled class 0
        let labels: Labels = est.iter().map(|f| f.doas.iter().map(|&d| (0, d)).collect()).collect();
        Ok((labels, reference))
    })?;
    let fps = fs_rate / (cfg.window / 2) as f64;
    let mut ev = Evaluator::default();
    for (est, reference) in &results {
        ev.add_recording(est, reference, classes, fps, Association::MinCost)?;
    }
    let report = ev.localization_report()?;
    write_report(&dir, &report)?;
    Ok(report)
}

/// `matrix[reference][estimated]` frame counts; square, sized by the
/// largest count seen.
pub fn confusion_matrix(reference: &[usize], estimated: &[usize]) -> Vec<Vec<u64>> {
    let k = reference.iter().chain(estimated).copied().max().unwrap_or(0) + 1;
    let mut m = vec![vec![0u64; k]; k];
    for (&r, &e) in reference.iter().zip(estimated) {
        m[r][e] += 1;
    }
    m
}

fn read_counts(path: &Path) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut rdr = csv::Reader::from_path(path).map_err(crate::scene::annotation::csv_err)?;
    let (mut r, mut e) = (Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec.map_err(crate::scene::annotation::csv_err)?;
        let num = |i: usize| rec[i].parse::<usize>().map_err(|_| SeldError::Format(format!("bad count {:?} in {}", &rec[i], path.display())));
        r.push(num(2)?);
        e.push(num(3)?);
    }
    Ok((r, e))
}

/// Plot-ready CSVs under `<out>/report`: loss and score curves from the
/// training history, one source-count confusion matrix per evaluation, and
/// a summary row per metrics report. Returns the files written.
pub fn report(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let dir = cfg.out.join("report");
    fs::create_dir_all(&dir)?;
    let mut written = Vec::new();
    let hist = cfg.out.join(HISTORY_FILE);
    if hist.exists() {
        let mut rdr = csv::Reader::from_path(&hist).map_err(crate::scene::annotation::csv_err)?;
        let mut loss = String::from("epoch,train_loss\n");
        let mut score = String::from("epoch,val_er,val_f,val_doa_err,val_frame_recall,val_seld_score\n");
        for rec in rdr.records() {
            let rec = rec.map_err(crate::scene::annotation::csv_err)?;
            if rec.len() != 7 {
                return Err(SeldError::Format(format!("history row with {} fields", rec.len())));
            }
            loss.push_str(&format!("{},{}\n", &rec[0], &rec[1]));
            let rest: Vec<&str> = rec.iter().skip(2).collect();
            score.push_str(&format!("{},{}\n", &rec[0], rest.join(",")));
        }
        for (name, text) in [("loss_curve.csv", loss), ("score_curve.csv", score)] {
            fs::write(dir.join(name), text)?;
            written.push(dir.join(name));
        }
    }
    let mut sources: Vec<(String, PathBuf)> = Vec::new();
    let mut evals: Vec<PathBuf> = fs::read_dir(&cfg.out)
        .map_err(|_| SeldError::MissingData(format!("no run directory at {}", cfg.out.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir() && p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("eval_")))
        .collect();
    evals.sort();
    for e in &evals {
        let tag = e.file_name().and_then(|n| n.to_str()).unwrap_or_default()["eval_".len()..].to_string();
        let counts = e.join("counts.csv");
        if counts.exists() {
            let (r, est) = read_counts(&counts)?;
            let m = confusion_matrix(&r, &est);
            let mut text = String::from("reference_count");
            for k in 0..m.len() {
                text.push_str(&format!(",est_{k}"));
            }
            text.push('\n');
            for (k, row) in m.iter().enumerate() {
                text.push_str(&k.to_string());
                for v in row {
                    text.push_str(&format!(",{v}"));
                }
                text.push('\n');
            }
            let path = dir.join(format!("confusion_{tag}.csv"));
            fs::write(&path, text)?;
            written.push(path);
        }
        sources.push((format!("seldnet_{tag}"), e.join("report.txt")));
    }
    sources.push(("music".into(), cfg.out.join("music").join("report.txt")));
    let mut summary = format!("source,{}\n", MetricsReport::csv_header());
    for (name, path) in sources {
        if let Ok(text) = fs::read_to_string(&path) {
            summary.push_str(&format!("{name},{}\n", MetricsReport::from_key_value(&text)?.to_csv_row()));
        }
    }
    fs::write(dir.join("summary.csv"), summary)?;
    written.push(dir.join("summary.csv"));
    if written.len() == 1 && !hist.exists() && evals.is_empty() && !cfg.out.join("music").exists() {
        return Err(SeldError::MissingData(format!("nothing to report in {}", cfg.out.display())));
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_rows_sum_to_reference_frames() {
        let r = [0, 1, 1, 2, 0, 1];
        let e = [0, 1, 2, 1, 1, 1];
        let m = confusion_matrix(&r, &e);
        for k in 0..3 {
            assert_eq!(m[k].iter().sum::<u64>(), r.iter().filter(|&&v| v == k).count() as u64);
        }
        let p = confusion_matrix(&r, &r);
        for (i, row) in p.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert!(i == j || v == 0);
            }
        }
    }
}
