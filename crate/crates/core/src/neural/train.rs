use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamParams, AdamState};
use super::loss::seld_loss;
use super::model::{threshold_predictions, Batch, SeldModel};
use crate::dsp::sequence::Sequence;
use crate::error::{invalid, Result, SeldError};
use crate::metrics::{Association, Evaluator, MetricsReport};
use crate::scene::direction::CartesianDoa;

/// Per-frame `(class, direction)` lists.
pub type FrameLabels = Vec<Vec<(usize, CartesianDoa)>>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    /// Frame rate used to pool frames into one-second segments.
    pub frames_per_second: f64,
    pub threshold: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 1000,
            patience: 100,
            batch_size: 16,
            frames_per_second: 44100.0 / 256.0,
            threshold: 0.5,
        }
    }
}

/// A validation or test recording: its chunks and the frame-wise reference.
#[derive(Debug, Clone)]
pub struct Recording {
    pub sequences: Vec<Sequence>,
    pub reference: FrameLabels,
}

impl Recording {
    /// Reference labels taken from the chunk targets.
    pub fn from_sequences(sequences: Vec<Sequence>) -> Result<Self> {
        let joined = crate::dsp::sequence::join_targets(&sequences).ok_or(SeldError::MissingData("recording without frames".into()))?;
        let reference = (0..joined.frames)
            .map(|t| {
                (0..joined.classes)
                    .filter(|&n| joined.active(t, n))
                    .map(|n| joined.cartesian(t, n).map(|d| (n, d)).ok_or(SeldError::NotUnitNorm(0.0)))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<FrameLabels>>()?;
        Ok(Self { sequences, reference })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// Ran the full epoch budget.
    Completed,
    /// Validation score stopped improving.
    EarlyStopped,
    /// The loss became non-finite; history up to that point is kept.
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub report: MetricsReport,
}

pub const HISTORY_HEADER: &str = "epoch,train_loss,val_er,val_f,val_doa_err,val_frame_recall,val_seld_score";

/// History as CSV text.
pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut s = format!("{HISTORY_HEADER}\n");
    for h in history {
        let r = &h.report;
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            h.epoch, h.train_loss, r.er, r.f, r.doa_error, r.frame_recall, r.seld_score
        ));
    }
    s
}

/// Everything needed to continue training bit-exactly.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub model: SeldModel,
    pub adam: AdamState,
    /// Epochs completed so far.
    pub epoch: usize,
    pub best_values: Vec<f64>,
    pub best_epoch: usize,
    pub best_score: f64,
    pub since_best: usize,
    pub history: Vec<EpochRecord>,
    pub outcome: Option<Outcome>,
}

impl TrainState {
    pub fn new(model: SeldModel) -> Self {
        let n = model.values.len();
        Self {
            best_values: model.values.clone(),
            model,
            adam: AdamState::new(n),
            epoch: 0,
            best_epoch: 0,
            best_score: f64::INFINITY,
            since_best: 0,
            history: Vec::new(),
            outcome: None,
        }
    }

    pub fn best_model(&self) -> SeldModel {
        let mut m = self.model.clone();
        m.values.clone_from(&self.best_values);
        m
    }
}

/// Network predictions for each recording, restricted to valid frames.
pub fn predict_recordings(model: &SeldModel, recordings: &[Recording], batch_size: usize, threshold: f64) -> Result<Vec<FrameLabels>> {
    recordings
        .iter()
        .map(|rec| {
            let mut labels = FrameLabels::new();
            for chunk in rec.sequences.chunks(batch_size.max(1)) {
                let refs: Vec<&Sequence> = chunk.iter().collect();
                let batch = Batch::from_sequences(&refs)?;
                let pred = model.predict(&batch.x, batch.size, batch.frames)?;
                let frames = threshold_predictions(&pred, threshold);
                labels.extend(frames.into_iter().zip(&batch.mask).filter(|(_, &m)| m).map(|(f, _)| f));
            }
            Ok(labels)
        })
        .collect()
}

/// Class-tied SELD metrics of `model` over `recordings`.
pub fn evaluate_model(model: &SeldModel, recordings: &[Recording], opts: &TrainOptions) -> Result<MetricsReport> {
    let preds = predict_recordings(model, recordings, opts.batch_size, opts.threshold)?;
    let mut ev = Evaluator::default();
    for (p, rec) in preds.iter().zip(recordings) {
        ev.add_recording(p, &rec.reference, model.config.classes, opts.frames_per_second, Association::ClassTied)?;
    }
    ev.report()
}

fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Sequential, seeded training with SELD-score early stopping.
pub struct Trainer<'a> {
    pub train: &'a [Sequence],
    pub validation: &'a [Recording],
    pub options: TrainOptions,
    pub state: TrainState,
}

impl<'a> Trainer<'a> {
    pub fn new(state: TrainState, train: &'a [Sequence], validation: &'a [Recording], options: TrainOptions) -> Result<Self> {
        if train.is_empty() || validation.is_empty() {
            return Err(SeldError::MissingData("training needs non-empty training and validation sets".into()));
        }
        if options.batch_size == 0 {
            return Err(invalid("batch size must be positive"));
        }
        Ok(Self {
            train,
            validation,
            options,
            state,
        })
    }

    pub fn finished(&self) -> bool {
        self.state.outcome.is_some()
    }

    /// One pass over the training set; returns the mean batch loss, or
    /// `None` if the loss went non-finite.
    fn train_epoch(&mut self) -> Result<Option<f64>> {
        let st = &mut self.state;
        let cfg = st.model.config.clone();
        let hp = AdamParams {
            learning_rate: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            epsilon: cfg.epsilon,
        };
        let mut order: Vec<usize> = (0..self.train.len()).collect();
        order.shuffle(&mut epoch_rng(cfg.seed, st.epoch + 1));
        let mut total = 0.0;
        let mut batches = 0;
        for idx in order.chunks(self.options.batch_size) {
            let seqs: Vec<&Sequence> = idx.iter().map(|&i| &self.train[i]).collect();
            let batch = Batch::from_sequences(&seqs)?;
            let (pred, cache) = st.model.forward_train(&batch.x, batch.size, batch.frames)?;
            let (loss, grad) = match seld_loss(&pred, &batch.targets, &batch.mask, cfg.w_doa) {
                Ok(v) => v,
                Err(SeldError::NonFinite(_)) => return Ok(None),
                Err(e) => return Err(e),
            };
            if !loss.is_finite() {
                return Ok(None);
            }
            let g = st.model.backward(&cache, &pred, &grad);
            if g.iter().any(|v| !v.is_finite()) {
                return Ok(None);
            }
            st.model.update_running_stats(&cache);
            adam_step(&mut st.model.values, &g, &mut st.adam, &hp);
            total += loss;
            batches += 1;
        }
        Ok(Some(total / batches as f64))
    }

    /// Runs one epoch with validation. Returns the new history entry, or
    /// `None` once training has ended.
    pub fn step(&mut self) -> Result<Option<EpochRecord>> {
        if self.finished() {
            return Ok(None);
        }
        if self.state.epoch >= self.options.epochs {
            self.state.outcome = Some(Outcome::Completed);
            return Ok(None);
        }
        let Some(train_loss) = self.train_epoch()? else {
            self.state.outcome = Some(Outcome::Diverged);
            return Ok(None);
        };
        let report = evaluate_model(&self.state.model, self.validation, &self.options)?;
        let st = &mut self.state;
        st.epoch += 1;
        if report.seld_score < st.best_score {
            st.best_score = report.seld_score;
            st.best_epoch = st.epoch;
            st.best_values.clone_from(&st.model.values);
            st.since_best = 0;
        } else {
            st.since_best += 1;
        }
        let rec = EpochRecord {
            epoch: st.epoch,
            train_loss,
            report,
        };
        st.history.push(rec.clone());
        if st.since_best >= self.options.patience {
            st.outcome = Some(Outcome::EarlyStopped);
        } else if st.epoch >= self.options.epochs {
            st.outcome = Some(Outcome::Completed);
        }
        Ok(Some(rec))
    }

    /// Trains until done, calling `on_epoch` after each epoch.
    pub fn run(&mut self, mut on_epoch: impl FnMut(&EpochRecord, &TrainState) -> Result<()>) -> Result<Outcome> {
        while let Some(rec) = self.step()? {
            on_epoch(&rec, &self.state)?;
        }
        Ok(self.state.outcome.unwrap_or(Outcome::Completed))
    }
}
