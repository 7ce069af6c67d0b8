//! Segment-based detection scores, central-angle localization error, frame
//! recall and the composite SED / DOA / SELD scores.

pub mod assignment;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SeldError};
use crate::scene::direction::CartesianDoa;
pub use assignment::min_cost_assignment;

/// Frame-wise class activity, `activity[t][n]`.
pub type Activity = Vec<Vec<bool>>;

/// Logical OR of frame activity over consecutive one-second segments.
/// Frame `t` belongs to segment `floor(t / frames_per_second)`.
pub fn segment_pool(frames: &[Vec<bool>], classes: usize, frames_per_second: f64) -> Result<Activity> {
    if !(frames_per_second > 0.0) {
        return Err(invalid("frames per second must be positive"));
    }
    let k = (frames.len() as f64 / frames_per_second).ceil() as usize;
    let mut out = vec![vec![false; classes]; k];
    for (t, row) in frames.iter().enumerate() {
        if row.len() != classes {
            return Err(SeldError::ShapeMismatch(format!("frame {t} has {} classes, expected {classes}", row.len())));
        }
        let s = (t as f64 / frames_per_second).floor() as usize;
        for (o, &a) in out[s].iter_mut().zip(row) {
            *o |= a;
        }
    }
    Ok(out)
}

/// Detection counts summed over segments.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub n: u64,
    pub s: u64,
    pub d: u64,
    pub i: u64,
}

impl SegmentCounts {
    /// Counts for one segment.
    pub fn segment(pred: &[bool], reference: &[bool]) -> Self {
        let mut tp = 0;
        let mut fp = 0;
        let mut fn_ = 0;
        for (&p, &r) in pred.iter().zip(reference) {
            match (p, r) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                _ => {}
            }
        }
        Self {
            tp,
            fp,
            fn_,
            n: tp + fn_,
            s: fn_.min(fp),
            d: fn_.saturating_sub(fp),
            i: fp.saturating_sub(fn_),
        }
    }

    pub fn add(&mut self, o: &SegmentCounts) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
        self.n += o.n;
        self.s += o.s;
        self.d += o.d;
        self.i += o.i;
    }

    /// Counts accumulated over all segments of one recording.
    pub fn recording(pred: &[Vec<bool>], reference: &[Vec<bool>]) -> Result<Self> {
        if pred.len() != reference.len() {
            return Err(SeldError::ShapeMismatch(format!(
                "{} predicted segments but {} reference segments",
                pred.len(),
                reference.len()
            )));
        }
        let mut c = Self::default();
        for (p, r) in pred.iter().zip(reference) {
            if p.len() != r.len() {
                return Err(SeldError::ShapeMismatch("class counts differ".into()));
            }
            c.add(&Self::segment(p, r));
        }
        Ok(c)
    }

    pub fn error_rate(&self) -> Result<f64> {
        if self.n == 0 {
            return Err(SeldError::NoReferenceEvents);
        }
        Ok((self.s + self.d + self.i) as f64 / self.n as f64)
    }

    pub fn f_score(&self) -> f64 {
        let den = 2 * self.tp + self.fp + self.fn_;
        if den == 0 {
            1.0
        } else {
            2.0 * self.tp as f64 / den as f64
        }
    }
}

/// Micro-averaged `(ER, F)` over the given segments.
pub fn sed_scores(pred: &[Vec<bool>], reference: &[Vec<bool>]) -> Result<(f64, f64)> {
    let c = SegmentCounts::recording(pred, reference)?;
    Ok((c.error_rate()?, c.f_score()))
}

fn unit(p: CartesianDoa) -> Result<CartesianDoa> {
    let n = p.norm();
    if !n.is_finite() || (n - 1.0).abs() > 1e-6 {
        return Err(SeldError::NotUnitNorm(n));
    }
    Ok(CartesianDoa::new(p.x / n, p.y / n, p.z / n))
}

/// Great-circle angle in degrees between two unit vectors.
pub fn central_angle(p1: CartesianDoa, p2: CartesianDoa) -> Result<f64> {
    let (a, b) = (unit(p1)?, unit(p2)?);
    let chord = ((a.x - b.x).powi(2) + (a.y - b.y).powi(2) + (a.z - b.z).powi(2)).sqrt();
    Ok(2.0 * (chord / 2.0).min(1.0).asin().to_degrees())
}

/// How estimated and reference DOAs are paired within a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Association {
    /// Pair estimate and reference of the same class.
    ClassTied,
    /// Unlabeled estimates, paired by minimum total central angle.
    MinCost,
}

/// Per-frame list of `(class, direction)`; the class is ignored by
/// [`Association::MinCost`].
pub type FrameDoas = Vec<Vec<(usize, CartesianDoa)>>;

/// Running sum of paired central angles.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DoaAccumulator {
    pub sum_deg: f64,
    pub pairs: u64,
}

impl DoaAccumulator {
    pub fn add_frames(&mut self, est: &[Vec<(usize, CartesianDoa)>], reference: &[Vec<(usize, CartesianDoa)>], mode: Association) -> Result<()> {
        if est.len() != reference.len() {
            return Err(SeldError::ShapeMismatch(format!(
                "{} estimated frames but {} reference frames",
                est.len(),
                reference.len()
            )));
        }
        for (e, r) in est.iter().zip(reference) {
            match mode {
                Association::ClassTied => {
                    for (ce, pe) in e {
                        if let Some((_, pr)) = r.iter().find(|(cr, _)| cr == ce) {
                            self.sum_deg += central_angle(*pe, *pr)?;
                            self.pairs += 1;
                        }
                    }
                }
                Association::MinCost => {
                    if e.is_empty() || r.is_empty() {
                        continue;
                    }
                    let cost = e
                        .iter()
                        .map(|(_, pe)| r.iter().map(|(_, pr)| central_angle(*pe, *pr)).collect::<Result<Vec<_>>>())
                        .collect::<Result<Vec<_>>>()?;
                    for (i, j) in min_cost_assignment(&cost) {
                        self.sum_deg += cost[i][j];
                        self.pairs += 1;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn add(&mut self, o: &DoaAccumulator) {
        self.sum_deg += o.sum_deg;
        self.pairs += o.pairs;
    }

    pub fn mean(&self) -> Result<f64> {
        if self.pairs == 0 {
            return Err(SeldError::NoDoaPairs);
        }
        Ok(self.sum_deg / self.pairs as f64)
    }
}

/// Mean central angle over all paired estimates.
pub fn doa_error(est: &[Vec<(usize, CartesianDoa)>], reference: &[Vec<(usize, CartesianDoa)>], mode: Association) -> Result<f64> {
    let mut acc = DoaAccumulator::default();
    acc.add_frames(est, reference, mode)?;
    acc.mean()
}

/// Frames whose estimated source count equals the reference count.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecallCounts {
    pub matched: u64,
    pub frames: u64,
}

impl RecallCounts {
    pub fn from_counts(est: &[usize], reference: &[usize]) -> Result<Self> {
        if est.len() != reference.len() {
            return Err(SeldError::ShapeMismatch("frame counts differ".into()));
        }
        Ok(Self {
            matched: est.iter().zip(reference).filter(|(a, b)| a == b).count() as u64,
            frames: est.len() as u64,
        })
    }

    pub fn add(&mut self, o: &RecallCounts) {
        self.matched += o.matched;
        self.frames += o.frames;
    }

    pub fn recall(&self) -> Result<f64> {
        if self.frames == 0 {
            return Err(SeldError::MissingData("no frames for frame recall".into()));
        }
        Ok(self.matched as f64 / self.frames as f64)
    }
}

/// Fraction of frames, silent ones included, with the right source count.
pub fn frame_recall(est: &[usize], reference: &[usize]) -> Result<f64> {
    RecallCounts::from_counts(est, reference)?.recall()
}

/// `(SED score, DOA score, SELD score)`.
pub fn composite_scores(er: f64, f: f64, doa_error: f64, frame_recall: f64) -> (f64, f64, f64) {
    let sed = (er + 1.0 - f) / 2.0;
    let doa = (doa_error / 180.0 + 1.0 - frame_recall) / 2.0;
    (sed, doa, (sed + doa) / 2.0)
}

/// Evaluation summary. Detection fields are NaN when the method does not
/// detect events (MUSIC is given the reference source counts).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub er: f64,
    pub f: f64,
    pub doa_error: f64,
    pub frame_recall: f64,
    pub sed_score: f64,
    pub doa_score: f64,
    pub seld_score: f64,
}

pub const REPORT_KEYS: [&str; 7] = ["er", "f", "doa_error", "frame_recall", "sed_score", "doa_score", "seld_score"];

impl MetricsReport {
    pub fn new(er: f64, f: f64, doa_error: f64, frame_recall: f64) -> Self {
        let (sed_score, doa_score, seld_score) = composite_scores(er, f, doa_error, frame_recall);
        Self {
            er,
            f,
            doa_error,
            frame_recall,
            sed_score,
            doa_score,
            seld_score,
        }
    }

    pub fn values(&self) -> [f64; 7] {
        [
            self.er,
            self.f,
            self.doa_error,
            self.frame_recall,
            self.sed_score,
            self.doa_score,
            self.seld_score,
        ]
    }

    /// `key = value` lines in a fixed order.
    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        for (k, v) in REPORT_KEYS.iter().zip(self.values()) {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn from_key_value(text: &str) -> Result<Self> {
        let mut vals = [f64::NAN; 7];
        let mut seen = [false; 7];
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| SeldError::Format(format!("expected key = value, got {line:?}")))?;
            let k = k.trim();
            if let Some(i) = REPORT_KEYS.iter().position(|&r| r == k) {
                vals[i] = v
                    .trim()
                    .parse()
                    .map_err(|_| SeldError::Format(format!("bad value for {k}")))?;
                seen[i] = true;
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(SeldError::Format(format!("report is missing {}", REPORT_KEYS[i])));
        }
        Ok(Self {
            er: vals[0],
            f: vals[1],
            doa_error: vals[2],
            frame_recall: vals[3],
            sed_score: vals[4],
            doa_score: vals[5],
            seld_score: vals[6],
        })
    }

    pub fn csv_header() -> String {
        REPORT_KEYS.join(",")
    }

    pub fn to_csv_row(&self) -> String {
        self.values().iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
    }
}

/// Accumulates counts over recordings for a micro-averaged report.
#[derive(Debug, Clone, Default)]
pub struct Evaluator {
    pub segments: SegmentCounts,
    pub doa: DoaAccumulator,
    pub recall: RecallCounts,
}

impl Evaluator {
    /// Adds one recording. `pred` and `reference` list `(class, direction)`
    /// per frame.
    pub fn add_recording(
        &mut self,
        pred: &[Vec<(usize, CartesianDoa)>],
        reference: &[Vec<(usize, CartesianDoa)>],
        classes: usize,
        frames_per_second: f64,
        mode: Association,
    ) -> Result<()> {
        let activity = |frames: &[Vec<(usize, CartesianDoa)>]| -> Result<Activity> {
            frames
                .iter()
                .map(|f| {
                    let mut row = vec![false; classes];
                    for &(c, _) in f {
                        *row.get_mut(c).ok_or(SeldError::ClassOutOfRange { class_id: c, classes })? = true;
                    }
                    Ok(row)
                })
                .collect()
        };
        let ps = segment_pool(&activity(pred)?, classes, frames_per_second)?;
        let rs = segment_pool(&activity(reference)?, classes, frames_per_second)?;
        self.segments.add(&SegmentCounts::recording(&ps, &rs)?);
        self.doa.add_frames(pred, reference, mode)?;
        let ec: Vec<usize> = pred.iter().map(Vec::len).collect();
        let rc: Vec<usize> = reference.iter().map(Vec::len).collect();
        self.recall.add(&RecallCounts::from_counts(&ec, &rc)?);
        Ok(())
    }

    /// Report with detection scores. A run without any paired DOA reports
    /// the worst error, 180 degrees.
    pub fn report(&self) -> Result<MetricsReport> {
        let er = self.segments.error_rate()?;
        let doa = if self.doa.pairs == 0 { 180.0 } else { self.doa.mean()? };
        Ok(MetricsReport::new(er, self.segments.f_score(), doa, self.recall.recall()?))
    }

    /// Report for a localization-only method: detection fields are NaN.
    pub fn localization_report(&self) -> Result<MetricsReport> {
        let doa = self.doa.mean()?;
        let recall = self.recall.recall()?;
        let (_, doa_score, _) = composite_scores(0.0, 1.0, doa, recall);
        Ok(MetricsReport {
            er: f64::NAN,
            f: f64::NAN,
            doa_error: doa,
            frame_recall: recall,
            sed_score: f64::NAN,
            doa_score,
            seld_score: f64::NAN,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64, z: f64) -> CartesianDoa {
        CartesianDoa::new(x, y, z)
    }

    #[test]
    fn hand_counted_segment() {
        // reference {A, B}, prediction {A, C}
        let c = SegmentCounts::segment(&[true, false, true], &[true, true, false]);
        assert_eq!((c.tp, c.fp, c.fn_, c.s, c.d, c.i, c.n), (1, 1, 1, 1, 0, 0, 2));
        let (er, f) = sed_scores(&[vec![true, false, true]], &[vec![true, true, false]]).unwrap();
        assert_eq!((er, f), (0.5, 0.5));
    }

    #[test]
    fn perfect_detection() {
        let r = vec![vec![true, false], vec![false, true]];
        assert_eq!(sed_scores(&r, &r).unwrap(), (0.0, 1.0));
    }

    #[test]
    fn no_reference_events_is_an_error() {
        assert!(matches!(
            sed_scores(&[vec![true]], &[vec![false]]),
            Err(SeldError::NoReferenceEvents)
        ));
    }

    #[test]
    fn pooling_rules() {
        let mut frames = vec![vec![false, false]; 25];
        frames[13][1] = true;
        let s = segment_pool(&frames, 2, 10.0).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s[1], vec![false, true]);
        assert!(!s[0][1] && !s[2][1]);
        let s = segment_pool(&frames, 2, 172.265625).unwrap();
        assert_eq!(s.len(), 1);
        assert!(segment_pool(&vec![vec![false; 2]; 0], 2, 10.0).unwrap().is_empty());
    }

    #[test]
    fn central_angle_spot_values() {
        assert_eq!(central_angle(p(1.0, 0.0, 0.0), p(1.0, 0.0, 0.0)).unwrap(), 0.0);
        assert!((central_angle(p(0.0, 0.0, 1.0), p(0.0, 0.0, -1.0)).unwrap() - 180.0).abs() < 1e-9);
        assert!((central_angle(p(1.0, 0.0, 0.0), p(0.0, 1.0, 0.0)).unwrap() - 90.0).abs() < 1e-9);
        assert!(matches!(
            central_angle(p(2.0, 0.0, 0.0), p(1.0, 0.0, 0.0)),
            Err(SeldError::NotUnitNorm(_))
        ));
    }

    #[test]
    fn single_pair_doa_error() {
        let e = vec![vec![(0, p(1.0, 0.0, 0.0))]];
        let r = vec![vec![(0, p(0.0, 1.0, 0.0))]];
        for mode in [Association::ClassTied, Association::MinCost] {
            assert!((doa_error(&e, &r, mode).unwrap() - 90.0).abs() < 1e-9);
        }
        let other_class = vec![vec![(1, p(0.0, 1.0, 0.0))]];
        assert!(matches!(
            doa_error(&e, &other_class, Association::ClassTied),
            Err(SeldError::NoDoaPairs)
        ));
    }

    #[test]
    fn recall_rules() {
        assert_eq!(frame_recall(&[1, 2, 0, 1], &[1, 2, 0, 2]).unwrap(), 0.75);
        assert_eq!(frame_recall(&[0; 10], &[0; 10]).unwrap(), 1.0);
    }

    #[test]
    fn composite_values() {
        assert_eq!(composite_scores(0.0, 1.0, 0.0, 1.0), (0.0, 0.0, 0.0));
        assert_eq!(composite_scores(0.5, 0.5, 90.0, 0.5), (0.5, 0.5, 0.5));
    }

    #[test]
    fn report_round_trips_through_text() {
        let r = MetricsReport::new(0.25, 0.8, 12.5, 0.9);
        let back = MetricsReport::from_key_value(&r.to_key_value()).unwrap();
        assert_eq!(back, r);
        assert_eq!(MetricsReport::csv_header().split(',').count(), r.to_csv_row().split(',').count());
        assert!(MetricsReport::from_key_value("er = 1").is_err());
    }
}
