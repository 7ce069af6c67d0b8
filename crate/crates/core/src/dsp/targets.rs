use serde::{Deserialize, Serialize};

use crate::error::{Result, SeldError};
use crate::scene::direction::{CartesianDoa, Direction};
use crate::scene::spec::EventInstance;

/// How DOA references are encoded for the regression head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DoaFormat {
    /// Unit-sphere `(x, y, z)` per class; inactive classes are `(0, 0, 0)`.
    #[default]
    Cartesian,
    /// `(azimuth / 180, elevation / 90)` per class; inactive classes carry
    /// the default direction `(180, 60)` degrees.
    AzEl,
}

pub const AZEL_INACTIVE: [f64; 2] = [1.0, 60.0 / 90.0];

impl DoaFormat {
    pub fn dims(self) -> usize {
        match self {
            DoaFormat::Cartesian => 3,
            DoaFormat::AzEl => 2,
        }
    }

    pub fn encode(self, d: Direction) -> Vec<f64> {
        match self {
            DoaFormat::Cartesian => d.to_cartesian().as_array().to_vec(),
            DoaFormat::AzEl => vec![d.azimuth / 180.0, d.elevation / 90.0],
        }
    }

    pub fn inactive(self) -> Vec<f64> {
        match self {
            DoaFormat::Cartesian => vec![0.0; 3],
            DoaFormat::AzEl => AZEL_INACTIVE.to_vec(),
        }
    }

    /// Unit vector for a raw network output, or `None` if it has no direction.
    pub fn decode(self, v: &[f64]) -> Option<CartesianDoa> {
        match self {
            DoaFormat::Cartesian => CartesianDoa::new(v[0], v[1], v[2]).normalized().ok(),
            DoaFormat::AzEl => {
                let el = (v[1] * 90.0).clamp(-90.0, 90.0);
                Direction::new(v[0] * 180.0, el).ok().map(|d| d.to_cartesian())
            }
        }
    }
}

/// Frame-wise references. `sed[t * classes + n]` is 0 or 1; the DOA block of
/// a frame is axis-major, `doa[t * dims * classes + axis * classes + n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetTensor {
    pub frames: usize,
    pub classes: usize,
    pub format: DoaFormat,
    pub sed: Vec<f64>,
    pub doa: Vec<f64>,
}

impl TargetTensor {
    pub fn dims(&self) -> usize {
        self.format.dims()
    }

    pub fn active(&self, t: usize, n: usize) -> bool {
        self.sed[t * self.classes + n] > 0.5
    }

    pub fn doa_of(&self, t: usize, n: usize) -> Vec<f64> {
        let d = self.dims();
        (0..d).map(|a| self.doa[t * d * self.classes + a * self.classes + n]).collect()
    }

    /// Reference unit vector of an active class.
    pub fn cartesian(&self, t: usize, n: usize) -> Option<CartesianDoa> {
        if !self.active(t, n) {
            return None;
        }
        self.format.decode(&self.doa_of(t, n))
    }

    pub fn active_count(&self, t: usize) -> usize {
        (0..self.classes).filter(|&n| self.active(t, n)).count()
    }
}

/// Time span of analysis frames: frame `t` covers `[t * hop, t * hop + window)`
/// seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameTiming {
    pub hop: f64,
    pub window: f64,
}

impl FrameTiming {
    pub fn new(window_samples: usize, sample_rate: f64) -> Self {
        Self {
            hop: (window_samples / 2) as f64 / sample_rate,
            window: window_samples as f64 / sample_rate,
        }
    }

    pub fn frames_per_second(&self) -> f64 {
        1.0 / self.hop
    }

    pub fn span(&self, t: usize) -> (f64, f64) {
        let start = t as f64 * self.hop;
        (start, start + self.window)
    }
}

/// Builds SED and DOA references. A class is active in every frame whose
/// span intersects one of its events; when two events of the same class
/// share a frame, the one covering more of the frame supplies the DOA.
pub fn frame_targets(
    annotations: &[EventInstance],
    frames: usize,
    timing: FrameTiming,
    classes: usize,
    format: DoaFormat,
) -> Result<TargetTensor> {
    for e in annotations {
        if e.class_id >= classes {
            return Err(SeldError::ClassOutOfRange {
                class_id: e.class_id,
                classes,
            });
        }
    }
    let d = format.dims();
    let mut sed = vec![0.0; frames * classes];
    let mut doa = Vec::with_capacity(frames * d * classes);
    let inactive = format.inactive();
    for _ in 0..frames {
        for v in &inactive {
            doa.extend(std::iter::repeat(*v).take(classes));
        }
    }
    let mut best = vec![0.0f64; frames * classes];
    for e in annotations {
        let first = ((e.onset - timing.window) / timing.hop).floor().max(0.0) as usize;
        let enc = format.encode(e.direction);
        for t in first..frames {
            let (s, f) = timing.span(t);
            if s >= e.offset {
                break;
            }
            let cover = f.min(e.offset) - s.max(e.onset);
            if cover <= 0.0 {
                continue;
            }
            let i = t * classes + e.class_id;
            if sed[i] == 0.0 || cover > best[i] {
                sed[i] = 1.0;
                best[i] = cover;
                for (a, v) in enc.iter().enumerate() {
                    doa[t * d * classes + a * classes + e.class_id] = *v;
                }
            }
        }
    }
    Ok(TargetTensor {
        frames,
        classes,
        format,
        sed,
        doa,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(class_id: usize, onset: f64, offset: f64, az: f64, el: f64) -> EventInstance {
        EventInstance {
            class_id,
            onset,
            offset,
            direction: Direction::new(az, el).unwrap(),
            distance: 2.0,
        }
    }

    fn timing() -> FrameTiming {
        FrameTiming { hop: 0.1, window: 0.2 }
    }

    #[test]
    fn cartesian_conventions() {
        let t = frame_targets(&[ev(0, 0.0, 1.0, 0.0, 0.0), ev(1, 0.0, 1.0, 90.0, 0.0)], 3, timing(), 2, DoaFormat::Cartesian).unwrap();
        let a = t.doa_of(0, 0);
        let b = t.doa_of(0, 1);
        assert!((a[0] - 1.0).abs() < 1e-15 && a[1].abs() < 1e-15 && a[2].abs() < 1e-15);
        assert!(b[0].abs() < 1e-15 && (b[1] - 1.0).abs() < 1e-15 && b[2].abs() < 1e-15);
    }

    #[test]
    fn empty_annotations_give_zero_targets() {
        let t = frame_targets(&[], 10, timing(), 3, DoaFormat::Cartesian).unwrap();
        assert!(t.sed.iter().chain(&t.doa).all(|v| v.to_bits() == 0));
    }

    #[test]
    fn activity_follows_frame_intersection() {
        // frames [0,.2) [.1,.3) [.2,.4) [.3,.5) [.4,.6)
        let t = frame_targets(&[ev(0, 0.25, 0.35, 10.0, 0.0)], 5, timing(), 1, DoaFormat::Cartesian).unwrap();
        let act: Vec<bool> = (0..5).map(|i| t.active(i, 0)).collect();
        assert_eq!(act, [false, true, true, true, false]);
    }

    #[test]
    fn inactive_entries_are_exact_zero_and_active_unit_norm() {
        let evs = [ev(0, 0.0, 0.5, 30.0, 20.0), ev(2, 0.3, 0.9, -140.0, -40.0)];
        let t = frame_targets(&evs, 12, timing(), 3, DoaFormat::Cartesian).unwrap();
        for f in 0..12 {
            for n in 0..3 {
                let v = t.doa_of(f, n);
                if t.active(f, n) {
                    let norm: f64 = v.iter().map(|x| x * x).sum();
                    assert!((norm - 1.0).abs() < 1e-9);
                } else {
                    assert!(v.iter().all(|x| x.to_bits() == 0));
                }
            }
        }
    }

    #[test]
    fn same_class_overlap_uses_larger_cover() {
        let evs = [ev(0, 0.0, 0.12, 0.0, 0.0), ev(0, 0.12, 1.0, 90.0, 0.0)];
        let t = frame_targets(&evs, 3, timing(), 1, DoaFormat::Cartesian).unwrap();
        assert!((t.doa_of(0, 0)[0] - 1.0).abs() < 1e-12);
        assert!((t.doa_of(1, 0)[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn class_out_of_range() {
        assert!(matches!(
            frame_targets(&[ev(3, 0.0, 1.0, 0.0, 0.0)], 3, timing(), 3, DoaFormat::Cartesian),
            Err(SeldError::ClassOutOfRange { .. })
        ));
    }

    #[test]
    fn azel_format_round_trip() {
        let t = frame_targets(&[ev(0, 0.0, 0.3, -120.0, 30.0)], 6, timing(), 2, DoaFormat::AzEl).unwrap();
        assert_eq!(t.doa_of(0, 0), vec![-120.0 / 180.0, 30.0 / 90.0]);
        assert_eq!(t.doa_of(0, 1), AZEL_INACTIVE.to_vec());
        let c = t.cartesian(0, 0).unwrap();
        let d = Direction::new(-120.0, 30.0).unwrap().to_cartesian();
        assert!((c.x - d.x).abs() < 1e-12 && (c.z - d.z).abs() < 1e-12);
    }
}
