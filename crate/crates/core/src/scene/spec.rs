use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::array::ArraySpec;
use super::bank::{EventBank, Split};
use super::direction::Direction;
use super::room::RoomSpec;
use crate::error::{invalid, Result, SeldError};

/// One annotated sound event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventInstance {
    pub class_id: usize,
    pub onset: f64,
    pub offset: f64,
    pub direction: Direction,
    pub distance: f64,
}

impl EventInstance {
    pub fn overlaps(&self, other: &EventInstance) -> bool {
        self.onset < other.offset && other.onset < self.offset
    }
}

/// An annotated event together with the bank clip that renders it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduledEvent {
    pub clip_id: usize,
    pub event: EventInstance,
}

/// Declarative description of one recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub duration: f64,
    pub sample_rate: f64,
    pub events: Vec<ScheduledEvent>,
    pub room: Option<RoomSpec>,
    pub array: ArraySpec,
    pub ambiance_snr_db: Option<f64>,
    pub max_overlap: usize,
    pub rng_seed: u64,
}

/// Angular grid for sampled directions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionGrid {
    pub step: f64,
    pub azimuth_offset: f64,
    pub elevation_offset: f64,
    /// Unshifted elevation range, lower bound inclusive and upper exclusive.
    pub elevation_min: f64,
    pub elevation_max: f64,
}

impl Default for DirectionGrid {
    fn default() -> Self {
        Self {
            step: 10.0,
            azimuth_offset: 0.0,
            elevation_offset: 0.0,
            elevation_min: -60.0,
            elevation_max: 60.0,
        }
    }
}

impl DirectionGrid {
    pub fn azimuths(&self) -> Vec<f64> {
        let n = (360.0 / self.step).round() as usize;
        (0..n).map(|i| -180.0 + self.azimuth_offset + i as f64 * self.step).collect()
    }

    pub fn elevations(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut j = 0;
        loop {
            let e = self.elevation_min + j as f64 * self.step;
            if e >= self.elevation_max - 1e-9 {
                break;
            }
            out.push(e + self.elevation_offset);
            j += 1;
        }
        out
    }

    pub fn points(&self) -> Result<Vec<Direction>> {
        let mut pts = Vec::new();
        for &el in &self.elevations() {
            for &az in &self.azimuths() {
                pts.push(Direction::new(az, el)?);
            }
        }
        Ok(pts)
    }
}

/// Knobs for [`sample_scene_spec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConstraints {
    pub duration: f64,
    pub sample_rate: f64,
    pub max_overlap: usize,
    pub room: Option<RoomSpec>,
    pub array: ArraySpec,
    pub ambiance_snr_db: Option<f64>,
    pub split: Split,
    pub grid: DirectionGrid,
    pub distance_min: f64,
    pub distance_max: f64,
    pub distance_step: f64,
    /// Silence between consecutive events on one overlap track, seconds.
    pub gap_min: f64,
    pub gap_max: f64,
    /// Clearance kept between reverberant sources and the walls.
    pub wall_margin: f64,
    pub seed: u64,
}

impl Default for SceneConstraints {
    fn default() -> Self {
        Self {
            duration: 30.0,
            sample_rate: 44100.0,
            max_overlap: 1,
            room: None,
            array: ArraySpec::Foa,
            ambiance_snr_db: None,
            split: Split::Train,
            grid: DirectionGrid::default(),
            distance_min: 1.0,
            distance_max: 10.0,
            distance_step: 0.5,
            gap_min: 0.2,
            gap_max: 1.5,
            wall_margin: 0.5,
            seed: 0,
        }
    }
}

/// Two grid points are "separated" when they differ by at least one grid
/// step in azimuth (wrapped) or in elevation.
fn grid_separated(a: Direction, b: Direction, step: f64) -> bool {
    let daz = super::direction::wrap_azimuth(a.azimuth - b.azimuth).abs();
    let del = (a.elevation - b.elevation).abs();
    daz >= step - 1e-9 || del >= step - 1e-9
}

fn distance_choices(c: &SceneConstraints, direction: Direction) -> Vec<f64> {
    let mut max = c.distance_max;
    if let Some(room) = &c.room {
        max = max.min(room.distance_to_wall(direction) - c.wall_margin);
    }
    let mut out = Vec::new();
    let mut k = 0;
    loop {
        let d = c.distance_min + k as f64 * c.distance_step;
        if d > max + 1e-9 {
            break;
        }
        out.push(d);
        k += 1;
    }
    out
}

/// Draws a random scene from the bank under `constraints`.
///
/// Events are laid out on `max_overlap` independent tracks; within a track
/// events never overlap, so at most `max_overlap` are active at any time.
pub fn sample_scene_spec(constraints: &SceneConstraints, bank: &EventBank) -> Result<SceneSpec> {
    let c = constraints;
    if bank.clips.is_empty() {
        return Err(SeldError::EmptyBank);
    }
    if !(1..=3).contains(&c.max_overlap) {
        return Err(invalid(format!("max_overlap {} not in 1..=3", c.max_overlap)));
    }
    if !(c.duration > 0.0) || !(c.sample_rate > 0.0) {
        return Err(invalid("duration and sample rate must be positive"));
    }
    if !(c.gap_min >= 0.0 && c.gap_max >= c.gap_min) {
        return Err(invalid("gap range is empty"));
    }
    c.array.validate()?;
    if let Some(room) = &c.room {
        room.validate()?;
    }
    let fs = c.sample_rate;
    let total = (c.duration * fs).round() as usize;
    let pool: Vec<_> = bank.split(c.split).collect();
    if pool.is_empty() {
        return Err(SeldError::EmptyBank);
    }
    let shortest = pool.iter().map(|clip| clip.samples.len()).min().unwrap_or(0);
    if shortest > total {
        return Err(SeldError::InfeasibleScene(format!(
            "shortest clip ({} samples) longer than the scene ({total} samples)",
            shortest
        )));
    }
    let grid = c.grid.points()?;
    if grid.is_empty() {
        return Err(invalid("direction grid is empty"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let gap = |rng: &mut ChaCha8Rng| -> usize {
        let g = if c.gap_max > c.gap_min { rng.gen_range(c.gap_min..c.gap_max) } else { c.gap_min };
        (g * fs).round() as usize
    };

    // timeline: (onset sample, clip)
    let mut timeline: Vec<(usize, usize)> = Vec::new();
    for _track in 0..c.max_overlap {
        let mut cursor = gap(&mut rng);
        loop {
            let mut placed = false;
            for _attempt in 0..8 {
                let clip = pool.choose(&mut rng).expect("pool non-empty");
                if cursor + clip.samples.len() <= total {
                    timeline.push((cursor, clip.id));
                    cursor += clip.samples.len() + gap(&mut rng);
                    placed = true;
                    break;
                }
            }
            if !placed {
                break;
            }
        }
    }
    timeline.sort();

    let mut events: Vec<ScheduledEvent> = Vec::with_capacity(timeline.len());
    for (onset_n, clip_id) in timeline {
        let clip = &bank.clips[clip_id];
        let onset = onset_n as f64 / fs;
        let offset = (onset_n + clip.samples.len()) as f64 / fs;
        let probe = EventInstance {
            class_id: clip.class_id,
            onset,
            offset,
            direction: grid[0],
            distance: c.distance_min,
        };
        let busy: Vec<Direction> = events
            .iter()
            .filter(|e| e.event.overlaps(&probe))
            .map(|e| e.event.direction)
            .collect();
        let mut chosen = None;
        for _ in 0..1000 {
            let d = *grid.choose(&mut rng).expect("grid non-empty");
            if busy.iter().all(|&b| grid_separated(b, d, c.grid.step)) {
                let choices = distance_choices(c, d);
                if let Some(&dist) = choices.choose(&mut rng) {
                    chosen = Some((d, dist));
                    break;
                }
            }
        }
        let (direction, distance) = chosen.ok_or_else(|| {
            SeldError::InfeasibleScene("no free direction for an overlapping event".into())
        })?;
        events.push(ScheduledEvent {
            clip_id,
            event: EventInstance {
                direction,
                distance,
                ..probe
            },
        });
    }

    let spec = SceneSpec {
        duration: c.duration,
        sample_rate: fs,
        events,
        room: c.room.clone(),
        array: c.array.clone(),
        ambiance_snr_db: c.ambiance_snr_db,
        max_overlap: c.max_overlap,
        rng_seed: c.seed,
    };
    spec.validate(bank)?;
    Ok(spec)
}

impl SceneSpec {
    pub fn annotations(&self) -> Vec<EventInstance> {
        self.events.iter().map(|e| e.event).collect()
    }

    pub fn total_samples(&self) -> usize {
        (self.duration * self.sample_rate).round() as usize
    }

    /// Largest number of simultaneously active events.
    pub fn peak_overlap(&self) -> usize {
        let mut edges: Vec<(f64, i32)> = self
            .events
            .iter()
            .flat_map(|e| [(e.event.onset, 1), (e.event.offset, -1)])
            .collect();
        // offsets sort before onsets at equal times: intervals are half-open
        edges.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut cur = 0i32;
        let mut peak = 0i32;
        for (_, d) in edges {
            cur += d;
            peak = peak.max(cur);
        }
        peak as usize
    }

    /// Checks every invariant of a scene against `bank`.
    pub fn validate(&self, bank: &EventBank) -> Result<()> {
        if !(self.duration > 0.0) {
            return Err(invalid("scene duration must be positive"));
        }
        if let Some(room) = &self.room {
            room.validate()?;
        }
        for ev in &self.events {
            let e = &ev.event;
            let clip = bank
                .clip(ev.clip_id)
                .ok_or_else(|| invalid(format!("clip {} not in bank", ev.clip_id)))?;
            if clip.class_id != e.class_id {
                return Err(invalid(format!("clip {} is not of class {}", ev.clip_id, e.class_id)));
            }
            if e.class_id >= bank.classes() {
                return Err(SeldError::ClassOutOfRange {
                    class_id: e.class_id,
                    classes: bank.classes(),
                });
            }
            if !(0.0 <= e.onset && e.onset < e.offset && e.offset <= self.duration + 1e-9) {
                return Err(invalid(format!("event interval [{}, {}) outside scene", e.onset, e.offset)));
            }
            match &self.room {
                None => {
                    let steps = (e.distance - 1.0) / 0.5;
                    if !(1.0..=10.0).contains(&e.distance) || (steps - steps.round()).abs() > 1e-9 {
                        return Err(invalid(format!("anechoic distance {} off the 0.5 m grid in [1, 10]", e.distance)));
                    }
                }
                Some(room) => {
                    let p = room.source_position(e.direction, e.distance);
                    if !room.contains(p) {
                        return Err(SeldError::OutsideRoom(p));
                    }
                }
            }
        }
        for (i, a) in self.events.iter().enumerate() {
            for b in &self.events[i + 1..] {
                if a.event.overlaps(&b.event) && a.event.direction.angle_to(b.event.direction) < 1e-9 {
                    return Err(invalid("overlapping events share a direction"));
                }
            }
        }
        if self.peak_overlap() > self.max_overlap {
            return Err(invalid(format!(
                "{} simultaneous events exceed max_overlap {}",
                self.peak_overlap(),
                self.max_overlap
            )));
        }
        Ok(())
    }

    /// Same events and timing with every direction rotated by fixed offsets.
    pub fn shifted(&self, d_azimuth: f64, d_elevation: f64) -> Result<SceneSpec> {
        let mut out = self.clone();
        for ev in &mut out.events {
            ev.event.direction = ev.event.direction.shifted(d_azimuth, d_elevation)?;
        }
        Ok(out)
    }
}
