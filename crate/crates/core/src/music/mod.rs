//! MUSIC direction-of-arrival baseline for FOA and circular arrays.

pub mod eigen;

use std::f64::consts::PI;
use std::io::{Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dsp::stft::Spectrogram;
use crate::error::{invalid, Result, SeldError};
use crate::scene::ambisonics::sh_gains;
use crate::scene::array::ArraySpec;
use crate::scene::direction::{CartesianDoa, Direction};
pub use eigen::{hermitian_eigen, CMatrix, Eigen};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MusicConfig {
    pub f_min: f64,
    pub f_max: f64,
    /// Frames on each side of the center frame in the covariance average.
    pub context: usize,
    pub grid_step: f64,
    pub elevation_min: f64,
    pub elevation_max: f64,
}

impl Default for MusicConfig {
    fn default() -> Self {
        Self {
            f_min: 50.0,
            f_max: 8000.0,
            context: 1,
            grid_step: 10.0,
            elevation_min: -60.0,
            elevation_max: 60.0,
        }
    }
}

/// Real first-order SH steering vector, identical to the FOA encoder gains.
pub fn sh_steering(direction: Direction) -> [f64; 4] {
    sh_gains(direction)
}

/// Narrowband steering vector of a circular array.
pub fn uca_steering(array: &ArraySpec, direction: Direction, frequency: f64) -> Vec<Complex64> {
    array
        .relative_delays(direction)
        .iter()
        .map(|tau| Complex64::from_polar(1.0, -2.0 * PI * frequency * tau))
        .collect()
}

/// Candidate directions on a regular azimuth x elevation grid; point
/// `e * azimuths + a` has the `e`-th elevation and `a`-th azimuth.
#[derive(Debug, Clone)]
pub struct SteeringGrid {
    pub azimuths: usize,
    pub elevations: usize,
    pub directions: Vec<Direction>,
}

impl SteeringGrid {
    pub fn new(step: f64, elevation_min: f64, elevation_max: f64) -> Result<Self> {
        if !(step > 0.0) || 360.0 % step != 0.0 {
            return Err(invalid(format!("grid step {step} must divide 360")));
        }
        let azimuths = (360.0 / step).round() as usize;
        let elevations = ((elevation_max - elevation_min) / step).floor() as usize + 1;
        let mut directions = Vec::with_capacity(azimuths * elevations);
        for e in 0..elevations {
            for a in 0..azimuths {
                directions.push(Direction::new(-180.0 + a as f64 * step, elevation_min + e as f64 * step)?);
            }
        }
        Ok(Self {
            azimuths,
            elevations,
            directions,
        })
    }

    pub fn from_config(cfg: &MusicConfig) -> Result<Self> {
        Self::new(cfg.grid_step, cfg.elevation_min, cfg.elevation_max)
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// The up to eight neighbors, azimuth wrapping around.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        let (e, a) = ((i / self.azimuths) as isize, (i % self.azimuths) as isize);
        let na = self.azimuths as isize;
        let mut out = Vec::with_capacity(8);
        for de in -1..=1 {
            for da in -1..=1 {
                if de == 0 && da == 0 {
                    continue;
                }
                let ee = e + de;
                if ee < 0 || ee >= self.elevations as isize {
                    continue;
                }
                let aa = (a + da).rem_euclid(na);
                let j = (ee * na + aa) as usize;
                if j != i && !out.contains(&j) {
                    out.push(j);
                }
            }
        }
        out
    }
}

/// Covariance of one analysis block: a single broadband matrix for FOA or
/// one matrix per retained bin for a circular array.
#[derive(Debug, Clone)]
pub struct SpatialCovariance {
    pub frame: usize,
    pub frequencies: Vec<f64>,
    pub matrices: Vec<CMatrix>,
}

/// Indices of the bins between `f_lo` and `f_hi` (inclusive).
fn bin_range(spec: &Spectrogram, sample_rate: f64, f_lo: f64, f_hi: f64) -> Vec<usize> {
    (0..spec.bins)
        .filter(|&f| {
            let hz = spec.bin_frequency(f, sample_rate);
            hz >= f_lo && hz <= f_hi
        })
        .collect()
}

/// Highest analysed frequency for an array.
pub fn upper_frequency(array: &ArraySpec, cfg: &MusicConfig) -> f64 {
    if array.is_foa() {
        cfg.f_max
    } else {
        cfg.f_max.min(array.aliasing_frequency())
    }
}

/// Averages `x x^H` over the frames around `frame` (clamped at the edges)
/// and over the analysed bins.
pub fn spatial_covariance(
    specs: &[Spectrogram],
    frame: usize,
    array: &ArraySpec,
    sample_rate: f64,
    cfg: &MusicConfig,
) -> Result<SpatialCovariance> {
    let c = specs.len();
    if c != array.channels() {
        return Err(SeldError::ChannelMismatch {
            expected: array.channels(),
            got: c,
        });
    }
    let frames = specs[0].frames;
    if frame >= frames {
        return Err(invalid(format!("frame {frame} beyond {frames}")));
    }
    let lo = frame.saturating_sub(cfg.context);
    let hi = (frame + cfg.context).min(frames - 1);
    let bins = bin_range(&specs[0], sample_rate, cfg.f_min, upper_frequency(array, cfg));
    let mut x = vec![Complex64::new(0.0, 0.0); c];
    let nf = (hi - lo + 1) as f64;
    if array.is_foa() {
        let mut m = CMatrix::zeros(c);
        for t in lo..=hi {
            for &f in &bins {
                for (ch, s) in specs.iter().enumerate() {
                    x[ch] = s.at(t, f);
                }
                m.add_outer(&x, 1.0);
            }
        }
        m.scale(1.0 / (nf * bins.len().max(1) as f64));
        m.symmetrize();
        Ok(SpatialCovariance {
            frame,
            frequencies: Vec::new(),
            matrices: vec![m],
        })
    } else {
        let mut matrices = Vec::with_capacity(bins.len());
        for &f in &bins {
            let mut m = CMatrix::zeros(c);
            for t in lo..=hi {
                for (ch, s) in specs.iter().enumerate() {
                    x[ch] = s.at(t, f);
                }
                m.add_outer(&x, 1.0);
            }
            m.scale(1.0 / nf);
            m.symmetrize();
            matrices.push(m);
        }
        Ok(SpatialCovariance {
            frame,
            frequencies: bins.iter().map(|&f| specs[0].bin_frequency(f, sample_rate)).collect(),
            matrices,
        })
    }
}

/// `1 / ||E_n^H a||^2` with the noise subspace of the `C - K` smallest
/// eigenvalues.
fn narrowband_spectrum(cov: &CMatrix, k: usize, steering: impl Fn(usize) -> Vec<Complex64>, points: usize, out: &mut [f64]) {
    let e = hermitian_eigen(cov);
    let noise = &e.vectors[k..];
    for (i, o) in out.iter_mut().enumerate().take(points) {
        let a = steering(i);
        let mut den = 0.0;
        for v in noise {
            let d: Complex64 = v.iter().zip(&a).map(|(vi, ai)| vi.conj() * ai).sum();
            den += d.norm_sqr();
        }
        *o += 1.0 / den.max(1e-300);
    }
}

/// MUSIC pseudo-spectrum over `grid`; circular arrays sum the narrowband
/// spectra of every analysed bin.
pub fn music_spectrum(cov: &SpatialCovariance, array: &ArraySpec, grid: &SteeringGrid, k: usize) -> Result<Vec<f64>> {
    let c = array.channels();
    if k == 0 || k >= c {
        return Err(SeldError::TooManySources { sources: k, channels: c });
    }
    let mut p = vec![0.0; grid.len()];
    if array.is_foa() {
        let sv: Vec<Vec<Complex64>> = grid
            .directions
            .iter()
            .map(|&d| sh_steering(d).iter().map(|&g| Complex64::new(g, 0.0)).collect())
            .collect();
        narrowband_spectrum(&cov.matrices[0], k, |i| sv[i].clone(), grid.len(), &mut p);
    } else {
        for (m, &f) in cov.matrices.iter().zip(&cov.frequencies) {
            narrowband_spectrum(m, k, |i| uca_steering(array, grid.directions[i], f), grid.len(), &mut p);
        }
    }
    Ok(p)
}

/// Grid indices of local maxima (eight-neighborhood, ties broken towards
/// the lower index), strongest first.
pub fn local_maxima(p: &[f64], grid: &SteeringGrid) -> Vec<usize> {
    let mut peaks: Vec<usize> = (0..p.len())
        .filter(|&i| {
            grid.neighbors(i)
                .iter()
                .all(|&j| p[i] > p[j] || (p[i] == p[j] && i < j))
        })
        .collect();
    peaks.sort_by(|&a, &b| p[b].total_cmp(&p[a]).then(a.cmp(&b)));
    peaks
}

/// The `k` strongest local maxima. When there are fewer, the remaining slots
/// take the strongest grid points not adjacent to a chosen one, and the
/// second value is `true`.
pub fn pick_peaks(p: &[f64], grid: &SteeringGrid, k: usize) -> (Vec<usize>, bool) {
    let mut chosen: Vec<usize> = local_maxima(p, grid).into_iter().take(k).collect();
    let padded = chosen.len() < k;
    if padded {
        let mut order: Vec<usize> = (0..p.len()).collect();
        order.sort_by(|&a, &b| p[b].total_cmp(&p[a]).then(a.cmp(&b)));
        for i in order.iter().copied() {
            if chosen.len() == k {
                break;
            }
            if !chosen.contains(&i) && !chosen.iter().any(|&c| grid.neighbors(c).contains(&i)) {
                chosen.push(i);
            }
        }
        // a grid too small for non-adjacent picks still yields k entries
        for i in order {
            if chosen.len() == k {
                break;
            }
            if !chosen.contains(&i) {
                chosen.push(i);
            }
        }
    }
    (chosen, padded)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameEstimate {
    pub doas: Vec<CartesianDoa>,
    /// Fewer local maxima than requested sources.
    pub padded: bool,
}

/// Per-frame DOA estimates given the reference source count of each frame.
pub fn estimate_doas(
    specs: &[Spectrogram],
    counts: &[usize],
    array: &ArraySpec,
    sample_rate: f64,
    cfg: &MusicConfig,
) -> Result<Vec<FrameEstimate>> {
    let frames = specs.first().map_or(0, |s| s.frames);
    if counts.len() != frames {
        return Err(SeldError::ShapeMismatch(format!("{} counts for {frames} frames", counts.len())));
    }
    if let Some(&k) = counts.iter().find(|&&k| k >= array.channels()) {
        return Err(SeldError::TooManySources {
            sources: k,
            channels: array.channels(),
        });
    }
    let grid = SteeringGrid::from_config(cfg)?;
    let mut out = Vec::with_capacity(frames);
    for (t, &k) in counts.iter().enumerate() {
        if k == 0 {
            out.push(FrameEstimate {
                doas: Vec::new(),
                padded: false,
            });
            continue;
        }
        let cov = spatial_covariance(specs, t, array, sample_rate, cfg)?;
        let p = music_spectrum(&cov, array, &grid, k)?;
        let (idx, padded) = pick_peaks(&p, &grid, k);
        out.push(FrameEstimate {
            doas: idx.iter().map(|&i| grid.directions[i].to_cartesian()).collect(),
            padded,
        });
    }
    Ok(out)
}

/// Writes `frame,azimuth_deg,elevation_deg` rows, one per estimate.
pub fn write_estimates<W: Write>(w: W, est: &[FrameEstimate]) -> Result<()> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    out.write_record(["frame", "azimuth_deg", "elevation_deg"])
        .map_err(crate::scene::annotation::csv_err)?;
    for (t, e) in est.iter().enumerate() {
        for d in &e.doas {
            let dir = d.to_direction()?;
            out.write_record([t.to_string(), format!("{}", dir.azimuth), format!("{}", dir.elevation)])
                .map_err(crate::scene::annotation::csv_err)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads estimates written by [`write_estimates`] into `frames` per-frame lists.
pub fn read_estimates<R: Read>(r: R, frames: usize) -> Result<Vec<Vec<Direction>>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = vec![Vec::new(); frames];
    for rec in rdr.records() {
        let rec = rec.map_err(crate::scene::annotation::csv_err)?;
        let bad = |i: usize| SeldError::Format(format!("bad field {:?}", &rec[i]));
        let t: usize = rec[0].parse().map_err(|_| bad(0))?;
        let az: f64 = rec[1].parse().map_err(|_| bad(1))?;
        let el: f64 = rec[2].parse().map_err(|_| bad(2))?;
        out.get_mut(t)
            .ok_or_else(|| SeldError::Format(format!("frame {t} beyond {frames}")))?
            .push(Direction::new(az, el)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> SteeringGrid {
        SteeringGrid::new(10.0, -60.0, 60.0).unwrap()
    }

    fn rank_one(a: &[Complex64]) -> CMatrix {
        let mut m = CMatrix::zeros(a.len());
        m.add_outer(a, 1.0);
        m
    }

    fn foa_cov(m: CMatrix) -> SpatialCovariance {
        SpatialCovariance {
            frame: 0,
            frequencies: Vec::new(),
            matrices: vec![m],
        }
    }

    fn sh(d: Direction) -> Vec<Complex64> {
        sh_steering(d).iter().map(|&g| Complex64::new(g, 0.0)).collect()
    }

    #[test]
    fn grid_shape() {
        let g = grid();
        assert_eq!((g.azimuths, g.elevations, g.len()), (36, 13, 468));
        assert_eq!(g.neighbors(0).len(), 5);
        assert!(g.neighbors(0).contains(&35));
        assert_eq!(g.neighbors(36 * 6 + 10).len(), 8);
    }

    #[test]
    fn sh_steering_table_and_norm() {
        let s3 = 3f64.sqrt();
        let a = sh_steering(Direction::new(0.0, 0.0).unwrap());
        assert!((a[0] - 1.0).abs() < 1e-15 && a[1].abs() < 1e-15 && a[2].abs() < 1e-15 && (a[3] - s3).abs() < 1e-15);
        let b = sh_steering(Direction::new(0.0, 90.0).unwrap());
        assert!(b[1].abs() < 1e-15 && (b[2] - s3).abs() < 1e-15 && b[3].abs() < 1e-15);
        for d in grid().directions {
            let n: f64 = sh_steering(d).iter().map(|v| v * v).sum();
            assert!((n - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn uca_steering_properties() {
        let arr = ArraySpec::default_circular();
        let d = Direction::new(37.0, 12.0).unwrap();
        assert!(uca_steering(&arr, d, 0.0).iter().all(|v| (v - Complex64::new(1.0, 0.0)).norm() < 1e-15));
        let z = Direction::new(0.0, 90.0).unwrap();
        assert!(uca_steering(&arr, z, 3000.0).iter().all(|v| (v - Complex64::new(1.0, 0.0)).norm() < 1e-12));
        assert!(uca_steering(&arr, d, 2500.0).iter().all(|v| (v.norm() - 1.0).abs() < 1e-15));
    }

    #[test]
    fn rank_one_recovers_every_grid_point() {
        let g = grid();
        let arr = ArraySpec::Foa;
        for (i, &d) in g.directions.iter().enumerate() {
            let p = music_spectrum(&foa_cov(rank_one(&sh(d))), &arr, &g, 1).unwrap();
            let arg = (0..p.len()).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
            assert_eq!(arg, i, "{d:?}");
        }
    }

    #[test]
    fn identity_covariance_is_flat() {
        let g = grid();
        let p = music_spectrum(&foa_cov(CMatrix::identity(4)), &ArraySpec::Foa, &g, 1).unwrap();
        let (mx, mn) = p.iter().fold((f64::MIN, f64::MAX), |(a, b), &v| (a.max(v), b.min(v)));
        assert!(mx / mn <= 1.0 + 1e-6);
    }

    #[test]
    fn two_sources_rank_two() {
        let g = grid();
        let (d1, d2) = (Direction::new(-40.0, 10.0).unwrap(), Direction::new(60.0, -20.0).unwrap());
        let mut m = rank_one(&sh(d1));
        m.add_outer(&sh(d2), 0.7);
        let p = music_spectrum(&foa_cov(m), &ArraySpec::Foa, &g, 2).unwrap();
        let (idx, padded) = pick_peaks(&p, &g, 2);
        assert!(!padded);
        let mut got: Vec<Direction> = idx.iter().map(|&i| g.directions[i]).collect();
        got.sort_by(|a, b| a.azimuth.total_cmp(&b.azimuth));
        assert_eq!(got, vec![d1, d2]);
    }

    #[test]
    fn scaling_does_not_move_peaks() {
        let g = grid();
        let d = Direction::new(120.0, 30.0).unwrap();
        let mut m = rank_one(&sh(d));
        m.add_outer(&sh(Direction::new(0.0, 0.0).unwrap()), 0.01);
        let p1 = music_spectrum(&foa_cov(m.clone()), &ArraySpec::Foa, &g, 1).unwrap();
        m.scale(37.0);
        let p2 = music_spectrum(&foa_cov(m), &ArraySpec::Foa, &g, 1).unwrap();
        let r = p1[0] / p2[0];
        for (a, b) in p1.iter().zip(&p2) {
            assert!((a / b / r - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn too_many_sources_rejected() {
        let g = grid();
        assert!(matches!(
            music_spectrum(&foa_cov(CMatrix::identity(4)), &ArraySpec::Foa, &g, 4),
            Err(SeldError::TooManySources { .. })
        ));
    }

    #[test]
    fn flat_spectrum_pads_and_flags() {
        let g = grid();
        let p = vec![1.0; g.len()];
        let (idx, padded) = pick_peaks(&p, &g, 3);
        assert_eq!(idx.len(), 3);
        assert!(padded);
    }

    #[test]
    fn estimates_csv_round_trip_and_empty_frames() {
        let est = vec![
            FrameEstimate { doas: vec![], padded: false },
            FrameEstimate {
                doas: vec![Direction::new(30.0, -10.0).unwrap().to_cartesian()],
                padded: false,
            },
        ];
        let mut buf = Vec::new();
        write_estimates(&mut buf, &est).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("frame,azimuth_deg,elevation_deg\n1,"));
        let back = read_estimates(buf.as_slice(), 2).unwrap();
        assert!(back[0].is_empty());
        assert!((back[1][0].azimuth - 30.0).abs() < 1e-9 && (back[1][0].elevation + 10.0).abs() < 1e-9);
    }
}
