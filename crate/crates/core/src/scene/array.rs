use serde::{Deserialize, Serialize};

use super::ambisonics::FOA_CHANNELS;
use super::delay::{add_delayed, tail_len};
use super::direction::{Direction, SPEED_OF_SOUND};
use crate::error::{invalid, Result};

/// Recording setup for a scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArraySpec {
    Foa,
    Circular {
        radius: f64,
        mic_azimuths: Vec<f64>,
    },
}

impl ArraySpec {
    /// Eight omnidirectional microphones on a horizontal 5 cm circle, 45° apart.
    pub fn default_circular() -> Self {
        ArraySpec::Circular {
            radius: 0.05,
            mic_azimuths: (0..8).map(|m| m as f64 * 45.0).collect(),
        }
    }

    pub fn channels(&self) -> usize {
        match self {
            ArraySpec::Foa => FOA_CHANNELS,
            ArraySpec::Circular { mic_azimuths, .. } => mic_azimuths.len(),
        }
    }

    pub fn is_foa(&self) -> bool {
        matches!(self, ArraySpec::Foa)
    }

    /// Arrival delay of each microphone relative to the array center, in seconds.
    ///
    /// Far-field plane wave: `-(r / c) cos(az - mic_az) cos(el)`.
    pub fn relative_delays(&self, direction: Direction) -> Vec<f64> {
        match self {
            ArraySpec::Foa => vec![0.0; FOA_CHANNELS],
            ArraySpec::Circular {
                radius,
                mic_azimuths,
            } => {
                let el = direction.elevation.to_radians();
                mic_azimuths
                    .iter()
                    .map(|&m| {
                        -(radius / SPEED_OF_SOUND)
                            * (direction.azimuth - m).to_radians().cos()
                            * el.cos()
                    })
                    .collect()
            }
        }
    }

    /// Smallest spacing between adjacent microphones on the circle.
    pub fn min_mic_spacing(&self) -> Option<f64> {
        match self {
            ArraySpec::Foa => None,
            ArraySpec::Circular {
                radius,
                mic_azimuths,
            } => {
                let mut az: Vec<f64> = mic_azimuths.iter().map(|a| a.rem_euclid(360.0)).collect();
                az.sort_by(f64::total_cmp);
                let n = az.len();
                (0..n)
                    .map(|i| {
                        let gap = if i + 1 < n {
                            az[i + 1] - az[i]
                        } else {
                            az[0] + 360.0 - az[i]
                        };
                        2.0 * radius * (gap.to_radians() / 2.0).sin()
                    })
                    .min_by(f64::total_cmp)
            }
        }
    }

    /// Spatial-aliasing frequency `c / (2 d_min)`; unbounded for FOA.
    pub fn aliasing_frequency(&self) -> f64 {
        match self.min_mic_spacing() {
            Some(d) if d > 0.0 => SPEED_OF_SOUND / (2.0 * d),
            _ => f64::INFINITY,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let ArraySpec::Circular {
            radius,
            mic_azimuths,
        } = self
        {
            if !(*radius > 0.0) || mic_azimuths.is_empty() {
                return Err(invalid("circular array needs radius > 0 and at least one mic"));
            }
        }
        Ok(())
    }
}

/// Renders a far-field point source onto a circular array.
///
/// Every microphone receives the signal scaled by `1 / distance` and delayed
/// by `distance / c` plus its relative plane-wave delay.
pub fn simulate_circular_array(
    signal: &[f64],
    direction: Direction,
    distance: f64,
    array: &ArraySpec,
    sample_rate: f64,
) -> Result<Vec<Vec<f64>>> {
    if array.is_foa() {
        return Err(invalid("circular array simulation needs a circular ArraySpec"));
    }
    array.validate()?;
    if !(distance >= 1.0) {
        return Err(invalid(format!("source distance {distance} m below 1 m")));
    }
    let common = distance / SPEED_OF_SOUND;
    let rel = array.relative_delays(direction);
    let max_delay = rel.iter().fold(0.0f64, |m, &d| m.max(common + d)) * sample_rate;
    let len = signal.len() + max_delay.ceil() as usize + tail_len() + 1;
    Ok(rel
        .iter()
        .map(|&tau| {
            let mut out = vec![0.0; len];
            add_delayed(&mut out, 0, signal, (common + tau) * sample_rate, 1.0 / distance);
            out
        })
        .collect())
}
