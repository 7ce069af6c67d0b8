//! First-order ambisonic (FOA) encoding: ACN channel order, N3D normalization.

use super::delay::{add_delayed, tail_len};
use super::direction::{Direction, SPEED_OF_SOUND};
use crate::error::{invalid, Result};

pub const FOA_CHANNELS: usize = 4;

/// Real first-order spherical harmonics `[W, Y, Z, X]` (ACN 0..3, N3D).
pub fn sh_gains(direction: Direction) -> [f64; FOA_CHANNELS] {
    let c = direction.to_cartesian();
    let s3 = 3f64.sqrt();
    [1.0, s3 * c.y, s3 * c.z, s3 * c.x]
}

/// Encodes a point source at `distance` meters into four FOA channels.
///
/// Each channel carries the signal delayed by `distance / c` and scaled by
/// `Y_c(direction) / distance`. The output is long enough to hold the full
/// delayed kernel tail.
pub fn encode_foa(
    signal: &[f64],
    direction: Direction,
    distance: f64,
    sample_rate: f64,
) -> Result<Vec<Vec<f64>>> {
    if !(distance >= 1.0) {
        return Err(invalid(format!("source distance {distance} m below 1 m")));
    }
    let delay = distance / SPEED_OF_SOUND * sample_rate;
    let len = signal.len() + delay.ceil() as usize + tail_len();
    let mut mono = vec![0.0; len];
    add_delayed(&mut mono, 0, signal, delay, 1.0 / distance);
    Ok(sh_gains(direction)
        .iter()
        .map(|&g| mono.iter().map(|&s| s * g).collect())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Real SH table, written out per harmonic from its closed form.
    fn table_oracle(az_deg: f64, el_deg: f64) -> [f64; 4] {
        let (az, el) = (az_deg.to_radians(), el_deg.to_radians());
        let n1 = (3.0f64).sqrt(); // N3D factor sqrt(2l + 1) for l = 1
        [1.0, n1 * az.sin() * el.cos(), n1 * el.sin(), n1 * az.cos() * el.cos()]
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn front_and_zenith_gains() {
        let s3 = 3f64.sqrt();
        let g = sh_gains(Direction::new(0.0, 0.0).unwrap());
        assert!(close(&g, &[1.0, 0.0, 0.0, s3], 1e-12));
        assert!(close(&g, &table_oracle(0.0, 0.0), 1e-12));
        let g = sh_gains(Direction::new(0.0, 90.0).unwrap());
        assert!(close(&g, &[1.0, 0.0, s3, 0.0], 1e-12));
    }

    #[test]
    fn gains_match_table_on_grid() {
        for az in (-180..180).step_by(10) {
            for el in (-90..=90).step_by(10) {
                let d = Direction::new(az as f64, el as f64).unwrap();
                assert!(close(&sh_gains(d), &table_oracle(az as f64, el as f64), 1e-12));
                let g = sh_gains(d);
                let n2: f64 = g.iter().map(|v| v * v).sum();
                assert!((n2 - 4.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_signal_encodes_to_silence() {
        let out = encode_foa(&[0.0; 64], Direction::new(30.0, 10.0).unwrap(), 2.0, 44100.0).unwrap();
        assert_eq!(out.len(), 4);
        assert!(out.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn near_field_rejected() {
        assert!(encode_foa(&[1.0], Direction::new(0.0, 0.0).unwrap(), 0.5, 44100.0).is_err());
    }

    #[test]
    fn directional_channels_bounded_by_omni() {
        let sig: Vec<f64> = (0..300).map(|n| ((n * 7919) % 101) as f64 / 50.0 - 1.0).collect();
        let out = encode_foa(&sig, Direction::new(-130.0, 40.0).unwrap(), 3.5, 44100.0).unwrap();
        for n in 0..out[0].len() {
            let xyz = (out[1][n].powi(2) + out[2][n].powi(2) + out[3][n].powi(2)).sqrt();
            assert!(xyz <= 3f64.sqrt() * out[0][n].abs() + 1e-12);
        }
    }
}
