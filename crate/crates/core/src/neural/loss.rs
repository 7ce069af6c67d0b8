use super::model::{OutputGrad, Prediction};
use crate::dsp::targets::TargetTensor;
use crate::error::{Result, SeldError};

/// Probability clamp for the cross-entropy term.
pub const BCE_EPSILON: f64 = 1e-7;

/// `BCE(sed) + w_doa * MSE(doa)`, each averaged over valid frames and
/// outputs, with the gradient with respect to the predictions.
pub fn seld_loss(pred: &Prediction, target: &TargetTensor, mask: &[bool], w_doa: f64) -> Result<(f64, OutputGrad)> {
    let n = pred.classes;
    let dn = pred.format.dims() * n;
    if target.frames != pred.rows || mask.len() != pred.rows || target.classes != n || target.format != pred.format {
        return Err(SeldError::ShapeMismatch(format!(
            "prediction has {} frames of {n} classes, target {} of {}, mask {}",
            pred.rows,
            target.frames,
            target.classes,
            mask.len()
        )));
    }
    if pred.sed.iter().chain(&pred.doa).chain(&target.sed).chain(&target.doa).any(|v| !v.is_finite()) {
        return Err(SeldError::NonFinite("loss inputs".into()));
    }
    let valid = mask.iter().filter(|&&m| m).count();
    let mut grad = OutputGrad {
        sed: vec![0.0; pred.sed.len()],
        doa: vec![0.0; pred.doa.len()],
    };
    if valid == 0 {
        return Ok((0.0, grad));
    }
    let sed_norm = (valid * n) as f64;
    let doa_norm = (valid * dn) as f64;
    let mut bce = 0.0;
    let mut se = 0.0;
    for t in (0..pred.rows).filter(|&t| mask[t]) {
        for k in t * n..(t + 1) * n {
            let y = target.sed[k];
            let raw = pred.sed[k];
            let p = raw.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
            bce -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
            if p == raw {
                grad.sed[k] = (p - y) / (p * (1.0 - p)) / sed_norm;
            }
        }
        for k in t * dn..(t + 1) * dn {
            let e = pred.doa[k] - target.doa[k];
            se += e * e;
            grad.doa[k] = w_doa * 2.0 * e / doa_norm;
        }
    }
    Ok((bce / sed_norm + w_doa * se / doa_norm, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::targets::DoaFormat;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single(p: f64, doa: [f64; 3], y: f64, t: [f64; 3]) -> (Prediction, TargetTensor) {
        (
            Prediction {
                rows: 1,
                classes: 1,
                format: DoaFormat::Cartesian,
                sed: vec![p],
                doa: doa.to_vec(),
            },
            TargetTensor {
                frames: 1,
                classes: 1,
                format: DoaFormat::Cartesian,
                sed: vec![y],
                doa: t.to_vec(),
            },
        )
    }

    #[test]
    fn exact_prediction_costs_only_the_clamp() {
        let (p, t) = single(1.0, [0.0, 1.0, 0.0], 1.0, [0.0, 1.0, 0.0]);
        let (loss, _) = seld_loss(&p, &t, &[true], 50.0).unwrap();
        assert!(loss.abs() < 1e-6, "{loss}");
    }

    #[test]
    fn half_probability_on_active_class_costs_ln2() {
        let (p, t) = single(0.5, [1.0, 0.0, 0.0], 1.0, [1.0, 0.0, 0.0]);
        let (loss, _) = seld_loss(&p, &t, &[true], 50.0).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn doa_mse_is_a_third_of_squared_distance() {
        let (a, b) = ([0.6, 0.0, 0.8], [0.0, 1.0, 0.0]);
        let (p, t) = single(1.0 - BCE_EPSILON, a, 1.0, b);
        let (loss, _) = seld_loss(&p, &t, &[true], 1.0).unwrap();
        let bce = -(1.0 - BCE_EPSILON as f64).ln();
        let sq: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum();
        assert!((loss - bce - sq / 3.0).abs() < 1e-12);
    }

    #[test]
    fn padding_frames_do_not_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (rows, n) = (4, 2);
        let mk = |rng: &mut ChaCha8Rng, len: usize| -> Vec<f64> { (0..len).map(|_| rng.gen_range(0.05..0.95)).collect() };
        let pred = Prediction {
            rows,
            classes: n,
            format: DoaFormat::Cartesian,
            sed: mk(&mut rng, rows * n),
            doa: mk(&mut rng, rows * 3 * n),
        };
        let target = TargetTensor {
            frames: rows,
            classes: n,
            format: DoaFormat::Cartesian,
            sed: mk(&mut rng, rows * n),
            doa: mk(&mut rng, rows * 3 * n),
        };
        let mask = [true, true, false, false];
        let (full, g) = seld_loss(&pred, &target, &mask, 5.0).unwrap();
        let mut changed = pred.clone();
        changed.sed[2 * n] = 0.3;
        changed.doa[3 * 3 * n] = -0.7;
        assert_eq!(seld_loss(&changed, &target, &mask, 5.0).unwrap().0, full);
        assert!(g.sed[2 * n..].iter().chain(&g.doa[2 * 3 * n..]).all(|&v| v == 0.0));
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (rows, n) = (3, 2);
        for format in [DoaFormat::Cartesian, DoaFormat::AzEl] {
            let dn = format.dims() * n;
            let pred = Prediction {
                rows,
                classes: n,
                format,
                sed: (0..rows * n).map(|_| rng.gen_range(0.05..0.95)).collect(),
                doa: (0..rows * dn).map(|_| rng.gen_range(-0.9..0.9)).collect(),
            };
            let target = TargetTensor {
                frames: rows,
                classes: n,
                format,
                sed: (0..rows * n).map(|_| f64::from(rng.gen_range(0..2))).collect(),
                doa: (0..rows * dn).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            };
            let mask = [true, false, true];
            let (_, g) = seld_loss(&pred, &target, &mask, 7.0).unwrap();
            let h = 1e-6;
            let f = |p: &Prediction| seld_loss(p, &target, &mask, 7.0).unwrap().0;
            for i in 0..pred.sed.len() + pred.doa.len() {
                let mut a = pred.clone();
                let mut b = pred.clone();
                let (slot_a, slot_b, an) = if i < pred.sed.len() {
                    (&mut a.sed[i], &mut b.sed[i], g.sed[i])
                } else {
                    let j = i - pred.sed.len();
                    (&mut a.doa[j], &mut b.doa[j], g.doa[j])
                };
                *slot_a += h;
                *slot_b -= h;
                let num = (f(&a) - f(&b)) / (2.0 * h);
                let err = (num - an).abs() / num.abs().max(an.abs()).max(1e-2);
                assert!(err <= 1e-4, "output {i}: numeric {num} analytic {an}");
            }
        }
    }

    #[test]
    fn rejects_nan() {
        let (p, t) = single(f64::NAN, [0.0; 3], 1.0, [0.0; 3]);
        assert!(matches!(seld_loss(&p, &t, &[true], 1.0), Err(SeldError::NonFinite(_))));
    }
}
