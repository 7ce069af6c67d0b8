use serde::{Deserialize, Serialize};

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamParams {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moments plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub t: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            t: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }
}

/// One bias-corrected Adam update in place.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, hp: &AdamParams) {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), state.m.len());
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - hp.beta1.powi(t);
    let c2 = 1.0 - hp.beta2.powi(t);
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        *m = hp.beta1 * *m + (1.0 - hp.beta1) * g;
        *v = hp.beta2 * *v + (1.0 - hp.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= hp.learning_rate * m_hat / (v_hat.sqrt() + hp.epsilon);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters_and_decays_moments() {
        let mut p = vec![0.5, -1.0];
        let mut s = AdamState {
            t: 3,
            m: vec![0.2, -0.1],
            v: vec![0.0, 0.0],
        };
        s.m = vec![0.0, 0.0];
        adam_step(&mut p, &[0.0, 0.0], &mut s, &AdamParams::default());
        assert_eq!(p, vec![0.5, -1.0]);
        let mut s = AdamState {
            t: 3,
            m: vec![0.2, -0.1],
            v: vec![0.04, 0.01],
        };
        adam_step(&mut p.clone(), &[0.0, 0.0], &mut s, &AdamParams::default());
        assert!((s.m[0] - 0.18).abs() < 1e-15 && (s.v[1] - 0.00999).abs() < 1e-15);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let hp = AdamParams::default();
        for g in [3.0, -0.02, 1e-3] {
            let mut p = vec![1.0];
            let mut s = AdamState::new(1);
            adam_step(&mut p, &[g], &mut s, &hp);
            let step = 1.0 - p[0];
            assert!((step - hp.learning_rate * g.signum()).abs() < 1e-8, "{g}: {step}");
        }
    }

    #[test]
    fn identical_calls_agree() {
        let hp = AdamParams::default();
        let run = || {
            let mut p = vec![0.3, -0.2, 0.9];
            let mut s = AdamState::new(3);
            for k in 0..5 {
                adam_step(&mut p, &[0.1 * k as f64, -0.5, 2.0], &mut s, &hp);
            }
            (p, s)
        };
        assert_eq!(run(), run());
    }
}
