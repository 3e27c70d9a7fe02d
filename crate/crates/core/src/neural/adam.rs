//! Adam with bias correction, over the model's flattened parameter tensors.

use super::model::TemporalModel;
use super::TrainConfig;
use crate::num::Scalar;

#[derive(Clone, Debug)]
pub struct AdamState<S> {
    m: Vec<Vec<S>>,
    v: Vec<Vec<S>>,
    pub step: u64,
}

impl<S: Scalar> AdamState<S> {
    pub fn new(model: &TemporalModel<S>) -> Self {
        let sizes: Vec<usize> = model.flat().iter().map(|t| t.len()).collect();
        AdamState {
            m: sizes.iter().map(|&n| vec![S::zero(); n]).collect(),
            v: sizes.iter().map(|&n| vec![S::zero(); n]).collect(),
            step: 0,
        }
    }
}

pub fn adam_step<S: Scalar>(
    model: &mut TemporalModel<S>,
    grads: &TemporalModel<S>,
    state: &mut AdamState<S>,
    tc: &TrainConfig,
) {
    state.step += 1;
    let t = state.step as i32;
    let b1 = S::of(tc.beta1);
    let b2 = S::of(tc.beta2);
    let lr = S::of(tc.learning_rate);
    let eps = S::of(tc.epsilon);
    let one = S::one();
    let bc1 = one - b1.powi(t);
    let bc2 = one - b2.powi(t);

    let grads_flat = grads.flat();
    for (k, params) in model.flat_mut().into_iter().enumerate() {
        let g = grads_flat[k];
        let m = &mut state.m[k];
        let v = &mut state.v[k];
        for i in 0..params.len() {
            m[i] = b1 * m[i] + (one - b1) * g[i];
            v[i] = b2 * v[i] + (one - b2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{CellKind, TemporalModelConfig};

    fn scalar_model() -> TemporalModel<f64> {
        // smallest possible model; only specific entries are exercised
        TemporalModel::zeros(TemporalModelConfig {
            cell: CellKind::Rnn,
            layer_sizes: [1, 1],
            attention: false,
            dense_units: None,
            num_classes: 3,
            input_dim: 1,
        })
        .unwrap()
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut model = scalar_model();
        model.head.b = vec![0.5, -0.5, 0.25];
        let before = model.clone();
        let grads = model.zeros_like();
        let mut st = AdamState::new(&model);
        adam_step(&mut model, &grads, &mut st, &TrainConfig::default());
        assert_eq!(model, before);
    }

    #[test]
    fn first_step_magnitude_is_about_lr() {
        // closed form: m_hat = g, v_hat = g^2, update = lr * g/(|g| + eps')
        let mut model = scalar_model();
        let mut grads = model.zeros_like();
        grads.head.b[0] = 1.0;
        let mut st = AdamState::new(&model);
        let tc = TrainConfig::default();
        adam_step(&mut model, &grads, &mut st, &tc);
        let expect = -tc.learning_rate * 1.0 / (1.0 + tc.epsilon);
        assert!((model.head.b[0] - expect).abs() < 1e-15);
    }

    #[test]
    fn two_identical_steps_match_hand_rolled_oracle() {
        let mut model = scalar_model();
        let mut grads = model.zeros_like();
        let g = 0.3;
        grads.head.b[1] = g;
        let mut st = AdamState::new(&model);
        let tc = TrainConfig::default();
        adam_step(&mut model, &grads, &mut st, &tc);
        adam_step(&mut model, &grads, &mut st, &tc);

        // oracle: explicit two-step Adam recurrence on a single scalar
        let (b1, b2, lr, eps) = (tc.beta1, tc.beta2, tc.learning_rate, tc.epsilon);
        let mut p = 0.0f64;
        let (mut m, mut v) = (0.0f64, 0.0f64);
        for t in 1..=2 {
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let m_hat = m / (1.0 - b1.powi(t));
            let v_hat = v / (1.0 - b2.powi(t));
            p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        assert!((model.head.b[1] - p).abs() < 1e-15);
    }
}
