//! Adam optimizer and the finite-difference gradient checker.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::ApproximatorParams;

/// Bias-corrected adaptive-moment state for one parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon_stab: f64,
}

impl OptimizerState {
    pub fn new(param_count: usize, lr: f64) -> Self {
        OptimizerState {
            first_moment: vec![0.0; param_count],
            second_moment: vec![0.0; param_count],
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon_stab: 1e-8,
        }
    }
}

/// One Adam update in place.
pub fn optimizer_step(
    params: &mut ApproximatorParams,
    grads: &[f64],
    state: &mut OptimizerState,
) -> Result<()> {
    let n = params.values.len();
    if grads.len() != n || state.first_moment.len() != n || state.second_moment.len() != n {
        return Err(Error::invalid_input(format!(
            "length mismatch: params {n}, grads {}, moments {}/{}",
            grads.len(),
            state.first_moment.len(),
            state.second_moment.len()
        )));
    }
    state.step += 1;
    let bias1 = 1.0 - state.beta1.powi(state.step as i32);
    let bias2 = 1.0 - state.beta2.powi(state.step as i32);
    for i in 0..n {
        let g = grads[i];
        state.first_moment[i] = state.beta1 * state.first_moment[i] + (1.0 - state.beta1) * g;
        state.second_moment[i] =
            state.beta2 * state.second_moment[i] + (1.0 - state.beta2) * g * g;
        let m_hat = state.first_moment[i] / bias1;
        let v_hat = state.second_moment[i] / bias2;
        params.values[i] -= state.lr * m_hat / (v_hat.sqrt() + state.epsilon_stab);
    }
    Ok(())
}

/// Compares an analytic gradient against central finite differences on
/// `probe_count` randomly chosen coordinates; returns the maximum
/// relative error |g_a - g_fd| / max(1e-8, |g_a| + |g_fd|).
pub fn gradient_check<F>(
    loss_fn: F,
    params: &ApproximatorParams,
    probe_count: usize,
    h: f64,
    seed: u64,
) -> f64
where
    F: Fn(&ApproximatorParams) -> (f64, Vec<f64>),
{
    assert!(h > 0.0, "finite-difference step must be positive");
    let (_, analytic) = loss_fn(params);
    let mut indices: Vec<usize> = (0..params.values.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    indices.truncate(probe_count.min(params.values.len()));

    let mut max_rel = 0.0f64;
    let mut probe = params.clone();
    for i in indices {
        let original = probe.values[i];
        probe.values[i] = original + h;
        let plus = loss_fn(&probe).0;
        probe.values[i] = original - h;
        let minus = loss_fn(&probe).0;
        probe.values[i] = original;
        let fd = (plus - minus) / (2.0 * h);
        let rel = (analytic[i] - fd).abs() / 1e-8f64.max(analytic[i].abs() + fd.abs());
        max_rel = max_rel.max(rel);
    }
    max_rel
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy_core::LayerLayout;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let layout = LayerLayout::new(vec![3, 2]).unwrap();
        let mut params = ApproximatorParams::xavier(layout, 1);
        let before = params.values.clone();
        let mut state = OptimizerState::new(params.values.len(), 0.001);
        optimizer_step(&mut params, &vec![0.0; before.len()], &mut state).unwrap();
        assert_eq!(params.values, before);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn first_step_moves_by_lr_sign() {
        let layout = LayerLayout::new(vec![2, 1]).unwrap();
        let mut params = ApproximatorParams::zeros(layout);
        let n = params.values.len();
        let grads = vec![0.3, -4.0, 0.001];
        assert_eq!(n, grads.len());
        let mut state = OptimizerState::new(n, 0.01);
        optimizer_step(&mut params, &grads, &mut state).unwrap();
        for (p, g) in params.values.iter().zip(grads.iter()) {
            assert!((p - (-0.01 * g.signum())).abs() < 1e-6);
        }
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let layout = LayerLayout::new(vec![2, 1]).unwrap();
        let mut params = ApproximatorParams::zeros(layout);
        let mut state = OptimizerState::new(params.values.len(), 0.01);
        assert!(optimizer_step(&mut params, &[0.0], &mut state).is_err());
    }

    #[test]
    fn adam_descends_a_parabola() {
        // Minimize f(x) = x^2 starting at x = 1; |x| shrinks
        // monotonically after the first step.
        let layout = LayerLayout::new(vec![1, 1]).unwrap();
        let mut params = ApproximatorParams::zeros(layout);
        params.values = vec![1.0, 0.0]; // weight acts as x, bias unused
        let mut state = OptimizerState::new(2, 0.005);
        let mut prev = params.values[0].abs();
        for step in 0..100 {
            let x = params.values[0];
            optimizer_step(&mut params, &[2.0 * x, 0.0], &mut state).unwrap();
            let now = params.values[0].abs();
            if step > 0 {
                assert!(now <= prev, "step {step}: |x| grew from {prev} to {now}");
            }
            prev = now;
        }
        assert!(prev < 0.7);
    }

    #[test]
    fn gradient_check_is_tight_on_a_quadratic() {
        let layout = LayerLayout::new(vec![4, 3]).unwrap();
        let params = ApproximatorParams::xavier(layout, 5);
        let loss = |p: &ApproximatorParams| {
            let value = p.values.iter().map(|v| v * v).sum::<f64>();
            let grad = p.values.iter().map(|v| 2.0 * v).collect();
            (value, grad)
        };
        let err = gradient_check(loss, &params, 100, 1e-5, 9);
        assert!(err < 1e-8, "max relative error {err}");
    }
}
