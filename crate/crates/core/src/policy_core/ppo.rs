//! Returns, advantages and the clipped-surrogate / value losses with
//! analytic gradients.

use crate::error::{Error, Result};

use super::net::{backward, forward, masked_log_softmax};
use super::{ApproximatorParams, Trajectory};

/// Discounted reward-to-go: R_t = Re_t + gamma * R_{t+1}.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut returns = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (t, &r) in rewards.iter().enumerate().rev() {
        acc = r + gamma * acc;
        returns[t] = acc;
    }
    returns
}

/// Advantage estimates: discounted reward-to-go plus the discounted
/// terminal value, minus the value estimate of each state. The terminal
/// value is zero when the episode terminated (no bootstrap beyond the
/// horizon), otherwise the value network's estimate of the final state.
pub fn advantages(
    traj: &Trajectory,
    params_value: &ApproximatorParams,
    gamma: f64,
) -> Result<Vec<f64>> {
    if traj.steps.is_empty() {
        return Err(Error::invalid_input("trajectory is empty"));
    }
    let bootstrap = if traj.terminated {
        0.0
    } else {
        forward(params_value, &traj.terminal_state)?.output()[0]
    };
    let mut out = vec![0.0; traj.steps.len()];
    let mut tail = bootstrap;
    for (t, step) in traj.steps.iter().enumerate().rev() {
        tail = step.reward + gamma * tail;
        let v = forward(params_value, &step.state)?.output()[0];
        out[t] = tail - v;
    }
    Ok(out)
}

/// Clipped-surrogate policy loss (negated for minimization) and its
/// gradient with respect to `params_new`:
/// loss = -mean_t min(r_t * A_t, clip(r_t, 1 - eps, 1 + eps) * A_t)
/// with r_t the new/old probability ratio of the taken action.
pub fn ppo_clip_loss(
    traj: &Trajectory,
    params_new: &ApproximatorParams,
    params_old: &ApproximatorParams,
    epsilon: f64,
    advantages: &[f64],
) -> Result<(f64, Vec<f64>)> {
    if epsilon <= 0.0 {
        return Err(Error::invalid_config("clip epsilon must be positive"));
    }
    if advantages.len() != traj.steps.len() {
        return Err(Error::invalid_input(
            "advantage count != trajectory length",
        ));
    }
    if traj.steps.is_empty() {
        return Err(Error::invalid_input("trajectory is empty"));
    }
    let t_count = traj.steps.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; params_new.values.len()];

    for (step, &adv) in traj.steps.iter().zip(advantages.iter()) {
        let cache_new = forward(params_new, &step.state)?;
        let logp_new = masked_log_softmax(cache_new.output(), &step.action_mask)?;
        let logp_old_all =
            masked_log_softmax(forward(params_old, &step.state)?.output(), &step.action_mask)?;
        let lp_new = logp_new[step.action];
        let lp_old = logp_old_all[step.action];
        if !lp_old.is_finite() {
            return Err(Error::NumericalDegeneracy(format!(
                "old policy assigns zero probability to taken action {}",
                step.action
            )));
        }
        let ratio = (lp_new - lp_old).exp();
        if !ratio.is_finite() {
            return Err(Error::NumericalDegeneracy(format!(
                "non-finite probability ratio at action {}",
                step.action
            )));
        }

        let unclipped = ratio * adv;
        let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon) * adv;
        loss += -unclipped.min(clipped) / t_count;

        // d min / d log pi_new: the clipped branch is constant in the
        // parameters, so its contribution is exactly zero.
        let coeff = if unclipped <= clipped { ratio * adv } else { 0.0 };
        if coeff != 0.0 {
            let d_lp = -coeff / t_count;
            let probs: Vec<f64> = logp_new
                .iter()
                .map(|&lp| if lp == f64::NEG_INFINITY { 0.0 } else { lp.exp() })
                .collect();
            let d_logits: Vec<f64> = step
                .action_mask
                .iter()
                .enumerate()
                .map(|(j, &m)| {
                    if !m {
                        0.0
                    } else {
                        let indicator = if j == step.action { 1.0 } else { 0.0 };
                        d_lp * (indicator - probs[j])
                    }
                })
                .collect();
            backward(params_new, &cache_new, &d_logits, &mut grad);
        }
    }
    Ok((loss, grad))
}

/// Mean policy entropy over the trajectory's states and its gradient,
/// for the optional exploration bonus.
pub fn policy_entropy(
    traj: &Trajectory,
    params: &ApproximatorParams,
) -> Result<(f64, Vec<f64>)> {
    if traj.steps.is_empty() {
        return Err(Error::invalid_input("trajectory is empty"));
    }
    let t_count = traj.steps.len() as f64;
    let mut entropy = 0.0;
    let mut grad = vec![0.0; params.values.len()];
    for step in &traj.steps {
        let cache = forward(params, &step.state)?;
        let logp = masked_log_softmax(cache.output(), &step.action_mask)?;
        let probs: Vec<f64> = logp
            .iter()
            .map(|&lp| if lp == f64::NEG_INFINITY { 0.0 } else { lp.exp() })
            .collect();
        let h: f64 = probs
            .iter()
            .zip(logp.iter())
            .filter(|(&p, _)| p > 0.0)
            .map(|(&p, &lp)| -p * lp)
            .sum();
        entropy += h / t_count;
        let d_logits: Vec<f64> = probs
            .iter()
            .zip(logp.iter())
            .map(|(&p, &lp)| {
                if p > 0.0 {
                    -p * (lp + h) / t_count
                } else {
                    0.0
                }
            })
            .collect();
        backward(params, &cache, &d_logits, &mut grad);
    }
    Ok((entropy, grad))
}

/// Mean squared error between the discounted returns and the value
/// estimates, with its gradient.
pub fn value_loss(
    traj: &Trajectory,
    params_value: &ApproximatorParams,
    gamma: f64,
) -> Result<(f64, Vec<f64>)> {
    if traj.steps.is_empty() {
        return Err(Error::invalid_input("trajectory is empty"));
    }
    let returns = discounted_returns(&traj.rewards(), gamma);
    let t_count = traj.steps.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; params_value.values.len()];
    for (step, &ret) in traj.steps.iter().zip(returns.iter()) {
        let cache = forward(params_value, &step.state)?;
        let v = cache.output()[0];
        loss += (ret - v) * (ret - v) / t_count;
        let d_v = 2.0 * (v - ret) / t_count;
        backward(params_value, &cache, &[d_v], &mut grad);
    }
    Ok((loss, grad))
}
