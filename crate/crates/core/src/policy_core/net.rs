//! Forward and backward passes for the tanh MLPs.

use crate::error::{Error, Result};

use super::ApproximatorParams;

/// Activations cached during a forward pass: `acts[0]` is the input,
/// `acts[l + 1]` the output of layer `l` (tanh applied on hidden
/// layers, affine on the last).
pub(crate) struct ForwardCache {
    pub acts: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().unwrap()
    }
}

pub(crate) fn forward(params: &ApproximatorParams, input: &[f64]) -> Result<ForwardCache> {
    let layout = &params.layout;
    if input.len() != layout.input_dim() {
        return Err(Error::invalid_input(format!(
            "state length {} != network input {}",
            input.len(),
            layout.input_dim()
        )));
    }
    let mut acts = Vec::with_capacity(layout.n_layers() + 1);
    acts.push(input.to_vec());
    for l in 0..layout.n_layers() {
        let (in_dim, out_dim) = (layout.sizes()[l], layout.sizes()[l + 1]);
        let offset = layout.layer_offset(l);
        let weights = &params.values[offset..offset + in_dim * out_dim];
        let biases = &params.values[offset + in_dim * out_dim..offset + (in_dim + 1) * out_dim];
        let prev = &acts[l];
        let mut out = vec![0.0; out_dim];
        for (o, out_v) in out.iter_mut().enumerate() {
            let row = &weights[o * in_dim..(o + 1) * in_dim];
            let mut z = biases[o];
            for (w, x) in row.iter().zip(prev.iter()) {
                z += w * x;
            }
            *out_v = if l + 1 < layout.n_layers() { z.tanh() } else { z };
        }
        acts.push(out);
    }
    Ok(ForwardCache { acts })
}

/// Backpropagates `d_output` (gradient of the loss w.r.t. the final
/// affine output) through the cached pass, accumulating into `grad`.
pub(crate) fn backward(
    params: &ApproximatorParams,
    cache: &ForwardCache,
    d_output: &[f64],
    grad: &mut [f64],
) {
    let layout = &params.layout;
    debug_assert_eq!(grad.len(), params.values.len());
    let mut delta = d_output.to_vec();
    for l in (0..layout.n_layers()).rev() {
        let (in_dim, out_dim) = (layout.sizes()[l], layout.sizes()[l + 1]);
        let offset = layout.layer_offset(l);
        let prev = &cache.acts[l];

        for o in 0..out_dim {
            let d = delta[o];
            let w_row = offset + o * in_dim;
            for i in 0..in_dim {
                grad[w_row + i] += d * prev[i];
            }
            grad[offset + in_dim * out_dim + o] += d;
        }

        if l > 0 {
            let weights = &params.values[offset..offset + in_dim * out_dim];
            let mut d_prev = vec![0.0; in_dim];
            for (o, &d) in delta.iter().enumerate() {
                let row = &weights[o * in_dim..(o + 1) * in_dim];
                for (dp, w) in d_prev.iter_mut().zip(row.iter()) {
                    *dp += d * w;
                }
            }
            // prev is the tanh output of layer l - 1.
            for (dp, a) in d_prev.iter_mut().zip(prev.iter()) {
                *dp *= 1.0 - a * a;
            }
            delta = d_prev;
        }
    }
}

/// Log-probabilities of a masked softmax over `logits`; masked-out
/// entries get negative infinity. Numerically stable via the shifted
/// log-sum-exp.
pub fn masked_log_softmax(logits: &[f64], mask: &[bool]) -> Result<Vec<f64>> {
    if logits.len() != mask.len() {
        return Err(Error::invalid_input("mask length != logit length"));
    }
    let max = logits
        .iter()
        .zip(mask.iter())
        .filter(|(_, &m)| m)
        .map(|(&l, _)| l)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::invalid_input("action mask excludes every concept"));
    }
    let log_z = logits
        .iter()
        .zip(mask.iter())
        .filter(|(_, &m)| m)
        .map(|(&l, _)| (l - max).exp())
        .sum::<f64>()
        .ln()
        + max;
    Ok(logits
        .iter()
        .zip(mask.iter())
        .map(|(&l, &m)| if m { l - log_z } else { f64::NEG_INFINITY })
        .collect())
}

/// Policy head: probability distribution over concepts with masked
/// entries exactly zero; the unmasked entries sum to one.
pub fn forward_policy(
    params: &ApproximatorParams,
    state: &[f64],
    mask: &[bool],
) -> Result<Vec<f64>> {
    let cache = forward(params, state)?;
    let log_probs = masked_log_softmax(cache.output(), mask)?;
    Ok(log_probs
        .iter()
        .map(|&lp| if lp == f64::NEG_INFINITY { 0.0 } else { lp.exp() })
        .collect())
}

/// Value head: scalar estimate for a state.
pub fn forward_value(params: &ApproximatorParams, state: &[f64]) -> Result<f64> {
    if params.layout.output_dim() != 1 {
        return Err(Error::invalid_input(
            "value network must have a single output",
        ));
    }
    Ok(forward(params, state)?.output()[0])
}
