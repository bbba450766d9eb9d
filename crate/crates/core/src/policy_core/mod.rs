//! Minimal differentiable function approximators (tanh MLPs over flat
//! parameter vectors), clipped-surrogate policy-gradient training
//! machinery with analytic gradients, an Adam optimizer, and a finite
//! difference gradient checker.

mod net;
mod optim;
mod ppo;

pub use net::{forward_policy, forward_value, masked_log_softmax};
pub use optim::{gradient_check, optimizer_step, OptimizerState};
pub use ppo::{advantages, discounted_returns, policy_entropy, ppo_clip_loss, value_loss};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Layer sizes from input to output, e.g. `[2N, 64, N]`. Hidden layers
/// use a tanh nonlinearity; the output layer is affine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerLayout {
    sizes: Vec<usize>,
}

impl LayerLayout {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::invalid_config(
                "layout needs at least an input and an output size",
            ));
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(Error::invalid_config("layer sizes must be positive"));
        }
        Ok(LayerLayout { sizes })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    /// Affine maps with bias: sum of (in + 1) * out over layers.
    pub fn param_count(&self) -> usize {
        self.sizes
            .windows(2)
            .map(|w| (w[0] + 1) * w[1])
            .sum()
    }

    /// Offset of layer `l`'s weight block in the flat vector; biases
    /// follow the weights within each block.
    pub(crate) fn layer_offset(&self, l: usize) -> usize {
        self.sizes
            .windows(2)
            .take(l)
            .map(|w| (w[0] + 1) * w[1])
            .sum()
    }
}

/// Flat parameter vector plus its layer layout; the shared shape for
/// both the policy and value networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproximatorParams {
    pub layout: LayerLayout,
    pub values: Vec<f64>,
}

impl ApproximatorParams {
    pub fn zeros(layout: LayerLayout) -> Self {
        let n = layout.param_count();
        ApproximatorParams {
            layout,
            values: vec![0.0; n],
        }
    }

    /// Xavier-uniform weight init with zero biases, seeded.
    pub fn xavier(layout: LayerLayout, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = vec![0.0; layout.param_count()];
        for l in 0..layout.n_layers() {
            let (fan_in, fan_out) = (layout.sizes[l], layout.sizes[l + 1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let offset = layout.layer_offset(l);
            for w in values[offset..offset + fan_in * fan_out].iter_mut() {
                *w = rng.gen_range(-bound..bound);
            }
        }
        ApproximatorParams { layout, values }
    }

    pub fn from_values(layout: LayerLayout, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.param_count() {
            return Err(Error::invalid_input(format!(
                "parameter vector length {} does not match layout ({})",
                values.len(),
                layout.param_count()
            )));
        }
        Ok(ApproximatorParams { layout, values })
    }
}

/// One decision step collected during an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub state: Vec<f64>,
    pub action: usize,
    pub behavior_logprob: f64,
    pub reward: f64,
    pub value_estimate: f64,
    pub action_mask: Vec<bool>,
}

/// Episode record for the policy being trained. Only the terminal step
/// may carry a nonzero reward.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<TrajectoryStep>,
    pub terminal_state: Vec<f64>,
    /// True when the episode genuinely ended; the tail value is then
    /// zero instead of a bootstrap from the terminal state.
    pub terminated: bool,
}

impl Trajectory {
    pub fn rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.reward).collect()
    }
}

/// Versioned checkpoint for one network; round-trips bit-exactly
/// through JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub layout: LayerLayout,
    pub values: Vec<f64>,
    pub optimizer: OptimizerState,
    pub rng_seed: u64,
    pub train_step: u64,
}

pub const CHECKPOINT_VERSION: u32 = 1;

impl Checkpoint {
    pub fn new(
        params: &ApproximatorParams,
        optimizer: OptimizerState,
        rng_seed: u64,
        train_step: u64,
    ) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            layout: params.layout.clone(),
            values: params.values.clone(),
            optimizer,
            rng_seed,
            train_step,
        }
    }

    pub fn params(&self) -> Result<ApproximatorParams> {
        ApproximatorParams::from_values(self.layout.clone(), self.values.clone())
    }

    pub fn save_json(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load_json(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Ingest(format!("{}: {e}", path.display())))?;
        let ckpt: Checkpoint =
            serde_json::from_str(&text).map_err(|e| Error::Ingest(format!("checkpoint: {e}")))?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Ingest(format!(
                "unsupported checkpoint version {}",
                ckpt.version
            )));
        }
        if ckpt.values.len() != ckpt.layout.param_count() {
            return Err(Error::Ingest("checkpoint parameter length mismatch".into()));
        }
        Ok(ckpt)
    }
}
