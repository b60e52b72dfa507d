//! Post-evaluation of trained agents on fresh episodes with learning off.

use evorl_core::env::{EnvId, EnvSpec};
use evorl_core::math;
use evorl_core::nn::ActionMode;
use evorl_core::policy::evaluate_policy;
use evorl_core::rng;
use evorl_core::stats::{self, Heatmap};
use serde::{Deserialize, Serialize};

use crate::agent::Agent;
use crate::error::Result;

/// Tag separating post-evaluation episode seeds from training seeds.
const POSTEVAL_TAG: u64 = 0x9057_e7a1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostEvalReport {
    pub env: EnvId,
    pub stochastic: bool,
    pub seeds: Vec<u64>,
    pub returns: Vec<f64>,
    pub displacements: Vec<f64>,
    pub steps: Vec<u64>,
    pub mean_return: f64,
    pub median_return: f64,
    pub mean_displacement: f64,
    pub median_displacement: f64,
    /// Positional entropy over all post-evaluation steps.
    pub entropy: f64,
    pub heatmap: Heatmap,
}

/// Episode seeds for post-evaluation keyed by `base`, laid out the way the
/// environment pairs them.
pub fn posteval_seeds(env: &EnvSpec, base: u64, episodes: usize) -> Vec<u64> {
    env.build()
        .episode_seeds(rng::derive(&[base, POSTEVAL_TAG]), episodes)
}

/// Heatmap grid for `env`: a 1-D strip for the paddle, a square grid elsewhere.
pub fn default_grid(env: EnvId) -> (usize, usize) {
    match env {
        EnvId::Paddle => (20, 1),
        _ => (20, 20),
    }
}

/// Run `agent` on `env` for the given seeds. Actions are deterministic
/// unless `stochastic`, in which case the agent's training-time sampling is
/// used with noise keyed by each episode seed.
pub fn post_evaluate(
    agent: &Agent,
    env: &EnvSpec,
    seeds: &[u64],
    stochastic: bool,
) -> Result<PostEvalReport> {
    agent.check_env(env)?;
    let mut instance = env.build();
    let mut runner = agent.runner()?;
    let (cols, rows) = default_grid(env.id);
    let (low, high) = instance.position_bounds();
    let mut heatmap = Heatmap::new(cols, rows, low, high)?;
    let mode = if stochastic {
        agent.training_mode
    } else {
        ActionMode::Deterministic
    };
    let episodes = evaluate_policy(&mut *instance, &mut runner, mode, seeds, |_, _, step| {
        heatmap.add(step.info.position)
    })?;
    let returns: Vec<f64> = episodes.iter().map(|e| e.total_reward).collect();
    let displacements: Vec<f64> = episodes.iter().map(|e| e.displacement).collect();
    Ok(PostEvalReport {
        env: env.id,
        stochastic,
        seeds: seeds.to_vec(),
        mean_return: math::mean(&returns),
        median_return: stats::median(&returns)?,
        mean_displacement: math::mean(&displacements),
        median_displacement: stats::median(&displacements)?,
        entropy: heatmap.entropy(),
        steps: episodes.iter().map(|e| e.steps).collect(),
        returns,
        displacements,
        heatmap,
    })
}
