//! Proximal policy optimization: clipped surrogate, clipped value loss,
//! generalized advantage estimation and minibatch Adam updates.

mod train;

pub use train::{collect_rollout, train_ppo, Collector, PpoRun};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::error::{check_len, Error, Result};
use crate::math;
use crate::nn::{
    self, categorical_entropy, categorical_log_prob, gaussian_entropy, gaussian_log_prob, init_mlp,
    softmax, ActionSpace, Activation, MlpSpec, ObsNormalizer, ParamVector, Trace,
};
use crate::optim::{clip_grad_norm, Adam};
use crate::rng::{self, tag};

/// Learning rate as a function of training progress in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum LrSchedule {
    Constant(f64),
    /// Linear interpolation from `start` (progress 0) to `end` (progress 1).
    Linear {
        start: f64,
        end: f64,
    },
}

impl LrSchedule {
    pub fn rate(&self, progress: f64) -> f64 {
        match *self {
            LrSchedule::Constant(lr) => lr,
            LrSchedule::Linear { start, end } => start + (end - start) * progress.clamp(0.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PpoConfig {
    pub clip: f64,
    pub value_clip: f64,
    pub entropy_coef: f64,
    pub rollout_steps: usize,
    pub minibatch_size: usize,
    pub epochs: usize,
    pub gamma: f64,
    pub lambda: f64,
    pub lr: LrSchedule,
    pub normalize_advantages: bool,
    pub max_grad_norm: Option<f64>,
    pub hidden: Vec<usize>,
    /// Initial log-σ of the Gaussian head.
    pub initial_log_std: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            clip: 0.2,
            value_clip: 0.5,
            entropy_coef: 0.0,
            rollout_steps: 512,
            minibatch_size: 128,
            epochs: 10,
            gamma: 0.99,
            lambda: 0.95,
            lr: LrSchedule::Constant(2.5e-4),
            normalize_advantages: true,
            max_grad_norm: None,
            hidden: vec![256, 256],
            initial_log_std: 0.0,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidConfig(format!("ppo: {msg}")));
        if !(self.clip > 0.0 && self.clip < 1.0) {
            return fail("clip must lie in (0, 1)");
        }
        if !(self.value_clip > 0.0) {
            return fail("value_clip must be positive");
        }
        if self.rollout_steps == 0 || self.minibatch_size == 0 || self.epochs == 0 {
            return fail("rollout_steps, minibatch_size and epochs must be positive");
        }
        if self.minibatch_size > self.rollout_steps {
            return fail("minibatch_size must not exceed rollout_steps");
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.lambda) {
            return fail("gamma and lambda must lie in [0, 1]");
        }
        if self.entropy_coef < 0.0 {
            return fail("entropy_coef must be non-negative");
        }
        Ok(())
    }
}

/// On-policy trajectory storage. Observations are stored already normalized.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RolloutBuffer {
    pub observations: Vec<Vec<f64>>,
    /// Unclamped continuous sample, or `[index]` for discrete actions.
    pub actions: Vec<Vec<f64>>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    pub values: Vec<f64>,
    /// Critic estimate of the state following the last stored step.
    pub last_value: f64,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    /// Fill `advantages` and `returns` with GAE(γ, λ).
    pub fn finish(&mut self, gamma: f64, lambda: f64) {
        let (adv, ret) = compute_gae(
            &self.rewards,
            &self.values,
            &self.dones,
            self.last_value,
            gamma,
            lambda,
        );
        self.advantages = adv;
        self.returns = ret;
    }
}

/// Generalized advantage estimation. Returns (advantages, return targets),
/// with targets = advantages + values.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    last_value: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    let mut advantages = vec![0.0; n];
    let mut next_value = last_value;
    let mut running = 0.0;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * live * next_value - values[t];
        running = delta + gamma * lambda * live * running;
        advantages[t] = running;
        next_value = values[t];
    }
    let returns = advantages.iter().zip(values).map(|(a, v)| a + v).collect();
    (advantages, returns)
}

/// Shift and scale to zero mean and unit standard deviation.
pub fn normalize_advantages(advantages: &[f64]) -> Vec<f64> {
    let mean = math::mean(advantages);
    let var = advantages
        .iter()
        .map(|a| (a - mean) * (a - mean))
        .sum::<f64>()
        / advantages.len().max(1) as f64;
    let scale = 1.0 / (math::sqrt(var) + 1e-8);
    advantages.iter().map(|a| (a - mean) * scale).collect()
}

/// Per-sample clipped objective `min(r·A, clip(r, 1−ε, 1+ε)·A)`.
pub fn clipped_objective(ratio: f64, advantage: f64, clip: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - clip, 1.0 + clip);
    (ratio * advantage).min(clipped * advantage)
}

/// Whether the clipped branch is selected, cutting the gradient to zero.
fn clip_binds(ratio: f64, advantage: f64, clip: f64) -> bool {
    (advantage > 0.0 && ratio > 1.0 + clip) || (advantage < 0.0 && ratio < 1.0 - clip)
}

pub fn actor_spec(obs_dim: usize, space: ActionSpace, hidden: &[usize]) -> Result<MlpSpec> {
    let spec = MlpSpec::build(obs_dim, hidden, space.output_dim(), Activation::Identity)?;
    Ok(match space {
        ActionSpace::Continuous { .. } => spec.with_log_std_head(),
        ActionSpace::Discrete { .. } => spec,
    })
}

pub fn critic_spec(obs_dim: usize, hidden: &[usize]) -> Result<MlpSpec> {
    MlpSpec::build(obs_dim, hidden, 1, Activation::Identity)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PpoState {
    pub actor: ParamVector,
    pub critic: ParamVector,
    pub space: ActionSpace,
    pub actor_adam: Adam,
    pub critic_adam: Adam,
    pub steps: u64,
    pub updates: u64,
    pub normalizer: ObsNormalizer,
    pub seed: u64,
}

impl PpoState {
    pub fn new(config: &PpoConfig, obs_dim: usize, space: ActionSpace, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut actor = init_mlp(
            &actor_spec(obs_dim, space, &config.hidden)?,
            rng::derive(&[seed, 1]),
        );
        actor.set_log_std(config.initial_log_std);
        let critic = init_mlp(
            &critic_spec(obs_dim, &config.hidden)?,
            rng::derive(&[seed, 2]),
        );
        Ok(Self {
            actor_adam: Adam::new(actor.len()),
            critic_adam: Adam::new(critic.len()),
            actor,
            critic,
            space,
            steps: 0,
            updates: 0,
            normalizer: ObsNormalizer::new(obs_dim),
            seed,
        })
    }
}

/// Log-probability of `action` at an already-normalized observation.
pub fn action_log_prob(
    actor: &ParamVector,
    space: ActionSpace,
    obs: &[f64],
    action: &[f64],
) -> Result<f64> {
    let out = nn::forward(actor, obs)?;
    let n = space.output_dim();
    Ok(match space {
        ActionSpace::Continuous { .. } => gaussian_log_prob(action, &out[..n], &out[n..]),
        ActionSpace::Discrete { .. } => categorical_log_prob(&out[..n], action[0] as usize),
    })
}

/// Scalar critic value at a normalized observation.
pub fn value(critic: &ParamVector, obs: &[f64]) -> Result<f64> {
    Ok(nn::forward(critic, obs)?[0])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateStats {
    pub loss: f64,
    pub objective: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
}

/// Loss and gradient of the actor over `indices` of `buffer`: the negated
/// mean clipped objective minus `entropy_coef` times the mean entropy.
/// `advantages` is aligned with the buffer (already normalized if desired).
pub fn ppo_surrogate(
    actor: &ParamVector,
    space: ActionSpace,
    buffer: &RolloutBuffer,
    indices: &[usize],
    advantages: &[f64],
    clip: f64,
    entropy_coef: f64,
) -> Result<(SurrogateStats, Vec<f64>)> {
    check_len("advantages", buffer.len(), advantages.len())?;
    let spec = actor.spec();
    let n_out = spec.output_dim();
    let weights = actor.weights();
    let wc = spec.weight_count();
    let mut grad = vec![0.0; actor.len()];
    let mut trace = Trace::new(spec);
    let mut upstream = vec![0.0; n_out];
    let batch = indices.len() as f64;
    let (mut objective, mut entropy, mut clipped) = (0.0, 0.0, 0usize);
    for &i in indices {
        nn::forward_into(spec, weights, &buffer.observations[i], &mut trace);
        let out = trace.output();
        let action = &buffer.actions[i];
        let adv = advantages[i];
        match space {
            ActionSpace::Continuous { .. } => {
                let log_std = actor.log_std();
                let logp = gaussian_log_prob(action, out, log_std);
                let ratio = math::exp(logp - buffer.log_probs[i]);
                if !ratio.is_finite() {
                    return Err(Error::Diverged);
                }
                objective += clipped_objective(ratio, adv, clip);
                entropy += gaussian_entropy(log_std);
                // d objective / d logp
                let g = if clip_binds(ratio, adv, clip) {
                    clipped += 1;
                    0.0
                } else {
                    ratio * adv
                };
                for k in 0..n_out {
                    let sigma = math::exp(log_std[k]);
                    let z = (action[k] - out[k]) / sigma;
                    upstream[k] = -g * z / sigma / batch;
                    grad[wc + k] -= (g * (z * z - 1.0) + entropy_coef) / batch;
                }
            }
            ActionSpace::Discrete { .. } => {
                let a = action[0] as usize;
                let logp = categorical_log_prob(out, a);
                let ratio = math::exp(logp - buffer.log_probs[i]);
                if !ratio.is_finite() {
                    return Err(Error::Diverged);
                }
                objective += clipped_objective(ratio, adv, clip);
                let h = categorical_entropy(out);
                entropy += h;
                let g = if clip_binds(ratio, adv, clip) {
                    clipped += 1;
                    0.0
                } else {
                    ratio * adv
                };
                let probs = softmax(out);
                for k in 0..n_out {
                    let p = probs[k];
                    let dlogp = if k == a { 1.0 - p } else { -p };
                    let dh = if p > 0.0 { -p * (math::ln(p) + h) } else { 0.0 };
                    upstream[k] = -(g * dlogp + entropy_coef * dh) / batch;
                }
            }
        }
        nn::backward_into(spec, weights, &mut trace, &upstream, &mut grad[..wc], None);
    }
    let objective = objective / batch;
    let entropy = entropy / batch;
    let stats = SurrogateStats {
        loss: -objective - entropy_coef * entropy,
        objective,
        entropy,
        clip_fraction: clipped as f64 / batch,
    };
    Ok((stats, grad))
}

/// Clipped value loss `mean max((V − R)², (V_old + clip(V − V_old, ±c) − R)²)`
/// and its gradient; `V_old` and `R` come from the buffer.
pub fn value_loss(
    critic: &ParamVector,
    buffer: &RolloutBuffer,
    indices: &[usize],
    value_clip: f64,
) -> Result<(f64, Vec<f64>)> {
    let spec = critic.spec();
    let weights = critic.weights();
    let mut grad = vec![0.0; critic.len()];
    let mut trace = Trace::new(spec);
    let batch = indices.len() as f64;
    let mut loss = 0.0;
    for &i in indices {
        nn::forward_into(spec, weights, &buffer.observations[i], &mut trace);
        let v = trace.output()[0];
        let (v_old, target) = (buffer.values[i], buffer.returns[i]);
        let delta = (v - v_old).clamp(-value_clip, value_clip);
        let v_clipped = v_old + delta;
        let plain = (v - target) * (v - target);
        let clipped = (v_clipped - target) * (v_clipped - target);
        let dv = if plain >= clipped {
            loss += plain;
            2.0 * (v - target)
        } else {
            loss += clipped;
            if (v - v_old).abs() < value_clip {
                2.0 * (v_clipped - target)
            } else {
                0.0
            }
        };
        nn::backward_into(spec, weights, &mut trace, &[dv / batch], &mut grad, None);
    }
    Ok((loss / batch, grad))
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub learning_rate: f64,
}

/// `epochs` passes of shuffled minibatch Adam steps on actor and critic.
/// `progress` in `[0, 1]` drives the learning-rate schedule.
pub fn ppo_update(
    state: &mut PpoState,
    buffer: &RolloutBuffer,
    config: &PpoConfig,
    progress: f64,
) -> Result<UpdateStats> {
    config.validate()?;
    if buffer.advantages.len() != buffer.len() || buffer.returns.len() != buffer.len() {
        return Err(Error::InvalidConfig(
            "rollout buffer has no advantages; call finish first".into(),
        ));
    }
    let advantages = if config.normalize_advantages {
        normalize_advantages(&buffer.advantages)
    } else {
        buffer.advantages.clone()
    };
    if advantages.iter().any(|a| !a.is_finite()) {
        return Err(Error::NonFinite("advantages"));
    }
    let lr = config.lr.rate(progress);
    let mut order: Vec<usize> = (0..buffer.len()).collect();
    let mut shuffle = rng::stream(&[state.seed, tag::SHUFFLE, state.updates]);
    let mut stats = UpdateStats {
        learning_rate: lr,
        ..UpdateStats::default()
    };
    let mut batches = 0.0;
    for _ in 0..config.epochs {
        order.shuffle(&mut shuffle);
        for chunk in order.chunks(config.minibatch_size) {
            let (surrogate, mut actor_grad) = ppo_surrogate(
                &state.actor,
                state.space,
                buffer,
                chunk,
                &advantages,
                config.clip,
                config.entropy_coef,
            )?;
            let (v_loss, mut critic_grad) =
                value_loss(&state.critic, buffer, chunk, config.value_clip)?;
            if let Some(max) = config.max_grad_norm {
                clip_grad_norm(&mut actor_grad, max);
                clip_grad_norm(&mut critic_grad, max);
            }
            state
                .actor_adam
                .descend(state.actor.values_mut(), &actor_grad, lr)
                .map_err(|_| Error::Diverged)?;
            state
                .critic_adam
                .descend(state.critic.values_mut(), &critic_grad, lr)
                .map_err(|_| Error::Diverged)?;
            stats.policy_loss += surrogate.loss;
            stats.value_loss += v_loss;
            stats.entropy += surrogate.entropy;
            stats.clip_fraction += surrogate.clip_fraction;
            batches += 1.0;
        }
    }
    if !state.actor.is_finite() || !state.critic.is_finite() {
        return Err(Error::Diverged);
    }
    stats.policy_loss /= batches;
    stats.value_loss /= batches;
    stats.entropy /= batches;
    stats.clip_fraction /= batches;
    state.steps += buffer.len() as u64;
    state.updates += 1;
    Ok(stats)
}
