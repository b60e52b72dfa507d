//! Off-policy actor-critic learners: TD3 and SAC with a fixed entropy
//! coefficient, sharing a replay buffer and twin-critic machinery.

mod sac;
mod td3;
mod train;

pub use sac::{
    sac_actor_loss, sac_targets, sac_update, squashed_log_prob, SacState, SacUpdateStats,
};
pub use td3::{td3_actor_gradient, td3_actor_update, td3_sync_targets, td3_targets, Td3State};
pub use train::{train_sac, train_td3, OffPolicyRun};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{check_len, Error, Result};
use crate::nn::{self, Activation, MlpSpec, ParamVector, Trace};
use crate::optim::Adam;

/// One stored transition `(s, a, r, s′, d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub done: bool,
}

/// Fixed-capacity FIFO ring of transitions with uniform sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            items: Vec::new(),
            next: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Store a transition, overwriting the oldest once full.
    pub fn push(&mut self, transition: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(transition);
        } else {
            self.items[self.next] = transition;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// `n` transitions drawn uniformly with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<&Transition>> {
        if self.items.is_empty() {
            return Err(Error::EmptySample);
        }
        Ok((0..n)
            .map(|_| &self.items[rng.random_range(0..self.items.len())])
            .collect())
    }
}

/// Settings shared by TD3 and SAC.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RlCommonConfig {
    pub gamma: f64,
    pub tau: f64,
    pub batch_size: usize,
    /// TD3 target policy smoothing noise std and clip.
    pub target_noise: f64,
    pub target_noise_clip: f64,
    pub policy_delay: u64,
    /// Steps of uniformly random actions before learning starts.
    pub warmup_steps: u64,
    pub learning_rate: f64,
    /// TD3 behavior noise std.
    pub exploration_noise: f64,
    pub buffer_capacity: usize,
    pub hidden: Vec<usize>,
    /// SAC entropy coefficient α.
    pub alpha: f64,
    /// Environment steps between learning-curve rows.
    pub report_interval: u64,
}

impl Default for RlCommonConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            tau: 0.005,
            batch_size: 256,
            target_noise: 0.2,
            target_noise_clip: 0.5,
            policy_delay: 2,
            warmup_steps: 1000,
            learning_rate: 3e-4,
            exploration_noise: 0.1,
            buffer_capacity: 100_000,
            hidden: vec![64, 64],
            alpha: 0.2,
            report_interval: 1000,
        }
    }
}

impl RlCommonConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidConfig(format!("off-policy: {msg}")));
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return fail("tau must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return fail("gamma must lie in [0, 1]");
        }
        if self.batch_size == 0 || self.policy_delay == 0 || self.report_interval == 0 {
            return fail("batch_size, policy_delay and report_interval must be positive");
        }
        if self.alpha < 0.0 || self.target_noise < 0.0 || self.exploration_noise < 0.0 {
            return fail("alpha and noise levels must be non-negative");
        }
        Ok(())
    }
}

/// `r + γ(1 − d)·min(q1, q2)`.
pub fn clipped_double_q_target(reward: f64, done: bool, q1: f64, q2: f64, gamma: f64) -> f64 {
    let live = if done { 0.0 } else { 1.0 };
    reward + gamma * live * q1.min(q2)
}

/// `target ← τ·source + (1 − τ)·target`, elementwise.
pub fn polyak_update(target: &mut [f64], source: &[f64], tau: f64) {
    if tau == 1.0 {
        target.copy_from_slice(source);
        return;
    }
    for (t, s) in target.iter_mut().zip(source) {
        *t = tau * s + (1.0 - tau) * *t;
    }
}

pub fn critic_spec(obs_dim: usize, act_dim: usize, hidden: &[usize]) -> Result<MlpSpec> {
    MlpSpec::build(obs_dim + act_dim, hidden, 1, Activation::Identity)
}

/// Q(s, a) for one critic.
pub fn q_value(critic: &ParamVector, obs: &[f64], action: &[f64]) -> Result<f64> {
    let mut input = Vec::with_capacity(obs.len() + action.len());
    input.extend_from_slice(obs);
    input.extend_from_slice(action);
    Ok(nn::forward(critic, &input)?[0])
}

/// Evaluates a critic and its action gradient with reusable buffers.
pub(crate) struct CriticEval {
    trace: Trace,
    input: Vec<f64>,
    input_grad: Vec<f64>,
}

impl CriticEval {
    pub(crate) fn new(spec: &MlpSpec) -> Self {
        Self {
            trace: Trace::new(spec),
            input: vec![0.0; spec.input_dim()],
            input_grad: vec![0.0; spec.input_dim()],
        }
    }

    pub(crate) fn q(&mut self, critic: &ParamVector, obs: &[f64], action: &[f64]) -> f64 {
        self.input[..obs.len()].copy_from_slice(obs);
        self.input[obs.len()..].copy_from_slice(action);
        nn::forward_into(
            critic.spec(),
            critic.weights(),
            &self.input,
            &mut self.trace,
        );
        self.trace.output()[0]
    }

    /// ∂Q/∂a at the point of the last `q` call; accumulates `scale·∂Q/∂θ`
    /// into `param_grad` when given.
    pub(crate) fn action_grad(
        &mut self,
        critic: &ParamVector,
        obs_dim: usize,
        scale: f64,
        param_grad: Option<&mut [f64]>,
    ) -> &[f64] {
        let mut scratch;
        let grad = match param_grad {
            Some(g) => g,
            None => {
                scratch = vec![0.0; critic.len()];
                &mut scratch[..]
            }
        };
        nn::backward_into(
            critic.spec(),
            critic.weights(),
            &mut self.trace,
            &[scale],
            grad,
            Some(&mut self.input_grad),
        );
        &self.input_grad[obs_dim..]
    }
}

/// One Adam step on each critic toward `targets` with mean-squared error.
/// Returns both losses (computed before the step).
pub fn critic_update(
    critics: [&mut ParamVector; 2],
    adams: [&mut Adam; 2],
    batch: &[&Transition],
    targets: &[f64],
    lr: f64,
) -> Result<[f64; 2]> {
    check_len("critic targets", batch.len(), targets.len())?;
    let mut losses = [0.0; 2];
    for (k, (critic, adam)) in critics.into_iter().zip(adams).enumerate() {
        let (loss, grad) = critic_loss(critic, batch, targets)?;
        adam.descend(critic.values_mut(), &grad, lr)?;
        losses[k] = loss;
    }
    Ok(losses)
}

/// Mean-squared error `mean (Q(s, a) − y)²` and its parameter gradient.
pub fn critic_loss(
    critic: &ParamVector,
    batch: &[&Transition],
    targets: &[f64],
) -> Result<(f64, Vec<f64>)> {
    check_len("critic targets", batch.len(), targets.len())?;
    let spec = critic.spec();
    let mut eval = CriticEval::new(spec);
    let mut grad = vec![0.0; critic.len()];
    let n = batch.len() as f64;
    let mut loss = 0.0;
    for (t, &y) in batch.iter().zip(targets) {
        check_len(
            "critic input",
            spec.input_dim(),
            t.obs.len() + t.action.len(),
        )?;
        let q = eval.q(critic, &t.obs, &t.action);
        loss += (q - y) * (q - y);
        eval.action_grad(critic, t.obs.len(), 2.0 * (q - y) / n, Some(&mut grad));
    }
    if !loss.is_finite() {
        return Err(Error::Diverged);
    }
    Ok((loss / n, grad))
}

#[cfg(test)]
mod tests;
