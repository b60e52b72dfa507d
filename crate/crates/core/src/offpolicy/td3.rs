use alloc::vec::Vec;

use rand::Rng;

use super::{
    clipped_double_q_target, critic_spec, polyak_update, CriticEval, RlCommonConfig, Transition,
};
use crate::error::Result;
use crate::nn::{self, init_mlp, Activation, MlpSpec, ObsNormalizer, ParamVector, Trace};
use crate::optim::Adam;
use crate::rng;

/// Deterministic actor, twin critics and their time-delayed copies.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Td3State {
    pub actor: ParamVector,
    pub critics: [ParamVector; 2],
    pub target_actor: ParamVector,
    pub target_critics: [ParamVector; 2],
    pub actor_adam: Adam,
    pub critic_adams: [Adam; 2],
    pub critic_updates: u64,
    /// Never updated; kept so policies share the evaluation plumbing.
    pub normalizer: ObsNormalizer,
}

impl Td3State {
    pub fn new(obs_dim: usize, act_dim: usize, config: &RlCommonConfig, seed: u64) -> Result<Self> {
        let actor_spec = MlpSpec::build(obs_dim, &config.hidden, act_dim, Activation::Tanh)?;
        let actor = init_mlp(&actor_spec, rng::derive(&[seed, 1]));
        let cspec = critic_spec(obs_dim, act_dim, &config.hidden)?;
        let critics = [
            init_mlp(&cspec, rng::derive(&[seed, 2])),
            init_mlp(&cspec, rng::derive(&[seed, 3])),
        ];
        Ok(Self {
            actor_adam: Adam::new(actor.len()),
            critic_adams: [Adam::new(critics[0].len()), Adam::new(critics[1].len())],
            target_actor: actor.clone(),
            target_critics: critics.clone(),
            actor,
            critics,
            critic_updates: 0,
            normalizer: ObsNormalizer::new(obs_dim),
        })
    }
}

/// `y = r + γ(1 − d)·min(Q′₁, Q′₂)` at the target policy's action plus
/// clipped Gaussian smoothing noise (std `noise`, clip `noise_clip`).
pub fn td3_targets<R: Rng + ?Sized>(
    state: &Td3State,
    batch: &[&Transition],
    gamma: f64,
    noise: f64,
    noise_clip: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let spec = state.target_actor.spec();
    let mut trace = Trace::new(spec);
    let mut q1 = CriticEval::new(state.target_critics[0].spec());
    let mut q2 = CriticEval::new(state.target_critics[1].spec());
    let mut action = Vec::with_capacity(spec.output_dim());
    let mut targets = Vec::with_capacity(batch.len());
    for t in batch {
        crate::error::check_len("observation", spec.input_dim(), t.next_obs.len())?;
        nn::forward_into(spec, state.target_actor.weights(), &t.next_obs, &mut trace);
        action.clear();
        for &a in trace.output() {
            let eps = if noise > 0.0 {
                (noise * rng::gaussian(rng)).clamp(-noise_clip, noise_clip)
            } else {
                0.0
            };
            action.push((a + eps).clamp(-1.0, 1.0));
        }
        let v1 = q1.q(&state.target_critics[0], &t.next_obs, &action);
        let v2 = q2.q(&state.target_critics[1], &t.next_obs, &action);
        targets.push(clipped_double_q_target(t.reward, t.done, v1, v2, gamma));
    }
    Ok(targets)
}

/// Adam ascent on `mean Q₁(s, π(s))`. Returns that mean before the step.
pub fn td3_actor_update(state: &mut Td3State, batch: &[&Transition], lr: f64) -> Result<f64> {
    let (objective, grad) = td3_actor_gradient(state, batch)?;
    state
        .actor_adam
        .descend(state.actor.values_mut(), &grad, lr)?;
    Ok(objective)
}

/// `mean Q₁(s, π(s))` and the gradient of its negation.
pub fn td3_actor_gradient(state: &Td3State, batch: &[&Transition]) -> Result<(f64, Vec<f64>)> {
    let spec = state.actor.spec();
    let obs_dim = spec.input_dim();
    let mut trace = Trace::new(spec);
    let mut critic = CriticEval::new(state.critics[0].spec());
    let mut grad = alloc::vec![0.0; state.actor.len()];
    let n = batch.len() as f64;
    let mut objective = 0.0;
    for t in batch {
        nn::forward_into(spec, state.actor.weights(), &t.obs, &mut trace);
        let action = trace.output().to_vec();
        objective += critic.q(&state.critics[0], &t.obs, &action);
        let upstream: Vec<f64> = critic
            .action_grad(&state.critics[0], obs_dim, 1.0, None)
            .iter()
            .map(|g| -g / n)
            .collect();
        nn::backward_into(
            spec,
            state.actor.weights(),
            &mut trace,
            &upstream,
            &mut grad,
            None,
        );
    }
    Ok((objective / n, grad))
}

/// Polyak-average every target network toward its source.
pub fn td3_sync_targets(state: &mut Td3State, tau: f64) {
    polyak_update(state.target_actor.values_mut(), state.actor.values(), tau);
    for k in 0..2 {
        polyak_update(
            state.target_critics[k].values_mut(),
            state.critics[k].values(),
            tau,
        );
    }
}
