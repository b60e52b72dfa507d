use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{
    clipped_double_q_target, critic_spec, critic_update, polyak_update, CriticEval, RlCommonConfig,
    Transition,
};
use crate::error::{Error, Result};
use crate::math;
use crate::nn::{self, init_mlp, Activation, MlpSpec, ObsNormalizer, ParamVector, Trace};
use crate::optim::Adam;
use crate::policy::LOG_STD_RANGE;
use crate::rng;

/// Squashed-Gaussian actor (outputs `[μ, log σ]`), twin critics and their
/// targets, with a fixed entropy coefficient.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SacState {
    pub actor: ParamVector,
    pub critics: [ParamVector; 2],
    pub target_critics: [ParamVector; 2],
    pub actor_adam: Adam,
    pub critic_adams: [Adam; 2],
    pub alpha: f64,
    pub updates: u64,
    /// Never updated; kept so policies share the evaluation plumbing.
    pub normalizer: ObsNormalizer,
}

impl SacState {
    pub fn new(obs_dim: usize, act_dim: usize, config: &RlCommonConfig, seed: u64) -> Result<Self> {
        let actor_spec =
            MlpSpec::build(obs_dim, &config.hidden, 2 * act_dim, Activation::Identity)?;
        let actor = init_mlp(&actor_spec, rng::derive(&[seed, 1]));
        let cspec = critic_spec(obs_dim, act_dim, &config.hidden)?;
        let critics = [
            init_mlp(&cspec, rng::derive(&[seed, 2])),
            init_mlp(&cspec, rng::derive(&[seed, 3])),
        ];
        Ok(Self {
            actor_adam: Adam::new(actor.len()),
            critic_adams: [Adam::new(critics[0].len()), Adam::new(critics[1].len())],
            target_critics: critics.clone(),
            actor,
            critics,
            alpha: config.alpha,
            updates: 0,
            normalizer: ObsNormalizer::new(obs_dim),
        })
    }
}

/// Action `tanh(μ + σξ)` and its log-density, including the change-of-variables
/// term `−Σ ln(1 − tanh²u)`. `log_std` is clamped to the allowed range.
pub fn squashed_log_prob(mean: &[f64], log_std: &[f64], xi: &[f64]) -> (Vec<f64>, f64) {
    let mut action = Vec::with_capacity(mean.len());
    let mut log_prob = 0.0;
    for ((&m, &s), &x) in mean.iter().zip(log_std).zip(xi) {
        let s = s.clamp(LOG_STD_RANGE.0, LOG_STD_RANGE.1);
        let u = m + math::exp(s) * x;
        action.push(math::tanh(u));
        log_prob += -0.5 * x * x - s - 0.5 * math::LN_2PI - log_one_minus_tanh_sq(u);
    }
    (action, log_prob)
}

/// `ln(1 − tanh²u) = 2(ln 2 − u − softplus(−2u))`, stable for large |u|.
fn log_one_minus_tanh_sq(u: f64) -> f64 {
    2.0 * (core::f64::consts::LN_2 - u - math::softplus(-2.0 * u))
}

/// Soft targets `y = r + γ(1 − d)(min Q′(s′, a′) − α log π(a′|s′))` with
/// `a′ = tanh(μ(s′) + σ(s′)ξ)` from the current actor; `xi` supplies one
/// standard-normal vector per transition.
pub fn sac_targets(
    state: &SacState,
    batch: &[&Transition],
    gamma: f64,
    xi: &[Vec<f64>],
) -> Result<Vec<f64>> {
    crate::error::check_len("noise vectors", batch.len(), xi.len())?;
    let spec = state.actor.spec();
    let dim = spec.output_dim() / 2;
    let mut trace = Trace::new(spec);
    let mut q1 = CriticEval::new(state.target_critics[0].spec());
    let mut q2 = CriticEval::new(state.target_critics[1].spec());
    let mut targets = Vec::with_capacity(batch.len());
    for (t, x) in batch.iter().zip(xi) {
        nn::forward_into(spec, state.actor.weights(), &t.next_obs, &mut trace);
        let out = trace.output();
        let (action, log_prob) = squashed_log_prob(&out[..dim], &out[dim..], x);
        let v1 = q1.q(&state.target_critics[0], &t.next_obs, &action);
        let v2 = q2.q(&state.target_critics[1], &t.next_obs, &action);
        let soft = clipped_double_q_target(t.reward, t.done, v1, v2, gamma);
        let live = if t.done { 0.0 } else { 1.0 };
        targets.push(soft - gamma * live * state.alpha * log_prob);
    }
    Ok(targets)
}

/// Actor loss `mean(α log π(a|s) − min Q(s, a))` with reparameterized
/// actions, and its gradient.
pub fn sac_actor_loss(
    state: &SacState,
    batch: &[&Transition],
    xi: &[Vec<f64>],
) -> Result<(f64, Vec<f64>)> {
    crate::error::check_len("noise vectors", batch.len(), xi.len())?;
    let spec = state.actor.spec();
    let obs_dim = spec.input_dim();
    let dim = spec.output_dim() / 2;
    let mut trace = Trace::new(spec);
    let mut q = [
        CriticEval::new(state.critics[0].spec()),
        CriticEval::new(state.critics[1].spec()),
    ];
    let mut grad = vec![0.0; state.actor.len()];
    let mut upstream = vec![0.0; 2 * dim];
    let n = batch.len() as f64;
    let alpha = state.alpha;
    let mut loss = 0.0;
    for (t, x) in batch.iter().zip(xi) {
        nn::forward_into(spec, state.actor.weights(), &t.obs, &mut trace);
        let out = trace.output().to_vec();
        let (action, log_prob) = squashed_log_prob(&out[..dim], &out[dim..], x);
        let v = [
            q[0].q(&state.critics[0], &t.obs, &action),
            q[1].q(&state.critics[1], &t.obs, &action),
        ];
        let k = if v[0] <= v[1] { 0 } else { 1 };
        loss += alpha * log_prob - v[k];
        let dq = q[k].action_grad(&state.critics[k], obs_dim, 1.0, None);
        for i in 0..dim {
            let raw = out[dim + i];
            let s = raw.clamp(LOG_STD_RANGE.0, LOG_STD_RANGE.1);
            let sigma = math::exp(s);
            let a = action[i];
            let d_u = alpha * 2.0 * a - dq[i] * (1.0 - a * a);
            upstream[i] = d_u / n;
            upstream[dim + i] = if raw > LOG_STD_RANGE.0 && raw < LOG_STD_RANGE.1 {
                (-alpha + d_u * sigma * x[i]) / n
            } else {
                0.0
            };
        }
        nn::backward_into(
            spec,
            state.actor.weights(),
            &mut trace,
            &upstream,
            &mut grad,
            None,
        );
    }
    if !loss.is_finite() {
        return Err(Error::Diverged);
    }
    Ok((loss / n, grad))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SacUpdateStats {
    pub critic_losses: [f64; 2],
    pub actor_loss: f64,
}

/// One SAC step: soft critic regression, actor step, target averaging.
pub fn sac_update<R: Rng + ?Sized>(
    state: &mut SacState,
    batch: &[&Transition],
    config: &RlCommonConfig,
    rng: &mut R,
) -> Result<SacUpdateStats> {
    let dim = state.actor.spec().output_dim() / 2;
    let draw = |rng: &mut R| -> Vec<Vec<f64>> {
        batch
            .iter()
            .map(|_| (0..dim).map(|_| rng::gaussian(rng)).collect())
            .collect()
    };
    let xi = draw(rng);
    let targets = sac_targets(state, batch, config.gamma, &xi)?;
    let [c0, c1] = &mut state.critics;
    let [a0, a1] = &mut state.critic_adams;
    let critic_losses = critic_update([c0, c1], [a0, a1], batch, &targets, config.learning_rate)?;
    let xi = draw(rng);
    let (actor_loss, grad) = sac_actor_loss(state, batch, &xi)?;
    state
        .actor_adam
        .descend(state.actor.values_mut(), &grad, config.learning_rate)?;
    for k in 0..2 {
        polyak_update(
            state.target_critics[k].values_mut(),
            state.critics[k].values(),
            config.tau,
        );
    }
    state.updates += 1;
    Ok(SacUpdateStats {
        critic_losses,
        actor_loss,
    })
}
