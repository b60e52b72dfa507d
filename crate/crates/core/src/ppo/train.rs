use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use super::{ppo_update, PpoConfig, PpoState, RolloutBuffer};
use crate::env::{Action, Env, EnvSpec};
use crate::error::{Error, Result};
use crate::nn::{
    self, categorical_log_prob, gaussian_log_prob, sample_categorical, ActionSpace, Trace,
};
use crate::policy::PolicyHead;
use crate::rl::{
    deterministic_return, offer_best, BestPolicy, EpisodeLog, EvalProtocol, TrainReport,
};
use crate::rng::{self, tag, Stream};

/// Environment instance that keeps running across rollouts; episodes reset
/// on termination with seeds derived from the run seed.
pub struct Collector {
    env: Box<dyn Env>,
    obs: Vec<f64>,
    seed: u64,
    episode: u64,
    episode_return: f64,
    rng: Stream,
    log: EpisodeLog,
}

impl Collector {
    pub fn new(env: &EnvSpec, seed: u64) -> Self {
        let mut env = env.build();
        let obs = env.reset(rng::derive(&[seed, tag::EPISODE, 0]));
        Self {
            env,
            obs,
            seed,
            episode: 0,
            episode_return: 0.0,
            rng: rng::stream(&[seed, tag::ROLLOUT]),
            log: EpisodeLog::default(),
        }
    }

    pub fn observation_dim(&self) -> usize {
        self.env.observation_dim()
    }

    pub fn action_space(&self) -> ActionSpace {
        self.env.action_space()
    }

    /// Episodes finished so far.
    pub fn episodes(&self) -> u64 {
        self.episode
    }

    fn finish_episode(&mut self) {
        self.log.push(self.episode_return);
        self.episode_return = 0.0;
        self.episode += 1;
        self.obs = self
            .env
            .reset(rng::derive(&[self.seed, tag::EPISODE, self.episode]));
    }
}

/// Sample `n_steps` transitions from the current stochastic policy, then
/// fold the raw observations into the normalizer.
pub fn collect_rollout(
    state: &mut PpoState,
    collector: &mut Collector,
    n_steps: usize,
) -> Result<RolloutBuffer> {
    let mut buffer = RolloutBuffer::default();
    let mut raw = Vec::with_capacity(n_steps);
    let actor_spec = state.actor.spec().clone();
    let critic_spec = state.critic.spec().clone();
    let mut actor_trace = Trace::new(&actor_spec);
    let mut critic_trace = Trace::new(&critic_spec);
    let limit = collector.env.max_episode_steps();
    let mut episode_steps = 0usize;
    let mut clamped = Vec::new();
    for step in 0..n_steps {
        let obs = state.normalizer.normalize(&collector.obs);
        nn::forward_into(&actor_spec, state.actor.weights(), &obs, &mut actor_trace);
        nn::forward_into(
            &critic_spec,
            state.critic.weights(),
            &obs,
            &mut critic_trace,
        );
        let out = actor_trace.output();
        let (action, log_prob) = match state.space {
            ActionSpace::Continuous { .. } => {
                let log_std = state.actor.log_std();
                let a: Vec<f64> = out
                    .iter()
                    .zip(log_std)
                    .map(|(m, s)| m + crate::math::exp(*s) * rng::gaussian(&mut collector.rng))
                    .collect();
                let lp = gaussian_log_prob(&a, out, log_std);
                (a, lp)
            }
            ActionSpace::Discrete { .. } => {
                let a = sample_categorical(out, &mut collector.rng);
                (alloc::vec![a as f64], categorical_log_prob(out, a))
            }
        };
        let result = match state.space {
            ActionSpace::Continuous { low, high, .. } => {
                clamped.clear();
                clamped.extend(action.iter().map(|a| a.clamp(low, high)));
                collector.env.step(Action::Continuous(&clamped))
            }
            ActionSpace::Discrete { .. } => {
                collector.env.step(Action::Discrete(action[0] as usize))
            }
        }
        .map_err(|e| Error::Rollout {
            step: state.steps + step as u64,
            message: format!("{e}"),
        })?;
        episode_steps += 1;
        let done = result.done || episode_steps >= limit;
        raw.push(core::mem::replace(&mut collector.obs, result.observation));
        buffer.observations.push(obs);
        buffer.actions.push(action);
        buffer.log_probs.push(log_prob);
        buffer.rewards.push(result.reward);
        buffer.dones.push(done);
        buffer.values.push(critic_trace.output()[0]);
        collector.episode_return += result.reward;
        if done {
            collector.finish_episode();
            episode_steps = 0;
        }
    }
    let last = state.normalizer.normalize(&collector.obs);
    nn::forward_into(
        &critic_spec,
        state.critic.weights(),
        &last,
        &mut critic_trace,
    );
    buffer.last_value = critic_trace.output()[0];
    state.normalizer.update(raw.iter().map(Vec::as_slice));
    Ok(buffer)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PpoRun {
    pub state: PpoState,
    pub reports: Vec<TrainReport>,
    pub best: Option<BestPolicy>,
}

/// Train until the next rollout would exceed `budget` environment steps.
pub fn train_ppo<C>(
    config: &PpoConfig,
    env: &EnvSpec,
    seed: u64,
    budget: u64,
    eval: EvalProtocol,
    mut on_report: C,
) -> Result<PpoRun>
where
    C: FnMut(&TrainReport, &PpoState) -> Result<()>,
{
    config.validate()?;
    let mut collector = Collector::new(env, seed);
    let mut state = PpoState::new(
        config,
        collector.observation_dim(),
        collector.action_space(),
        seed,
    )?;
    let rollout = config.rollout_steps as u64;
    let mut reports = Vec::new();
    let mut best = None;
    while state.steps + rollout <= budget {
        let mut buffer = collect_rollout(&mut state, &mut collector, config.rollout_steps)?;
        buffer.finish(config.gamma, config.lambda);
        let progress = state.steps as f64 / budget as f64;
        ppo_update(&mut state, &buffer, config, progress)?;
        let last = state.steps + rollout > budget;
        let eval_return =
            if eval.episodes > 0 && (state.updates % eval.interval.max(1) == 0 || last) {
                let r = deterministic_return(
                    env,
                    &state.actor,
                    PolicyHead::Plain,
                    &state.normalizer,
                    eval.episodes,
                    seed,
                    state.updates,
                )?;
                offer_best(&mut best, state.updates, r, &state.actor, &state.normalizer);
                r
            } else {
                f64::NAN
            };
        let (mean_return, best_return) = collector.log.drain();
        let report = TrainReport {
            update: state.updates,
            steps: state.steps,
            mean_return,
            best_return,
            eval_return,
        };
        on_report(&report, &state)?;
        reports.push(report);
    }
    Ok(PpoRun {
        state,
        reports,
        best,
    })
}
