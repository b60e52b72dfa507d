use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use super::td3::td3_sync_targets;
use super::{
    critic_update, sac_update, td3_actor_update, td3_targets, ReplayBuffer, RlCommonConfig,
    SacState, Td3State, Transition,
};
use crate::env::{Action, EnvSpec};
use crate::error::{Error, Result};
use crate::nn::{self, ActionSpace, ParamVector};
use crate::policy::PolicyHead;
use crate::rl::{
    deterministic_return, offer_best, BestPolicy, EpisodeLog, EvalProtocol, TrainReport,
};
use crate::rng::{self, tag};

#[derive(Debug, Clone, PartialEq)]
pub struct OffPolicyRun<S> {
    pub state: S,
    pub reports: Vec<TrainReport>,
    pub best: Option<BestPolicy>,
}

/// What the shared loop needs from an algorithm.
trait Learner {
    fn actor(&self) -> &ParamVector;
    fn normalizer(&self) -> &crate::nn::ObsNormalizer;
    fn head(&self) -> PolicyHead;
    /// Behavior action in tanh units.
    fn behave<R: Rng + ?Sized>(
        &self,
        obs: &[f64],
        config: &RlCommonConfig,
        rng: &mut R,
    ) -> Result<Vec<f64>>;
    fn learn<R: Rng + ?Sized>(
        &mut self,
        buffer: &ReplayBuffer,
        config: &RlCommonConfig,
        rng: &mut R,
    ) -> Result<()>;
}

impl Learner for Td3State {
    fn actor(&self) -> &ParamVector {
        &self.actor
    }

    fn normalizer(&self) -> &crate::nn::ObsNormalizer {
        &self.normalizer
    }

    fn head(&self) -> PolicyHead {
        PolicyHead::Plain
    }

    fn behave<R: Rng + ?Sized>(
        &self,
        obs: &[f64],
        config: &RlCommonConfig,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let mean = nn::forward(&self.actor, obs)?;
        Ok(mean
            .iter()
            .map(|m| (m + config.exploration_noise * rng::gaussian(rng)).clamp(-1.0, 1.0))
            .collect())
    }

    fn learn<R: Rng + ?Sized>(
        &mut self,
        buffer: &ReplayBuffer,
        config: &RlCommonConfig,
        rng: &mut R,
    ) -> Result<()> {
        let batch = buffer.sample(config.batch_size, rng)?;
        let targets = td3_targets(
            self,
            &batch,
            config.gamma,
            config.target_noise,
            config.target_noise_clip,
            rng,
        )?;
        let [c0, c1] = &mut self.critics;
        let [a0, a1] = &mut self.critic_adams;
        critic_update([c0, c1], [a0, a1], &batch, &targets, config.learning_rate)?;
        self.critic_updates += 1;
        if self.critic_updates.is_multiple_of(config.policy_delay) {
            td3_actor_update(self, &batch, config.learning_rate)?;
            td3_sync_targets(self, config.tau);
        }
        Ok(())
    }
}

impl Learner for SacState {
    fn actor(&self) -> &ParamVector {
        &self.actor
    }

    fn normalizer(&self) -> &crate::nn::ObsNormalizer {
        &self.normalizer
    }

    fn head(&self) -> PolicyHead {
        PolicyHead::Squashed
    }

    fn behave<R: Rng + ?Sized>(
        &self,
        obs: &[f64],
        _: &RlCommonConfig,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let out = nn::forward(&self.actor, obs)?;
        let dim = out.len() / 2;
        let xi: Vec<f64> = (0..dim).map(|_| rng::gaussian(rng)).collect();
        Ok(super::squashed_log_prob(&out[..dim], &out[dim..], &xi).0)
    }

    fn learn<R: Rng + ?Sized>(
        &mut self,
        buffer: &ReplayBuffer,
        config: &RlCommonConfig,
        rng: &mut R,
    ) -> Result<()> {
        let batch = buffer.sample(config.batch_size, rng)?;
        sac_update(self, &batch, config, rng)?;
        Ok(())
    }
}

fn run<S: Learner + Clone, C>(
    mut state: S,
    config: &RlCommonConfig,
    env: &EnvSpec,
    seed: u64,
    budget: u64,
    eval: EvalProtocol,
    mut on_report: C,
) -> Result<OffPolicyRun<S>>
where
    C: FnMut(&TrainReport, &S) -> Result<()>,
{
    let mut instance = env.build();
    let (low, high) = match instance.action_space() {
        ActionSpace::Continuous { low, high, .. } => (low, high),
        ActionSpace::Discrete { .. } => {
            return Err(Error::Unsupported {
                operation: "off-policy learning with discrete actions",
                env: instance.name(),
            })
        }
    };
    let dim = instance.action_space().output_dim();
    let mut rng = rng::stream(&[seed, tag::REPLAY]);
    let mut buffer = ReplayBuffer::new(config.buffer_capacity);
    let mut log = EpisodeLog::default();
    let mut reports = Vec::new();
    let mut best = None;
    let mut episode = 0u64;
    let mut obs = instance.reset(rng::derive(&[seed, tag::EPISODE, episode]));
    let mut episode_return = 0.0;
    let mut episode_steps = 0usize;
    let limit = instance.max_episode_steps();
    let mut env_action = Vec::with_capacity(dim);
    let budget = budget - budget % config.report_interval;
    for step in 0..budget {
        let unit = if step < config.warmup_steps {
            (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect()
        } else {
            state.behave(&obs, config, &mut rng)?
        };
        env_action.clear();
        env_action.extend(unit.iter().map(|u| low + 0.5 * (u + 1.0) * (high - low)));
        let result = instance
            .step(Action::Continuous(&env_action))
            .map_err(|e| Error::Rollout {
                step,
                message: format!("{e}"),
            })?;
        episode_steps += 1;
        episode_return += result.reward;
        let done = result.done || episode_steps >= limit;
        buffer.push(Transition {
            obs: core::mem::take(&mut obs),
            action: unit,
            reward: result.reward,
            next_obs: result.observation.clone(),
            done,
        });
        obs = result.observation;
        if done {
            log.push(episode_return);
            episode += 1;
            episode_return = 0.0;
            episode_steps = 0;
            obs = instance.reset(rng::derive(&[seed, tag::EPISODE, episode]));
        }
        if step + 1 >= config.warmup_steps
            && buffer.len() >= config.batch_size.min(buffer.capacity())
        {
            state.learn(&buffer, config, &mut rng)?;
        }
        if (step + 1) % config.report_interval == 0 {
            let update = (step + 1) / config.report_interval;
            let eval_return = if eval.episodes > 0
                && (update.is_multiple_of(eval.interval.max(1)) || step + 1 == budget)
            {
                let r = deterministic_return(
                    env,
                    state.actor(),
                    state.head(),
                    state.normalizer(),
                    eval.episodes,
                    seed,
                    update,
                )?;
                offer_best(&mut best, update, r, state.actor(), state.normalizer());
                r
            } else {
                f64::NAN
            };
            let (mean_return, best_return) = log.drain();
            let report = TrainReport {
                update,
                steps: step + 1,
                mean_return,
                best_return,
                eval_return,
            };
            on_report(&report, &state)?;
            reports.push(report);
        }
    }
    Ok(OffPolicyRun {
        state,
        reports,
        best,
    })
}

pub fn train_td3<C>(
    config: &RlCommonConfig,
    env: &EnvSpec,
    seed: u64,
    budget: u64,
    eval: EvalProtocol,
    on_report: C,
) -> Result<OffPolicyRun<Td3State>>
where
    C: FnMut(&TrainReport, &Td3State) -> Result<()>,
{
    config.validate()?;
    let probe = env.build();
    let state = Td3State::new(
        probe.observation_dim(),
        probe.action_space().output_dim(),
        config,
        seed,
    )?;
    run(state, config, env, seed, budget, eval, on_report)
}

pub fn train_sac<C>(
    config: &RlCommonConfig,
    env: &EnvSpec,
    seed: u64,
    budget: u64,
    eval: EvalProtocol,
    on_report: C,
) -> Result<OffPolicyRun<SacState>>
where
    C: FnMut(&TrainReport, &SacState) -> Result<()>,
{
    config.validate()?;
    let probe = env.build();
    let state = SacState::new(
        probe.observation_dim(),
        probe.action_space().output_dim(),
        config,
        seed,
    )?;
    run(state, config, env, seed, budget, eval, on_report)
}
