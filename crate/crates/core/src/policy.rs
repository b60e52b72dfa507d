//! Acting with a parametrized policy inside an environment.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::env::{Action, Env, EpisodeSeed, StepResult};
use crate::error::{check_len, Error, Result};
use crate::math;
use crate::nn::{self, ActionMode, ActionSpace, MlpSpec, ObsNormalizer, ParamVector, Trace};
use crate::rng;

/// How network outputs map to continuous actions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PolicyHead {
    /// Outputs are action means (or logits), sampled per [`ActionMode`].
    #[default]
    Plain,
    /// Outputs are `[μ, log σ]`; actions are `tanh(μ + σξ)` rescaled to the
    /// bounds, or `tanh(μ)` when deterministic.
    Squashed,
}

/// Bounds on the log-σ output of squashed Gaussian heads.
pub const LOG_STD_RANGE: (f64, f64) = (-20.0, 2.0);

/// Policy network ready to act: borrowed parameters plus scratch buffers.
pub struct PolicyRunner<'a> {
    spec: &'a MlpSpec,
    head: PolicyHead,
    params: &'a [f64],
    space: ActionSpace,
    normalizer: &'a ObsNormalizer,
    trace: Trace,
    normalized: Vec<f64>,
    action: Vec<f64>,
}

impl<'a> PolicyRunner<'a> {
    pub fn new(
        spec: &'a MlpSpec,
        params: &'a [f64],
        space: ActionSpace,
        normalizer: &'a ObsNormalizer,
    ) -> Result<Self> {
        Self::with_head(spec, params, space, normalizer, PolicyHead::Plain)
    }

    pub fn with_head(
        spec: &'a MlpSpec,
        params: &'a [f64],
        space: ActionSpace,
        normalizer: &'a ObsNormalizer,
        head: PolicyHead,
    ) -> Result<Self> {
        check_len("policy parameters", spec.param_count(), params.len())?;
        check_len("normalizer", spec.input_dim(), normalizer.dim())?;
        let expected = match (head, space) {
            (PolicyHead::Squashed, ActionSpace::Continuous { dim, .. }) => 2 * dim,
            (PolicyHead::Squashed, ActionSpace::Discrete { .. }) => {
                return Err(Error::InvalidConfig(
                    "squashed head needs continuous actions".to_string(),
                ))
            }
            (PolicyHead::Plain, space) => space.output_dim(),
        };
        check_len("policy output", expected, spec.output_dim())?;
        Ok(Self {
            spec,
            head,
            params,
            space,
            normalizer,
            trace: Trace::new(spec),
            normalized: vec![0.0; spec.input_dim()],
            action: Vec::with_capacity(spec.output_dim()),
        })
    }

    pub fn from_params(
        params: &'a ParamVector,
        space: ActionSpace,
        normalizer: &'a ObsNormalizer,
    ) -> Result<Self> {
        Self::new(params.spec(), params.values(), space, normalizer)
    }

    /// Normalize `obs`, run the network and pick an action under `mode`.
    pub fn act<R: Rng + ?Sized>(
        &mut self,
        obs: &[f64],
        mode: ActionMode,
        rng: &mut R,
    ) -> Action<'_> {
        self.normalizer.normalize_into(obs, &mut self.normalized);
        let weights = &self.params[..self.spec.weight_count()];
        nn::forward_into(self.spec, weights, &self.normalized, &mut self.trace);
        match self.space {
            ActionSpace::Discrete { .. } => {
                Action::Discrete(nn::select_discrete(self.trace.output(), mode, rng))
            }
            ActionSpace::Continuous { dim, low, high } if self.head == PolicyHead::Squashed => {
                let out = self.trace.output();
                self.action.clear();
                for i in 0..dim {
                    let mut u = out[i];
                    if mode != ActionMode::Deterministic {
                        let log_std = out[dim + i].clamp(LOG_STD_RANGE.0, LOG_STD_RANGE.1);
                        u += math::exp(log_std) * rng::gaussian(rng);
                    }
                    let unit = math::tanh(u);
                    self.action.push(low + 0.5 * (unit + 1.0) * (high - low));
                }
                Action::Continuous(&self.action)
            }
            ActionSpace::Continuous { low, high, .. } => {
                let log_std = &self.params[self.spec.weight_count()..];
                nn::sample_action(
                    self.trace.output(),
                    log_std,
                    mode,
                    Some((low, high)),
                    rng,
                    &mut self.action,
                );
                Action::Continuous(&self.action)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EpisodeStats {
    pub total_reward: f64,
    pub steps: u64,
    pub displacement: f64,
}

/// Run one episode from `seed`. `on_step` sees the observation the action was
/// chosen from and the resulting transition.
pub fn run_episode<R, F>(
    env: &mut dyn Env,
    runner: &mut PolicyRunner<'_>,
    mode: ActionMode,
    seed: EpisodeSeed,
    rng: &mut R,
    mut on_step: F,
) -> Result<EpisodeStats>
where
    R: Rng + ?Sized,
    F: FnMut(&[f64], &StepResult),
{
    let mut obs = env.reset(seed);
    let mut stats = EpisodeStats::default();
    let limit = env.max_episode_steps() as u64;
    loop {
        let action = runner.act(&obs, mode, rng);
        let result = env.step(action)?;
        if !result.reward.is_finite() {
            return Err(Error::NonFinite("reward"));
        }
        stats.total_reward += result.reward;
        stats.steps += 1;
        stats.displacement = result.info.displacement;
        on_step(&obs, &result);
        if result.done || stats.steps >= limit {
            return Ok(stats);
        }
        obs = result.observation;
    }
}

/// Evaluate a policy on explicit episode seeds. Action noise (for
/// non-deterministic modes) is keyed by each episode seed.
pub fn evaluate_policy<F>(
    env: &mut dyn Env,
    runner: &mut PolicyRunner<'_>,
    mode: ActionMode,
    seeds: &[EpisodeSeed],
    mut on_step: F,
) -> Result<Vec<EpisodeStats>>
where
    F: FnMut(usize, &[f64], &StepResult),
{
    seeds
        .iter()
        .enumerate()
        .map(|(i, &seed)| {
            let mut rng = rng::stream(&[seed, rng::tag::ACTION]);
            run_episode(env, runner, mode, seed, &mut rng, |o, r| on_step(i, o, r))
        })
        .collect()
}
