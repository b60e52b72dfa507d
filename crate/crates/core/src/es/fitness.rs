use alloc::vec::Vec;

use rand::Rng;

use crate::env::EnvSpec;
use crate::error::{Error, Result};
use crate::nn::{ActionMode, ActionSpace, MlpSpec, ObsNormalizer};
use crate::policy::{run_episode, PolicyRunner};
use crate::rng::{self, tag};

/// One evaluation job handed to a [`Fitness`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalRequest {
    /// Episode seed controlling environmental conditions.
    pub seed: u64,
    /// Unique key for randomness private to this candidate (action noise,
    /// observation subsampling).
    pub key: u64,
    /// Fraction of visited observations to return for normalizer updates.
    pub subsample: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Evaluation {
    pub fitness: f64,
    pub steps: u64,
    pub observations: Vec<Vec<f64>>,
}

/// Black-box objective maximized by evolution strategies.
pub trait Fitness: Sync {
    fn dim(&self) -> usize;

    /// Observation width for the normalizer (0 when not applicable).
    fn observation_dim(&self) -> usize {
        0
    }

    /// Upper bound on the steps charged for one evaluation.
    fn max_steps(&self) -> u64;

    fn evaluate(
        &self,
        params: &[f64],
        normalizer: &ObsNormalizer,
        request: &EvalRequest,
    ) -> Result<Evaluation>;
}

/// `−‖θ − θ*‖²` plus optional additive Gaussian noise keyed by the episode
/// seed. Each evaluation costs one step.
#[derive(Debug, Clone, PartialEq)]
pub struct Sphere {
    pub target: Vec<f64>,
    pub noise_std: f64,
}

impl Sphere {
    pub fn new(target: Vec<f64>) -> Self {
        Self {
            target,
            noise_std: 0.0,
        }
    }

    pub fn with_noise(mut self, noise_std: f64) -> Self {
        self.noise_std = noise_std;
        self
    }

    pub fn value(&self, params: &[f64]) -> f64 {
        -params
            .iter()
            .zip(&self.target)
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
    }

    /// Seed-dependent offset shared by every candidate evaluated on `seed`.
    pub fn seed_noise(&self, seed: u64) -> f64 {
        if self.noise_std == 0.0 {
            return 0.0;
        }
        self.noise_std * rng::gaussian(&mut rng::stream(&[seed, tag::EPISODE]))
    }
}

impl Fitness for Sphere {
    fn dim(&self) -> usize {
        self.target.len()
    }

    fn max_steps(&self) -> u64 {
        1
    }

    fn evaluate(
        &self,
        params: &[f64],
        _: &ObsNormalizer,
        request: &EvalRequest,
    ) -> Result<Evaluation> {
        Ok(Evaluation {
            fitness: self.value(params) + self.seed_noise(request.seed),
            steps: 1,
            observations: Vec::new(),
        })
    }
}

/// Mean episode return of a neural policy in an environment.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvFitness {
    pub env: EnvSpec,
    pub policy: MlpSpec,
    pub mode: ActionMode,
    pub episodes: usize,
    space: ActionSpace,
    obs_dim: usize,
    max_episode_steps: u64,
}

impl EnvFitness {
    pub fn new(env: EnvSpec, policy: MlpSpec, mode: ActionMode, episodes: usize) -> Result<Self> {
        mode.validate()?;
        let probe = env.build();
        let space = probe.action_space();
        crate::error::check_len("policy input", probe.observation_dim(), policy.input_dim())?;
        crate::error::check_len("policy output", space.output_dim(), policy.output_dim())?;
        if mode.is_parametric() != policy.has_log_std_head() {
            return Err(Error::InvalidConfig(
                "parametric action mode requires a log-std head (and only then)".into(),
            ));
        }
        if episodes == 0 {
            return Err(Error::InvalidConfig("episodes must be at least 1".into()));
        }
        Ok(Self {
            env,
            policy,
            mode,
            episodes,
            space,
            obs_dim: probe.observation_dim(),
            max_episode_steps: probe.max_episode_steps() as u64,
        })
    }

    pub fn action_space(&self) -> ActionSpace {
        self.space
    }

    pub fn with_episodes(&self, episodes: usize) -> Self {
        Self {
            episodes: episodes.max(1),
            ..self.clone()
        }
    }
}

impl Fitness for EnvFitness {
    fn dim(&self) -> usize {
        self.policy.param_count()
    }

    fn observation_dim(&self) -> usize {
        self.obs_dim
    }

    fn max_steps(&self) -> u64 {
        self.max_episode_steps * self.episodes as u64
    }

    fn evaluate(
        &self,
        params: &[f64],
        normalizer: &ObsNormalizer,
        request: &EvalRequest,
    ) -> Result<Evaluation> {
        let mut env = self.env.build();
        let mut runner = PolicyRunner::new(&self.policy, params, self.space, normalizer)?;
        let seeds = env.episode_seeds(request.seed, self.episodes);
        let mut pick = rng::stream(&[request.key, tag::SUBSAMPLE]);
        let mut observations = Vec::new();
        let mut total = 0.0;
        let mut steps = 0;
        for (i, &seed) in seeds.iter().enumerate() {
            let mut noise = rng::stream(&[request.key, tag::ACTION, i as u64]);
            let stats = run_episode(
                &mut *env,
                &mut runner,
                self.mode,
                seed,
                &mut noise,
                |obs, _| {
                    if request.subsample > 0.0 && pick.random::<f64>() < request.subsample {
                        observations.push(obs.to_vec());
                    }
                },
            )?;
            total += stats.total_reward;
            steps += stats.steps;
        }
        Ok(Evaluation {
            fitness: total / self.episodes as f64,
            steps,
            observations,
        })
    }
}
