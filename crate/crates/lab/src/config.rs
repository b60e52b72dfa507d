//! Run configuration: defaults per environment plus a line-based
//! `key = value` override file.

use std::fmt;
use std::str::FromStr;

use evorl_core::env::{EnvId, EnvSpec, RewardConfig};
use evorl_core::es::{EsConfig, FitnessMode, SeedMode};
use evorl_core::nn::ActionMode;
use evorl_core::offpolicy::RlCommonConfig;
use evorl_core::ppo::{LrSchedule, PpoConfig};
use evorl_core::rl::EvalProtocol;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algo {
    Es,
    EsSuperSym,
    Ppo,
    Td3,
    Sac,
}

impl Algo {
    pub const ALL: [Algo; 5] = [Algo::Es, Algo::EsSuperSym, Algo::Ppo, Algo::Td3, Algo::Sac];

    pub fn as_str(&self) -> &'static str {
        match self {
            Algo::Es => "es",
            Algo::EsSuperSym => "es-supersym",
            Algo::Ppo => "ppo",
            Algo::Td3 => "td3",
            Algo::Sac => "sac",
        }
    }

    pub fn is_es(&self) -> bool {
        matches!(self, Algo::Es | Algo::EsSuperSym)
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algo {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        Algo::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| LabError::Invalid(format!("unknown algorithm `{s}`")))
    }
}

/// How the agents that get post-evaluated are picked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BestSelection {
    /// The best agent of every replication.
    PerReplication,
    /// The top agents across all replications, as many as there are
    /// replications.
    GlobalTop,
}

/// Every tunable of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub replications: usize,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
    pub es: EsConfig,
    pub es_hidden: Vec<usize>,
    pub es_action: ActionMode,
    pub ppo: PpoConfig,
    pub offpolicy: RlCommonConfig,
    pub eval: EvalProtocol,
    pub posteval_episodes: usize,
    pub posteval_stochastic: bool,
    pub selection: BestSelection,
    pub reward: RewardConfig,
}

impl RunConfig {
    /// Defaults for `env`. PPO rollout and minibatch sizes follow the task
    /// family; networks are desk-sized.
    pub fn for_env(env: EnvId) -> Self {
        let mut ppo = PpoConfig {
            hidden: vec![32, 32],
            ..PpoConfig::default()
        };
        let (rollout, minibatch) = match env {
            EnvId::Hopper | EnvId::Slime | EnvId::SlimeSym => (2048, 64),
            EnvId::Paddle => (128, 32),
            EnvId::SparseGoal => (512, 128),
        };
        ppo.rollout_steps = rollout;
        ppo.minibatch_size = minibatch;
        if env == EnvId::Paddle {
            ppo.entropy_coef = 0.01;
        }
        Self {
            replications: 10,
            workers: 1,
            es: EsConfig::default(),
            es_hidden: vec![64],
            es_action: ActionMode::Deterministic,
            ppo,
            offpolicy: RlCommonConfig::default(),
            eval: EvalProtocol {
                episodes: 2,
                interval: 5,
            },
            posteval_episodes: 5,
            posteval_stochastic: false,
            selection: BestSelection::PerReplication,
            reward: RewardConfig::default(),
        }
    }

    /// Environment spec for `env` with this config's reward settings and
    /// the incentive switched as requested.
    pub fn env_spec(&self, env: EnvId, incentive: bool) -> EnvSpec {
        EnvSpec::new(env).with_reward(RewardConfig {
            incentive_enabled: incentive,
            ..self.reward
        })
    }

    /// Apply `key = value` lines on top of the current values. `#` starts a
    /// comment; unknown or repeated keys are errors.
    pub fn apply(&mut self, text: &str) -> Result<()> {
        let mut seen = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| LabError::Config {
                line: line_no,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if seen.contains(&key) {
                return Err(err(format!("`{key}` is set twice")));
            }
            seen.push(key);
            self.set(key, value).map_err(err)?;
        }
        self.validate()
    }

    pub fn parse(env: EnvId, text: &str) -> Result<Self> {
        let mut config = Self::for_env(env);
        config.apply(text)?;
        Ok(config)
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let es = &mut self.es;
        let ppo = &mut self.ppo;
        let off = &mut self.offpolicy;
        match key {
            "replications" => self.replications = num(value)?,
            "workers" => self.workers = num(value)?,
            "es.sigma" => es.sigma = num(value)?,
            "es.step_size" => es.step_size = num(value)?,
            "es.pop_pairs" => es.pop_pairs = num(value)?,
            "es.episodes_per_eval" => es.episodes_per_eval = num(value)?,
            "es.weight_decay" => es.weight_decay = num(value)?,
            "es.center_eval_episodes" => es.center_eval_episodes = num(value)?,
            "es.obs_subsample" => es.obs_subsample = num(value)?,
            "es.beta1" => es.beta1 = num(value)?,
            "es.beta2" => es.beta2 = num(value)?,
            "es.adam_epsilon" => es.adam_epsilon = num(value)?,
            "es.fitness" => {
                es.fitness_mode = match value {
                    "centered_rank" => FitnessMode::CenteredRank,
                    "raw_paired_difference" => FitnessMode::RawPairedDifference,
                    _ => return Err(format!(
                        "es.fitness must be centered_rank or raw_paired_difference, got `{value}`"
                    )),
                }
            }
            "es.seed_mode" => {
                es.seed_mode = match value {
                    "independent" => SeedMode::Independent,
                    "super_symmetric" => SeedMode::SuperSymmetric,
                    _ => {
                        return Err(format!(
                            "es.seed_mode must be independent or super_symmetric, got `{value}`"
                        ))
                    }
                }
            }
            "es.hidden" => self.es_hidden = list(value)?,
            "es.action" => {
                self.es_action = match value {
                    "deterministic" => ActionMode::Deterministic,
                    "fixed_noise" => ActionMode::FixedNoise { sigma: 0.01 },
                    "parametric" => ActionMode::ParametricGaussian { initial_sigma: 1.0 },
                    _ => return Err(format!(
                        "es.action must be deterministic, fixed_noise or parametric, got `{value}`"
                    )),
                }
            }
            "es.action_sigma" => {
                let s = num(value)?;
                self.es_action = match self.es_action {
                    ActionMode::FixedNoise { .. } => ActionMode::FixedNoise { sigma: s },
                    ActionMode::ParametricGaussian { .. } => {
                        ActionMode::ParametricGaussian { initial_sigma: s }
                    }
                    ActionMode::Deterministic => {
                        return Err(
                            "es.action_sigma needs es.action set earlier to a noisy mode".into(),
                        )
                    }
                }
            }
            "ppo.clip" => ppo.clip = num(value)?,
            "ppo.value_clip" => ppo.value_clip = num(value)?,
            "ppo.entropy_coef" => ppo.entropy_coef = num(value)?,
            "ppo.rollout_steps" => ppo.rollout_steps = num(value)?,
            "ppo.minibatch_size" => ppo.minibatch_size = num(value)?,
            "ppo.epochs" => ppo.epochs = num(value)?,
            "ppo.gamma" => ppo.gamma = num(value)?,
            "ppo.lambda" => ppo.lambda = num(value)?,
            "ppo.lr" => ppo.lr = LrSchedule::Constant(num(value)?),
            "ppo.lr_linear" => {
                let ends: Vec<f64> = list(value)?;
                if ends.len() != 2 {
                    return Err("ppo.lr_linear takes `start, end`".into());
                }
                ppo.lr = LrSchedule::Linear {
                    start: ends[0],
                    end: ends[1],
                };
            }
            "ppo.normalize_advantages" => ppo.normalize_advantages = flag(value)?,
            "ppo.max_grad_norm" => ppo.max_grad_norm = Some(num(value)?),
            "ppo.hidden" => ppo.hidden = list(value)?,
            "ppo.initial_log_std" => ppo.initial_log_std = num(value)?,
            "offpolicy.gamma" => off.gamma = num(value)?,
            "offpolicy.tau" => off.tau = num(value)?,
            "offpolicy.batch_size" => off.batch_size = num(value)?,
            "offpolicy.target_noise" => off.target_noise = num(value)?,
            "offpolicy.target_noise_clip" => off.target_noise_clip = num(value)?,
            "offpolicy.policy_delay" => off.policy_delay = num(value)?,
            "offpolicy.warmup_steps" => off.warmup_steps = num(value)?,
            "offpolicy.learning_rate" => off.learning_rate = num(value)?,
            "offpolicy.exploration_noise" => off.exploration_noise = num(value)?,
            "offpolicy.buffer_capacity" => off.buffer_capacity = num(value)?,
            "offpolicy.hidden" => off.hidden = list(value)?,
            "offpolicy.alpha" => off.alpha = num(value)?,
            "offpolicy.report_interval" => off.report_interval = num(value)?,
            "eval.episodes" => self.eval.episodes = num(value)?,
            "eval.interval" => self.eval.interval = num(value)?,
            "posteval.episodes" => self.posteval_episodes = num(value)?,
            "posteval.stochastic" => self.posteval_stochastic = flag(value)?,
            "posteval.selection" => {
                self.selection = match value {
                    "per_replication" => BestSelection::PerReplication,
                    "global_top" => BestSelection::GlobalTop,
                    _ => return Err(format!(
                        "posteval.selection must be per_replication or global_top, got `{value}`"
                    )),
                }
            }
            "reward.incentive_per_step" => self.reward.incentive_per_step = num(value)?,
            "reward.progress_weight" => self.reward.progress_weight = num(value)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(LabError::Invalid("replications must be at least 1".into()));
        }
        if self.posteval_episodes == 0 {
            return Err(LabError::Invalid(
                "posteval.episodes must be at least 1".into(),
            ));
        }
        self.es.validate()?;
        self.es_action.validate()?;
        self.ppo.validate()?;
        self.offpolicy.validate()?;
        self.reward.validate()?;
        Ok(())
    }
}

fn num<T: FromStr>(value: &str) -> std::result::Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("cannot parse `{value}` as a number"))
}

fn list<T: FromStr>(value: &str) -> std::result::Result<Vec<T>, String> {
    value.split(',').map(|v| num(v.trim())).collect()
}

fn flag(value: &str) -> std::result::Result<bool, String> {
    match value {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(format!("expected a boolean, got `{value}`")),
    }
}
