//! Deterministic, seed-controlled environments.
//!
//! Every environment is a pure function of its episode seed and the action
//! sequence: replaying both reproduces the `StepResult` stream bit-for-bit.

mod hopper;
mod paddle;
mod sparse_goal;
mod volley;

use alloc::boxed::Box;
use alloc::string::ToString;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

pub use hopper::{Hopper, HopperConfig};
pub use paddle::{Paddle, PaddleConfig};
pub use sparse_goal::{SparseGoal, SparseGoalConfig};
pub use volley::{Opponent, Serve, ServeMode, Volley, VolleyConfig};

use crate::error::{Error, Result};
use crate::nn::ActionSpace;
use crate::rng;

/// 64-bit value driving all randomness of one episode.
pub type EpisodeSeed = u64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Action<'a> {
    Continuous(&'a [f64]),
    Discrete(usize),
}

/// Named reward terms; the step reward is their sum.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RewardComponents(Vec<(&'static str, f64)>);

impl RewardComponents {
    pub fn new() -> Self {
        Self(Vec::new())
    }

    pub fn with(mut self, name: &'static str, value: f64) -> Self {
        self.add(name, value);
        self
    }

    pub fn add(&mut self, name: &'static str, value: f64) {
        if let Some(entry) = self.0.iter_mut().find(|(n, _)| *n == name) {
            entry.1 += value;
        } else {
            self.0.push((name, value));
        }
    }

    pub fn get(&self, name: &str) -> f64 {
        self.0
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, v)| *v)
            .unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.0.iter().map(|(_, v)| v).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, f64)> + '_ {
        self.0.iter().copied()
    }
}

/// Behavioral side information attached to every step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepInfo {
    /// Agent location used by occupancy heatmaps.
    pub position: [f64; 2],
    /// Progress along the task axis since reset.
    pub displacement: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub components: RewardComponents,
    pub done: bool,
    pub info: StepInfo,
}

impl StepResult {
    pub(crate) fn new(
        observation: Vec<f64>,
        components: RewardComponents,
        done: bool,
        info: StepInfo,
    ) -> Self {
        Self {
            observation,
            reward: components.total(),
            components,
            done,
            info,
        }
    }
}

/// Reward shaping toggle: task progress plus an optional upright incentive.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RewardConfig {
    pub incentive_enabled: bool,
    pub incentive_per_step: f64,
    pub progress_weight: f64,
}

impl RewardConfig {
    pub const DEFAULT_INCENTIVE: f64 = 0.05;

    pub fn with_incentive(enabled: bool) -> Self {
        Self {
            incentive_enabled: enabled,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.incentive_per_step >= 0.0) || !self.progress_weight.is_finite() {
            return Err(Error::InvalidConfig(
                "incentive_per_step must be >= 0 and progress_weight finite".to_string(),
            ));
        }
        Ok(())
    }
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            incentive_enabled: true,
            incentive_per_step: Self::DEFAULT_INCENTIVE,
            progress_weight: 1.0,
        }
    }
}

pub trait Env: Send {
    fn name(&self) -> &'static str;
    fn observation_dim(&self) -> usize;
    fn action_space(&self) -> ActionSpace;
    fn max_episode_steps(&self) -> usize;

    /// Start a new episode; the initial state is a pure function of `seed`.
    fn reset(&mut self, seed: EpisodeSeed) -> Vec<f64>;

    /// Advance one fixed timestep. Out-of-range actions are clamped.
    fn step(&mut self, action: Action<'_>) -> Result<StepResult>;

    /// Episode seeds for an evaluation of `n` episodes keyed by `base`.
    fn episode_seeds(&self, base: u64, n: usize) -> Vec<EpisodeSeed> {
        independent_seeds(base, n)
    }

    fn mirror_seed(&self, _seed: EpisodeSeed) -> Result<EpisodeSeed> {
        Err(Error::Unsupported {
            operation: "mirror_seed",
            env: self.name(),
        })
    }

    /// Lower and upper corners of the region `StepInfo::position` lives in.
    fn position_bounds(&self) -> ([f64; 2], [f64; 2]);
}

pub fn independent_seeds(base: u64, n: usize) -> Vec<EpisodeSeed> {
    (0..n as u64)
        .map(|i| rng::derive(&[base, rng::tag::EPISODE, i]))
        .collect()
}

pub(crate) fn continuous<'a>(action: Action<'a>, env: &'static str) -> Result<&'a [f64]> {
    match action {
        Action::Continuous(a) => Ok(a),
        Action::Discrete(_) => Err(Error::Unsupported {
            operation: "discrete action",
            env,
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum EnvId {
    Slime,
    SlimeSym,
    Paddle,
    Hopper,
    SparseGoal,
}

impl EnvId {
    pub const ALL: [EnvId; 5] = [
        EnvId::Slime,
        EnvId::SlimeSym,
        EnvId::Paddle,
        EnvId::Hopper,
        EnvId::SparseGoal,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EnvId::Slime => "slime",
            EnvId::SlimeSym => "slime-sym",
            EnvId::Paddle => "paddle",
            EnvId::Hopper => "hopper",
            EnvId::SparseGoal => "sparsegoal",
        }
    }
}

impl fmt::Display for EnvId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EnvId::ALL
            .iter()
            .copied()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(alloc::format!("unknown environment `{s}`")))
    }
}

/// Everything needed to build a fresh environment instance.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EnvSpec {
    pub id: EnvId,
    pub reward: RewardConfig,
    pub hopper: HopperConfig,
    pub paddle: PaddleConfig,
    /// Serve mode is taken from `id`.
    pub volley: VolleyConfig,
    pub sparse_goal: SparseGoalConfig,
}

impl EnvSpec {
    pub fn new(id: EnvId) -> Self {
        Self {
            id,
            reward: RewardConfig::default(),
            hopper: HopperConfig::default(),
            paddle: PaddleConfig::default(),
            volley: VolleyConfig::default(),
            sparse_goal: SparseGoalConfig::default(),
        }
    }

    pub fn with_reward(mut self, reward: RewardConfig) -> Self {
        self.reward = reward;
        self
    }

    pub fn build(&self) -> Box<dyn Env> {
        match self.id {
            EnvId::Slime => Box::new(Volley::new(VolleyConfig {
                serve_mode: ServeMode::Random,
                ..self.volley
            })),
            EnvId::SlimeSym => Box::new(Volley::new(VolleyConfig {
                serve_mode: ServeMode::MirroredPairs,
                ..self.volley
            })),
            EnvId::Paddle => Box::new(Paddle::new(self.paddle)),
            EnvId::Hopper => Box::new(Hopper::new(self.hopper, self.reward)),
            EnvId::SparseGoal => Box::new(SparseGoal::new(self.sparse_goal)),
        }
    }
}
