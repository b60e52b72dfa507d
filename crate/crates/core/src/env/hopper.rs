use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{
    continuous, Action, Env, EpisodeSeed, RewardComponents, RewardConfig, StepInfo, StepResult,
};
use crate::error::{Error, Result};
use crate::math;
use crate::nn::ActionSpace;
use crate::rng;

/// Planar one-legged hopper.
///
/// The body is an inverted pendulum of seeded leg length ℓ standing on a
/// point foot. Action 0 is leg thrust: any positive value launches a hop
/// along the body axis while the foot is on the ground. Action 1 is a lean
/// torque. The episode ends when |lean| exceeds `max_lean`, when the body
/// rises above `max_elevation`, or at the step limit.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HopperConfig {
    pub dt: f64,
    pub gravity: f64,
    /// Pendulum instability: lean acceleration per unit sin(lean), scaled by 1/ℓ.
    pub tip_gain: f64,
    pub torque_gain: f64,
    pub angular_damping: f64,
    pub hop_speed: f64,
    pub max_lean: f64,
    /// Lean below which the body counts as upright for the incentive.
    pub upright_lean: f64,
    pub max_elevation: f64,
    /// Whether the incentive is only paid while the foot is on the ground.
    pub incentive_needs_ground: bool,
    /// Seeded leg length (initial standing height) band.
    pub leg_length: (f64, f64),
    pub max_steps: usize,
}

impl Default for HopperConfig {
    fn default() -> Self {
        Self {
            dt: 0.05,
            gravity: 10.0,
            tip_gain: 10.0,
            torque_gain: 30.0,
            angular_damping: 1.0,
            hop_speed: 2.0,
            max_lean: 1.2,
            upright_lean: 0.5,
            max_elevation: 0.6,
            incentive_needs_ground: true,
            leg_length: (0.9, 1.1),
            max_steps: 500,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Hopper {
    config: HopperConfig,
    reward: RewardConfig,
    leg: f64,
    x: f64,
    lean: f64,
    spin: f64,
    elevation: f64,
    climb: f64,
    drift: f64,
    grounded: bool,
    start_head: f64,
    steps: usize,
    done: bool,
}

impl Hopper {
    pub const OBS_DIM: usize = 7;

    pub fn new(config: HopperConfig, reward: RewardConfig) -> Self {
        let leg = 0.5 * (config.leg_length.0 + config.leg_length.1);
        Self {
            config,
            reward,
            leg,
            x: 0.0,
            lean: 0.0,
            spin: 0.0,
            elevation: 0.0,
            climb: 0.0,
            drift: 0.0,
            grounded: true,
            start_head: 0.0,
            steps: 0,
            done: true,
        }
    }

    pub fn config(&self) -> &HopperConfig {
        &self.config
    }

    pub fn reward_config(&self) -> &RewardConfig {
        &self.reward
    }

    /// Standing height plus current elevation.
    pub fn height(&self) -> f64 {
        self.leg + self.elevation
    }

    pub fn lean(&self) -> f64 {
        self.lean
    }

    pub fn is_grounded(&self) -> bool {
        self.grounded
    }

    fn head_x(&self) -> f64 {
        self.x + self.leg * math::sin(self.lean)
    }

    fn upright(&self) -> bool {
        (self.grounded || !self.config.incentive_needs_ground)
            && self.lean.abs() < self.config.upright_lean
    }

    fn observe(&self) -> Vec<f64> {
        vec![
            self.lean,
            self.spin,
            self.elevation,
            self.climb,
            self.drift,
            if self.grounded { 1.0 } else { 0.0 },
            self.leg - 1.0,
        ]
    }

    /// Reward terms for a transition that moved the head by `dx`.
    pub fn reward_components(&self, dx: f64) -> RewardComponents {
        let incentive = if self.reward.incentive_enabled && self.upright() && !self.fallen() {
            self.reward.incentive_per_step
        } else {
            0.0
        };
        RewardComponents::new()
            .with("progress", self.reward.progress_weight * dx)
            .with("incentive", incentive)
    }

    fn fallen(&self) -> bool {
        self.lean.abs() > self.config.max_lean || self.elevation > self.config.max_elevation
    }
}

impl Env for Hopper {
    fn name(&self) -> &'static str {
        "hopper"
    }

    fn observation_dim(&self) -> usize {
        Self::OBS_DIM
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Continuous {
            dim: 2,
            low: -1.0,
            high: 1.0,
        }
    }

    fn max_episode_steps(&self) -> usize {
        self.config.max_steps
    }

    fn reset(&mut self, seed: EpisodeSeed) -> Vec<f64> {
        let mut rng = rng::stream(&[seed, 0x40aa]);
        let (lo, hi) = self.config.leg_length;
        self.leg = lo + (hi - lo) * rng.random::<f64>();
        self.x = 0.0;
        self.lean = 0.0;
        self.spin = 0.0;
        self.elevation = 0.0;
        self.climb = 0.0;
        self.drift = 0.0;
        self.grounded = true;
        self.start_head = self.head_x();
        self.steps = 0;
        self.done = false;
        self.observe()
    }

    fn step(&mut self, action: Action<'_>) -> Result<StepResult> {
        if self.done {
            return Err(Error::StepAfterDone);
        }
        let a = continuous(action, "hopper")?;
        let thrust = a.first().copied().unwrap_or(0.0).clamp(-1.0, 1.0);
        let torque = a.get(1).copied().unwrap_or(0.0).clamp(-1.0, 1.0);
        let c = &self.config;
        let before = self.head_x();

        let accel = c.tip_gain / self.leg * math::sin(self.lean) + c.torque_gain * torque
            - c.angular_damping * self.spin;
        self.spin += c.dt * accel;
        self.lean += c.dt * self.spin;

        if self.grounded && thrust > 0.0 {
            let v = c.hop_speed * thrust;
            self.climb = v * math::cos(self.lean);
            self.drift = v * math::sin(self.lean);
            self.grounded = false;
        }
        if !self.grounded {
            self.x += c.dt * self.drift;
            self.elevation += c.dt * self.climb;
            self.climb -= c.dt * c.gravity;
            if self.elevation <= 0.0 {
                self.elevation = 0.0;
                self.climb = 0.0;
                self.drift = 0.0;
                self.grounded = true;
            }
        }
        self.steps += 1;

        let dx = self.head_x() - before;
        let components = self.reward_components(dx);
        self.done = self.fallen() || self.steps >= self.config.max_steps;
        let head = self.head_x();
        let info = StepInfo {
            position: [head, self.height()],
            displacement: head - self.start_head,
        };
        Ok(StepResult::new(self.observe(), components, self.done, info))
    }

    fn position_bounds(&self) -> ([f64; 2], [f64; 2]) {
        ([-5.0, 0.0], [50.0, 2.0])
    }
}
