use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{Action, Env, EpisodeSeed, RewardComponents, StepInfo, StepResult};
use crate::error::{Error, Result};
use crate::math;
use crate::nn::ActionSpace;
use crate::rng::{self, Stream};

/// Paddle-intercept game on the unit square.
///
/// Balls fall from the top edge and bounce off the side walls; the paddle
/// slides along the bottom edge (left / stay / right) and scores one point
/// per ball it intercepts. A fixed fraction of balls drop straight down at
/// `hot_x`, so parking the paddle there already earns a large share of the
/// attainable score.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PaddleConfig {
    pub paddle_half_width: f64,
    pub paddle_speed: f64,
    pub ball_speed: f64,
    /// Maximum launch angle from vertical for scattered balls, radians.
    pub max_angle: f64,
    pub hot_x: f64,
    pub hot_fraction: f64,
    pub max_steps: usize,
}

impl Default for PaddleConfig {
    fn default() -> Self {
        Self {
            paddle_half_width: 0.06,
            paddle_speed: 0.012,
            ball_speed: 0.025,
            max_angle: 1.0,
            hot_x: 0.3,
            hot_fraction: 0.6,
            max_steps: 1000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Paddle {
    config: PaddleConfig,
    rng: Stream,
    paddle: f64,
    ball: [f64; 2],
    vel: [f64; 2],
    launched: u64,
    caught: u64,
    steps: usize,
    done: bool,
}

impl Paddle {
    pub const OBS_DIM: usize = 5;

    pub fn new(config: PaddleConfig) -> Self {
        Self {
            config,
            rng: rng::stream(&[0]),
            paddle: 0.5,
            ball: [0.5, 1.0],
            vel: [0.0, -1.0],
            launched: 0,
            caught: 0,
            steps: 0,
            done: true,
        }
    }

    pub fn config(&self) -> &PaddleConfig {
        &self.config
    }

    pub fn paddle_x(&self) -> f64 {
        self.paddle
    }

    pub fn ball(&self) -> ([f64; 2], [f64; 2]) {
        (self.ball, self.vel)
    }

    /// Overwrite the ball state (for scripted scenarios and tests).
    pub fn set_ball(&mut self, pos: [f64; 2], vel: [f64; 2]) {
        self.ball = pos;
        self.vel = vel;
    }

    pub fn balls_launched(&self) -> u64 {
        self.launched
    }

    pub fn balls_caught(&self) -> u64 {
        self.caught
    }

    fn launch(&mut self) {
        let c = &self.config;
        let s = c.ball_speed;
        if self.rng.random::<f64>() < c.hot_fraction {
            self.ball = [c.hot_x, 1.0];
            self.vel = [0.0, -s];
        } else {
            let x = self.rng.random::<f64>();
            let angle = c.max_angle * (2.0 * self.rng.random::<f64>() - 1.0);
            self.ball = [x, 1.0];
            self.vel = [s * math::sin(angle), -s * math::cos(angle)];
        }
        self.launched += 1;
    }

    /// Move the ball one step, reflecting off the side walls.
    pub fn advance_ball(&mut self) {
        self.ball[0] += self.vel[0];
        self.ball[1] += self.vel[1];
        if self.ball[0] < 0.0 {
            self.ball[0] = -self.ball[0];
            self.vel[0] = -self.vel[0];
        } else if self.ball[0] > 1.0 {
            self.ball[0] = 2.0 - self.ball[0];
            self.vel[0] = -self.vel[0];
        }
    }

    fn observe(&self) -> Vec<f64> {
        let s = self.config.ball_speed;
        vec![
            self.paddle - 0.5,
            self.ball[0] - 0.5,
            self.ball[1] - 0.5,
            self.vel[0] / s,
            self.vel[1] / s,
        ]
    }
}

impl Env for Paddle {
    fn name(&self) -> &'static str {
        "paddle"
    }

    fn observation_dim(&self) -> usize {
        Self::OBS_DIM
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Discrete { n: 3 }
    }

    fn max_episode_steps(&self) -> usize {
        self.config.max_steps
    }

    fn reset(&mut self, seed: EpisodeSeed) -> Vec<f64> {
        self.rng = rng::stream(&[seed, 0x9add]);
        self.paddle = self.rng.random::<f64>();
        self.launched = 0;
        self.caught = 0;
        self.steps = 0;
        self.done = false;
        self.launch();
        self.observe()
    }

    fn step(&mut self, action: Action<'_>) -> Result<StepResult> {
        if self.done {
            return Err(Error::StepAfterDone);
        }
        let direction = match action {
            Action::Discrete(i) => i.min(2) as f64 - 1.0,
            Action::Continuous(a) => a.first().copied().unwrap_or(0.0).clamp(-1.0, 1.0),
        };
        self.paddle = (self.paddle + direction * self.config.paddle_speed).clamp(0.0, 1.0);
        self.advance_ball();
        let mut score = 0.0;
        if self.ball[1] <= 0.0 {
            if (self.ball[0] - self.paddle).abs() <= self.config.paddle_half_width {
                score = 1.0;
                self.caught += 1;
            }
            self.launch();
        }
        self.steps += 1;
        self.done = self.steps >= self.config.max_steps;
        let info = StepInfo {
            position: [self.paddle, 0.0],
            displacement: 0.0,
        };
        let components = RewardComponents::new().with("score", score);
        Ok(StepResult::new(self.observe(), components, self.done, info))
    }

    fn position_bounds(&self) -> ([f64; 2], [f64; 2]) {
        ([0.0, 0.0], [1.0, 1.0])
    }
}
