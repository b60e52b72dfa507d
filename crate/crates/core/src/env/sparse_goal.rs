use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{continuous, Action, Env, EpisodeSeed, RewardComponents, StepInfo, StepResult};
use crate::error::{Error, Result};
use crate::math;
use crate::nn::ActionSpace;
use crate::rng;

/// Point agent that must reach a seeded goal. Reward is 0 on every step
/// until the agent enters the goal radius, then 1 and the episode ends.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SparseGoalConfig {
    pub speed: f64,
    pub goal_radius: f64,
    pub goal_distance: (f64, f64),
    pub max_steps: usize,
}

impl Default for SparseGoalConfig {
    fn default() -> Self {
        Self {
            speed: 0.05,
            goal_radius: 0.1,
            goal_distance: (0.5, 0.9),
            max_steps: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SparseGoal {
    config: SparseGoalConfig,
    pos: [f64; 2],
    goal: [f64; 2],
    steps: usize,
    done: bool,
}

impl SparseGoal {
    pub const OBS_DIM: usize = 4;

    pub fn new(config: SparseGoalConfig) -> Self {
        Self {
            config,
            pos: [0.0; 2],
            goal: [0.5, 0.0],
            steps: 0,
            done: true,
        }
    }

    pub fn goal(&self) -> [f64; 2] {
        self.goal
    }

    fn observe(&self) -> Vec<f64> {
        vec![
            self.pos[0],
            self.pos[1],
            self.goal[0] - self.pos[0],
            self.goal[1] - self.pos[1],
        ]
    }
}

impl Env for SparseGoal {
    fn name(&self) -> &'static str {
        "sparsegoal"
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
        let mut rng = rng::stream(&[seed, 0x90a1]);
        let angle = 2.0 * core::f64::consts::PI * rng.random::<f64>();
        let (lo, hi) = self.config.goal_distance;
        let dist = lo + (hi - lo) * rng.random::<f64>();
        self.pos = [0.0, 0.0];
        self.goal = [dist * math::cos(angle), dist * math::sin(angle)];
        self.steps = 0;
        self.done = false;
        self.observe()
    }

    fn step(&mut self, action: Action<'_>) -> Result<StepResult> {
        if self.done {
            return Err(Error::StepAfterDone);
        }
        let a = continuous(action, "sparsegoal")?;
        for d in 0..2 {
            let v = a.get(d).copied().unwrap_or(0.0).clamp(-1.0, 1.0);
            self.pos[d] = (self.pos[d] + self.config.speed * v).clamp(-1.0, 1.0);
        }
        self.steps += 1;
        let dx = self.goal[0] - self.pos[0];
        let dy = self.goal[1] - self.pos[1];
        let reached = math::sqrt(dx * dx + dy * dy) <= self.config.goal_radius;
        self.done = reached || self.steps >= self.config.max_steps;
        let components = RewardComponents::new().with("goal", if reached { 1.0 } else { 0.0 });
        let info = StepInfo {
            position: self.pos,
            displacement: math::sqrt(self.pos[0] * self.pos[0] + self.pos[1] * self.pos[1]),
        };
        Ok(StepResult::new(self.observe(), components, self.done, info))
    }

    fn position_bounds(&self) -> ([f64; 2], [f64; 2]) {
        ([-1.0, -1.0], [1.0, 1.0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reward_is_zero_until_goal_then_one() {
        let mut env = SparseGoal::new(SparseGoalConfig::default());
        env.reset(42);
        let mut rewards = Vec::new();
        loop {
            let g = env.goal();
            let d = [g[0] - env.pos[0], g[1] - env.pos[1]];
            let n = math::sqrt(d[0] * d[0] + d[1] * d[1]).max(1e-9);
            let r = env.step(Action::Continuous(&[d[0] / n, d[1] / n])).unwrap();
            rewards.push(r.reward);
            if r.done {
                break;
            }
        }
        let (last, rest) = rewards.split_last().unwrap();
        assert_eq!(*last, 1.0);
        assert!(rest.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn idle_agent_times_out_with_zero_return() {
        let mut env = SparseGoal::new(SparseGoalConfig::default());
        env.reset(3);
        let mut n = 0;
        let mut total = 0.0;
        loop {
            let r = env.step(Action::Continuous(&[0.0, 0.0])).unwrap();
            total += r.reward;
            n += 1;
            if r.done {
                break;
            }
        }
        assert_eq!(n, 200);
        assert_eq!(total, 0.0);
    }
}
