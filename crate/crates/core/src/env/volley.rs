use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{continuous, Action, Env, EpisodeSeed, RewardComponents, StepInfo, StepResult};
use crate::error::{Error, Result};
use crate::math;
use crate::nn::ActionSpace;
use crate::rng::{self, Stream};

const HALF_COURT: f64 = 2.0;
const NET_HEIGHT: f64 = 0.5;
const BALL_RADIUS: f64 = 0.1;
const BALL_GRAVITY: f64 = 0.012;
const MAX_BALL_SPEED: f64 = 0.24;
const PLAYER_RADIUS: f64 = 0.3;
const PLAYER_SPEED: f64 = 0.16;
const JUMP_SPEED: f64 = 0.16;
const PLAYER_GRAVITY: f64 = 0.02;
const SERVE_HEIGHT: f64 = 1.6;
const HOME_X: f64 = 1.0;

/// Bit of the episode seed that flips every serve by 180°.
const MIRROR_BIT: u64 = 1 << 63;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ServeMode {
    Random,
    /// Odd episodes replay the preceding even episode's serves turned by 180°.
    MirroredPairs,
}

/// Scripted right-side player: chases the predicted landing point of a
/// delayed copy of the ball and jumps when it is close.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Opponent {
    pub reaction_lag: usize,
    pub speed: f64,
    /// Offset behind the landing point so returns travel toward the net.
    pub hit_offset: f64,
}

impl Default for Opponent {
    fn default() -> Self {
        Self {
            reaction_lag: 3,
            speed: 0.08,
            hit_offset: 0.12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VolleyConfig {
    pub serve_mode: ServeMode,
    pub opponent: Opponent,
    pub serve_speed: (f64, f64),
    /// Largest serve angle above or below horizontal, radians.
    pub serve_elevation: f64,
    pub points_per_episode: u32,
    pub max_steps: usize,
}

impl Default for VolleyConfig {
    fn default() -> Self {
        Self {
            serve_mode: ServeMode::Random,
            opponent: Opponent::default(),
            serve_speed: (0.06, 0.12),
            serve_elevation: core::f64::consts::FRAC_PI_2,
            points_per_episode: 5,
            max_steps: 3000,
        }
    }
}

/// Launch direction (radians, counter-clockwise from +x) and speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Serve {
    pub angle: f64,
    pub speed: f64,
}

impl Serve {
    pub fn mirrored(self) -> Self {
        Serve {
            angle: wrap_angle(self.angle + core::f64::consts::PI),
            speed: self.speed,
        }
    }

    /// True when the ball leaves the center toward the trained (left) side.
    pub fn toward_agent(&self) -> bool {
        math::cos(self.angle) < 0.0
    }

    fn velocity(&self) -> [f64; 2] {
        [
            self.speed * math::cos(self.angle),
            self.speed * math::sin(self.angle),
        ]
    }
}

fn draw_serve(stream: &mut Stream, config: &VolleyConfig) -> Serve {
    let toward_agent = stream.random::<bool>();
    let elevation = config.serve_elevation * (2.0 * stream.random::<f64>() - 1.0);
    let base = if toward_agent {
        core::f64::consts::PI
    } else {
        0.0
    };
    let angle = wrap_angle(base + elevation);
    let (lo, hi) = config.serve_speed;
    let speed = lo + (hi - lo) * stream.random::<f64>();
    Serve { angle, speed }
}

fn wrap_angle(a: f64) -> f64 {
    let tau = 2.0 * core::f64::consts::PI;
    let r = a - tau * math::floor(a / tau);
    if r >= tau {
        0.0
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Body {
    pos: [f64; 2],
    vel: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct Volley {
    config: VolleyConfig,
    serves: Stream,
    mirrored: bool,
    agent: Body,
    opponent: Body,
    ball: Body,
    history: Vec<Body>,
    points_played: u32,
    score: i32,
    steps: usize,
    done: bool,
}

impl Volley {
    pub const OBS_DIM: usize = 12;

    pub fn new(config: VolleyConfig) -> Self {
        Self {
            config,
            serves: rng::stream(&[0]),
            mirrored: false,
            agent: Body::default(),
            opponent: Body::default(),
            ball: Body::default(),
            history: Vec::new(),
            points_played: 0,
            score: 0,
            steps: 0,
            done: true,
        }
    }

    pub fn config(&self) -> &VolleyConfig {
        &self.config
    }

    /// The `index`-th serve of the episode keyed by `seed`.
    pub fn serve_for(&self, seed: EpisodeSeed, index: u32) -> Serve {
        let mut stream = rng::stream(&[seed & !MIRROR_BIT, 0x5e7e]);
        let mut serve = draw_serve(&mut stream, &self.config);
        for _ in 0..index {
            serve = draw_serve(&mut stream, &self.config);
        }
        if seed & MIRROR_BIT != 0 {
            serve.mirrored()
        } else {
            serve
        }
    }

    pub fn score(&self) -> i32 {
        self.score
    }

    pub fn points_played(&self) -> u32 {
        self.points_played
    }

    fn start_point(&mut self) {
        let mut serve = draw_serve(&mut self.serves, &self.config);
        if self.mirrored {
            serve = serve.mirrored();
        }
        self.ball = Body {
            pos: [0.0, SERVE_HEIGHT],
            vel: serve.velocity(),
        };
        self.agent = Body {
            pos: [-HOME_X, 0.0],
            vel: [0.0, 0.0],
        };
        self.opponent = Body {
            pos: [HOME_X, 0.0],
            vel: [0.0, 0.0],
        };
        self.history.clear();
    }

    fn move_player(body: &mut Body, run: f64, jump: bool, min_x: f64, max_x: f64) {
        body.vel[0] = run;
        if jump && body.pos[1] <= 0.0 {
            body.vel[1] = JUMP_SPEED;
        }
        body.pos[0] = (body.pos[0] + body.vel[0]).clamp(min_x, max_x);
        if body.pos[1] > 0.0 || body.vel[1] > 0.0 {
            body.pos[1] += body.vel[1];
            body.vel[1] -= PLAYER_GRAVITY;
            if body.pos[1] <= 0.0 {
                body.pos[1] = 0.0;
                body.vel[1] = 0.0;
            }
        }
    }

    fn opponent_action(&self) -> (f64, bool) {
        let opp = &self.opponent;
        let lag = self.config.opponent.reaction_lag;
        let seen = if self.history.len() > lag {
            self.history[self.history.len() - 1 - lag]
        } else {
            *self.history.first().unwrap_or(&self.ball)
        };
        let target = match landing_x(&seen, PLAYER_RADIUS + BALL_RADIUS) {
            Some(x) if x > 0.0 => x + self.config.opponent.hit_offset,
            _ => HOME_X,
        };
        let dx = target - opp.pos[0];
        let speed = self.config.opponent.speed;
        let run = dx.clamp(-speed, speed);
        let near = (seen.pos[0] - opp.pos[0]).abs() < 0.35
            && seen.pos[1] < 1.0
            && seen.vel[1] < 0.0
            && seen.pos[0] > 0.0;
        (run, near)
    }

    fn collide_player(ball: &mut Body, player: &Body) {
        let dx = ball.pos[0] - player.pos[0];
        let dy = ball.pos[1] - player.pos[1];
        let dist = math::sqrt(dx * dx + dy * dy);
        let reach = PLAYER_RADIUS + BALL_RADIUS;
        if dist >= reach || dy < 0.0 || dist == 0.0 {
            return;
        }
        let n = [dx / dist, dy / dist];
        ball.pos = [player.pos[0] + n[0] * reach, player.pos[1] + n[1] * reach];
        let rel = [ball.vel[0] - player.vel[0], ball.vel[1] - player.vel[1]];
        let along = rel[0] * n[0] + rel[1] * n[1];
        if along < 0.0 {
            ball.vel[0] = player.vel[0] + rel[0] - 2.0 * along * n[0];
            ball.vel[1] = player.vel[1] + rel[1] - 2.0 * along * n[1];
        }
        let speed = math::sqrt(ball.vel[0] * ball.vel[0] + ball.vel[1] * ball.vel[1]);
        if speed > MAX_BALL_SPEED {
            ball.vel[0] *= MAX_BALL_SPEED / speed;
            ball.vel[1] *= MAX_BALL_SPEED / speed;
        }
    }

    fn collide_net(ball: &mut Body) {
        let closest = [0.0, ball.pos[1].clamp(0.0, NET_HEIGHT)];
        let dx = ball.pos[0] - closest[0];
        let dy = ball.pos[1] - closest[1];
        let dist = math::sqrt(dx * dx + dy * dy);
        if dist >= BALL_RADIUS {
            return;
        }
        let n = if dist > 0.0 {
            [dx / dist, dy / dist]
        } else if ball.vel[0] > 0.0 {
            [-1.0, 0.0]
        } else {
            [1.0, 0.0]
        };
        ball.pos = [
            closest[0] + n[0] * BALL_RADIUS,
            closest[1] + n[1] * BALL_RADIUS,
        ];
        let along = ball.vel[0] * n[0] + ball.vel[1] * n[1];
        if along < 0.0 {
            ball.vel[0] -= 2.0 * along * n[0];
            ball.vel[1] -= 2.0 * along * n[1];
        }
    }

    fn observe(&self) -> Vec<f64> {
        let (a, o, b) = (&self.agent, &self.opponent, &self.ball);
        vec![
            a.pos[0] / HALF_COURT,
            a.pos[1],
            a.vel[0] / PLAYER_SPEED,
            a.vel[1] / JUMP_SPEED,
            b.pos[0] / HALF_COURT,
            b.pos[1],
            b.vel[0] / MAX_BALL_SPEED,
            b.vel[1] / MAX_BALL_SPEED,
            o.pos[0] / HALF_COURT,
            o.pos[1],
            o.vel[0] / PLAYER_SPEED,
            o.vel[1] / JUMP_SPEED,
        ]
    }
}

/// x where a ballistic ball first descends through height `y`, with
/// reflections off the side walls.
fn landing_x(ball: &Body, y: f64) -> Option<f64> {
    let (vx, vy, py) = (ball.vel[0], ball.vel[1], ball.pos[1]);
    // py + vy t − g t²/2 = y
    let disc = vy * vy + 2.0 * BALL_GRAVITY * (py - y);
    if disc < 0.0 {
        return None;
    }
    let t = (vy + math::sqrt(disc)) / BALL_GRAVITY;
    let limit = HALF_COURT - BALL_RADIUS;
    let mut x = ball.pos[0] + vx * t;
    let period = 4.0 * limit;
    x = x + limit - period * math::floor((x + limit) / period);
    if x > 2.0 * limit {
        x = 4.0 * limit - x;
    }
    Some(x - limit)
}

impl Env for Volley {
    fn name(&self) -> &'static str {
        match self.config.serve_mode {
            ServeMode::Random => "slime",
            ServeMode::MirroredPairs => "slime-sym",
        }
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
        self.serves = rng::stream(&[seed & !MIRROR_BIT, 0x5e7e]);
        self.mirrored = seed & MIRROR_BIT != 0;
        self.points_played = 0;
        self.score = 0;
        self.steps = 0;
        self.done = false;
        self.start_point();
        self.observe()
    }

    fn step(&mut self, action: Action<'_>) -> Result<StepResult> {
        if self.done {
            return Err(Error::StepAfterDone);
        }
        let a = continuous(action, "slime")?;
        let run = a.first().copied().unwrap_or(0.0).clamp(-1.0, 1.0) * PLAYER_SPEED;
        let jump = a.get(1).copied().unwrap_or(0.0) > 0.0;
        let (opp_run, opp_jump) = self.opponent_action();

        Self::move_player(
            &mut self.agent,
            run,
            jump,
            -HALF_COURT + PLAYER_RADIUS,
            -PLAYER_RADIUS,
        );
        Self::move_player(
            &mut self.opponent,
            opp_run,
            opp_jump,
            PLAYER_RADIUS,
            HALF_COURT - PLAYER_RADIUS,
        );

        let ball = &mut self.ball;
        ball.vel[1] -= BALL_GRAVITY;
        ball.pos[0] += ball.vel[0];
        ball.pos[1] += ball.vel[1];
        let limit = HALF_COURT - BALL_RADIUS;
        if ball.pos[0] < -limit {
            ball.pos[0] = -2.0 * limit - ball.pos[0];
            ball.vel[0] = -ball.vel[0];
        } else if ball.pos[0] > limit {
            ball.pos[0] = 2.0 * limit - ball.pos[0];
            ball.vel[0] = -ball.vel[0];
        }
        Self::collide_net(ball);
        Self::collide_player(ball, &self.agent);
        Self::collide_player(ball, &self.opponent);
        self.history.push(self.ball);

        let mut point = 0.0;
        if self.ball.pos[1] <= BALL_RADIUS {
            point = if self.ball.pos[0] < 0.0 { -1.0 } else { 1.0 };
            self.score += point as i32;
            self.points_played += 1;
            if self.points_played < self.config.points_per_episode {
                self.start_point();
            }
        }
        self.steps += 1;
        self.done = self.points_played >= self.config.points_per_episode
            || self.steps >= self.config.max_steps;
        let info = StepInfo {
            position: self.agent.pos,
            displacement: 0.0,
        };
        let components = RewardComponents::new().with("score", point);
        Ok(StepResult::new(self.observe(), components, self.done, info))
    }

    fn episode_seeds(&self, base: u64, n: usize) -> Vec<EpisodeSeed> {
        match self.config.serve_mode {
            ServeMode::Random => super::independent_seeds(base, n),
            ServeMode::MirroredPairs => {
                let evens = super::independent_seeds(base, n.div_ceil(2));
                (0..n)
                    .map(|i| {
                        let s = evens[i / 2] & !MIRROR_BIT;
                        if i % 2 == 0 {
                            s
                        } else {
                            s | MIRROR_BIT
                        }
                    })
                    .collect()
            }
        }
    }

    fn mirror_seed(&self, seed: EpisodeSeed) -> Result<EpisodeSeed> {
        Ok(seed ^ MIRROR_BIT)
    }

    fn position_bounds(&self) -> ([f64; 2], [f64; 2]) {
        ([-HALF_COURT, 0.0], [0.0, 1.5])
    }
}
