//! Deterministic toy pixel games with DQN-style frame stacking.
//!
//! Two games share one action set (`0` left, `1` stay, `2` right):
//!
//! * **Catch** – a ball falls one row per step from a random column of the top
//!   row; a two-cell paddle on the bottom row must be under it when it lands.
//! * **Tunnel** – a ball bounces diagonally off walls, ceiling, paddle and a
//!   band of bricks; each brick removed is worth +1, missing the ball ends the
//!   episode with -1.
//!
//! Every random choice comes from one [`SplitMix64`] stream owned by the
//! environment, so `(config, seed, actions)` determines every frame.

mod dump;
mod games;
mod render;

use std::collections::VecDeque;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::tensor::Tensor;

pub use dump::{dump_trajectory, TrajectoryRecord};
pub use games::{CatchState, GameState, TunnelState, CATCH_PADDLE, TUNNEL_PADDLE};
pub use render::{entity_boxes, render_cells, render_frame, Frame, LEVEL_BALL, LEVEL_BRICK, LEVEL_PADDLE, LEVEL_SCORE, SCORE_STRIP_ROWS};

pub const NUM_ACTIONS: usize = 3;
pub const LEFT: usize = 0;
pub const STAY: usize = 1;
pub const RIGHT: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Game {
    Catch,
    Tunnel,
}

impl std::str::FromStr for Game {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "catch" => Ok(Game::Catch),
            "tunnel" => Ok(Game::Tunnel),
            other => Err(Error::Config(format!("unknown game `{other}`"))),
        }
    }
}

impl std::fmt::Display for Game {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Game::Catch => "catch",
            Game::Tunnel => "tunnel",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub game: Game,
    pub grid_h: usize,
    pub grid_w: usize,
    pub render_h: usize,
    pub render_w: usize,
    pub frame_stack: usize,
    /// Draws a running score counter strip along the top of every frame.
    pub draw_score: bool,
    pub seed: u64,
    /// Tunnel episodes are truncated (reward 0) after this many steps.
    pub max_steps: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            game: Game::Catch,
            grid_h: 10,
            grid_w: 10,
            render_h: 44,
            render_w: 44,
            frame_stack: 4,
            draw_score: false,
            seed: 0,
            max_steps: 200,
        }
    }
}

impl EnvConfig {
    pub fn catch() -> Self {
        Self::default()
    }

    pub fn tunnel() -> Self {
        Self {
            game: Game::Tunnel,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Env(msg));
        if self.frame_stack < 1 {
            return bad("frame_stack must be >= 1".into());
        }
        if self.render_h < self.grid_h || self.render_w < self.grid_w {
            return bad(format!(
                "render {}x{} is smaller than grid {}x{}",
                self.render_h, self.render_w, self.grid_h, self.grid_w
            ));
        }
        let (min_h, min_w) = match self.game {
            Game::Catch => (2, CATCH_PADDLE),
            Game::Tunnel => (7, TUNNEL_PADDLE),
        };
        if self.grid_h < min_h || self.grid_w < min_w {
            return bad(format!(
                "{} needs a grid of at least {min_h}x{min_w}, got {}x{}",
                self.game, self.grid_h, self.grid_w
            ));
        }
        if self.game == Game::Tunnel && self.max_steps == 0 {
            return bad("max_steps must be >= 1".into());
        }
        Ok(())
    }

    pub fn observation_shape(&self) -> [usize; 3] {
        [self.frame_stack, self.render_h, self.render_w]
    }

    /// Short identifier such as `catch-10x10@44x44`.
    pub fn id(&self) -> String {
        format!(
            "{}-{}x{}@{}x{}{}",
            self.game,
            self.grid_h,
            self.grid_w,
            self.render_h,
            self.render_w,
            if self.draw_score { "+score" } else { "" }
        )
    }
}

/// The last `frame_stack` rendered frames, oldest first.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    frames: Vec<Arc<Frame>>,
}

impl Observation {
    pub fn frames(&self) -> &[Arc<Frame>] {
        &self.frames
    }

    pub fn newest(&self) -> &Frame {
        self.frames.last().expect("non-empty stack")
    }

    pub fn shape(&self) -> [usize; 3] {
        let f = self.newest();
        [self.frames.len(), f.h, f.w]
    }

    /// Writes the `[stack, H, W]` values in `[0, 1]` into `dst`.
    pub fn write_values(&self, dst: &mut [f64]) {
        let plane = self.newest().pixels.len();
        for (frame, chunk) in self.frames.iter().zip(dst.chunks_exact_mut(plane)) {
            frame.write_values(chunk);
        }
    }

    pub fn tensor(&self) -> Tensor {
        let shape = self.shape();
        let mut values = vec![0.0; shape.iter().product()];
        self.write_values(&mut values);
        Tensor::from_vec(&shape, values).expect("observation shape")
    }

    /// `[N, stack, H, W]` batch.
    pub fn batch_tensor(items: &[&Observation]) -> Result<Tensor> {
        let first = items
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty observation batch".into()))?;
        let shape = first.shape();
        let per: usize = shape.iter().product();
        let mut values = vec![0.0; per * items.len()];
        for (obs, chunk) in items.iter().zip(values.chunks_exact_mut(per)) {
            if obs.shape() != shape {
                return Err(Error::Shape("observations of different shapes in one batch".into()));
            }
            obs.write_values(chunk);
        }
        Tensor::from_vec(&[items.len(), shape[0], shape[1], shape[2]], values)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub terminal: bool,
}

pub struct Env {
    config: EnvConfig,
    rng: SplitMix64,
    state: GameState,
    stack: VecDeque<Arc<Frame>>,
    terminal: bool,
    steps: usize,
    /// Running count of positive rewards since construction; drives the score strip.
    score: u64,
}

impl Env {
    /// Validates the config and resets with `config.seed`.
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = SplitMix64::new(config.seed);
        let state = GameState::spawn(&config, &mut rng);
        let mut env = Self {
            config,
            rng,
            state,
            stack: VecDeque::new(),
            terminal: false,
            steps: 0,
            score: 0,
        };
        env.restart_stack();
        Ok(env)
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn num_actions(&self) -> usize {
        NUM_ACTIONS
    }

    pub fn state(&self) -> &GameState {
        &self.state
    }

    pub fn is_terminal(&self) -> bool {
        self.terminal
    }

    pub fn score(&self) -> u64 {
        self.score
    }

    /// New episode drawn from the continuing PRNG stream.
    pub fn reset(&mut self) -> Observation {
        self.state = GameState::spawn(&self.config, &mut self.rng);
        self.terminal = false;
        self.steps = 0;
        self.restart_stack();
        self.observation()
    }

    /// New episode from a fresh stream seeded with `seed`.
    pub fn reset_with_seed(&mut self, seed: u64) -> Observation {
        self.rng = SplitMix64::new(seed);
        self.reset()
    }

    /// Starts an episode from an explicit state (hand-built test scenarios).
    pub fn reset_to(&mut self, state: GameState) -> Result<Observation> {
        state.validate(&self.config)?;
        self.state = state;
        self.terminal = false;
        self.steps = 0;
        self.restart_stack();
        Ok(self.observation())
    }

    pub fn observation(&self) -> Observation {
        Observation {
            frames: self.stack.iter().cloned().collect(),
        }
    }

    pub fn render(&self) -> Frame {
        render_frame(&self.config, &self.state, self.config.draw_score.then_some(self.score))
    }

    fn restart_stack(&mut self) {
        let frame = Arc::new(self.render());
        self.stack.clear();
        for _ in 0..self.config.frame_stack {
            self.stack.push_back(frame.clone());
        }
    }

    pub fn step(&mut self, action: usize) -> Result<StepResult> {
        if action >= NUM_ACTIONS {
            return Err(Error::Env(format!("action {action} out of range 0..{NUM_ACTIONS}")));
        }
        if self.terminal {
            return Err(Error::Env("step after terminal; call reset first".into()));
        }
        let (reward, mut terminal) = self.state.advance(&self.config, action);
        self.steps += 1;
        if self.config.game == Game::Tunnel && self.steps >= self.config.max_steps {
            terminal = true;
        }
        if reward > 0.0 {
            self.score += 1;
        }
        self.terminal = terminal;
        self.stack.pop_front();
        self.stack.push_back(Arc::new(self.render()));
        Ok(StepResult {
            observation: self.observation(),
            reward,
            terminal,
        })
    }
}

/// Convenience: a fresh environment seeded with `seed` and its first observation.
pub fn reset(config: &EnvConfig, seed: u64) -> Result<(Env, Observation)> {
    let env = Env::new(EnvConfig {
        seed,
        ..config.clone()
    })?;
    let obs = env.observation();
    Ok((env, obs))
}

/// Hand-written controller that tracks the ball with the paddle.
pub fn scripted_optimal_policy(state: &GameState) -> usize {
    let (ball_col, paddle, width) = match state {
        GameState::Catch(s) => (s.ball.1, s.paddle, CATCH_PADDLE),
        GameState::Tunnel(s) => (s.ball.1, s.paddle, TUNNEL_PADDLE),
    };
    if ball_col < paddle {
        LEFT
    } else if ball_col >= paddle + width {
        RIGHT
    } else if width > 2 && ball_col != paddle + width / 2 {
        // Tunnel: keep the ball over the paddle centre.
        if ball_col < paddle + width / 2 {
            LEFT
        } else {
            RIGHT
        }
    } else {
        STAY
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reset_shape_and_identical_stack() {
        let env = Env::new(EnvConfig::catch()).unwrap();
        let obs = env.observation();
        assert_eq!(obs.shape(), [4, 44, 44]);
        let t = obs.tensor();
        let plane = 44 * 44;
        for k in 1..4 {
            assert_eq!(t.values()[..plane], t.values()[k * plane..(k + 1) * plane]);
        }
        assert!(t.values().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn same_seed_same_observation() {
        let (_, a) = reset(&EnvConfig::catch(), 42).unwrap();
        let (_, b) = reset(&EnvConfig::catch(), 42).unwrap();
        assert_eq!(a.tensor().values(), b.tensor().values());
    }

    #[test]
    fn spawn_column_follows_prng_stream() {
        let cfg = EnvConfig::catch();
        for seed in [0u64, 1, 2, 99, 100] {
            let (env, _) = reset(&cfg, seed).unwrap();
            let expected = SplitMix64::new(seed).bounded(cfg.grid_w);
            match env.state() {
                GameState::Catch(s) => {
                    assert_eq!(s.ball, (0, expected));
                    assert_eq!(s.paddle, 4);
                }
                _ => unreachable!(),
            }
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut c = EnvConfig::catch();
        c.frame_stack = 0;
        assert!(Env::new(c).is_err());
        let mut c = EnvConfig::catch();
        c.render_h = 5;
        assert!(Env::new(c).is_err());
        let mut c = EnvConfig::tunnel();
        c.grid_h = 4;
        assert!(Env::new(c).is_err());
    }

    #[test]
    fn stay_under_ball_catches_it() {
        let mut env = Env::new(EnvConfig::catch()).unwrap();
        env.reset_to(GameState::Catch(CatchState { ball: (0, 5), paddle: 4 })).unwrap();
        let mut last = None;
        for _ in 0..9 {
            last = Some(env.step(STAY).unwrap());
        }
        let last = last.unwrap();
        assert!(last.terminal);
        assert_eq!(last.reward, 1.0);
    }

    #[test]
    fn unreachable_ball_is_missed() {
        // 4 rows: 3 steps; paddle starts at the far right (cols 8-9) and can
        // reach cols 5-6 at best, never col 0.
        let cfg = EnvConfig {
            grid_h: 4,
            render_h: 40,
            ..EnvConfig::catch()
        };
        let mut env = Env::new(cfg).unwrap();
        env.reset_to(GameState::Catch(CatchState { ball: (0, 0), paddle: 8 })).unwrap();
        let mut rewards = Vec::new();
        for _ in 0..3 {
            rewards.push(env.step(LEFT).unwrap().reward);
        }
        assert_eq!(rewards, vec![0.0, 0.0, -1.0]);
        assert!(env.is_terminal());
    }

    #[test]
    fn step_errors() {
        let mut env = Env::new(EnvConfig::catch()).unwrap();
        assert!(env.step(3).is_err());
        for _ in 0..9 {
            env.step(STAY).unwrap();
        }
        assert!(env.step(STAY).is_err());
        env.reset();
        assert!(env.step(STAY).is_ok());
    }

    #[test]
    fn catch_episode_length_is_grid_height_minus_one() {
        let mut env = Env::new(EnvConfig { grid_h: 7, ..EnvConfig::catch() }).unwrap();
        let mut rng = SplitMix64::new(4);
        for _ in 0..20 {
            env.reset();
            let mut n = 0;
            loop {
                n += 1;
                if env.step(rng.bounded(3)).unwrap().terminal {
                    break;
                }
            }
            assert_eq!(n, 6);
        }
    }

    #[test]
    fn stack_holds_recent_frames_newest_last() {
        let mut env = Env::new(EnvConfig::catch()).unwrap();
        let f0 = env.observation().newest().clone();
        let s1 = env.step(LEFT).unwrap();
        let f1 = s1.observation.newest().clone();
        let s2 = env.step(RIGHT).unwrap();
        let frames = s2.observation.frames();
        assert_eq!(*frames[3], *s2.observation.newest());
        assert_eq!(*frames[2], f1);
        assert_eq!(*frames[1], f0);
        assert_eq!(*frames[0], f0);
    }

    #[test]
    fn scripted_policy_decisions() {
        let above = GameState::Catch(CatchState { ball: (3, 4), paddle: 4 });
        assert_eq!(scripted_optimal_policy(&above), STAY);
        let left = GameState::Catch(CatchState { ball: (3, 1), paddle: 4 });
        assert_eq!(scripted_optimal_policy(&left), LEFT);
        let right = GameState::Catch(CatchState { ball: (3, 9), paddle: 4 });
        assert_eq!(scripted_optimal_policy(&right), RIGHT);
    }

    #[test]
    fn scripted_policy_wins_catch() {
        let mut env = Env::new(EnvConfig::catch()).unwrap();
        let mut total = 0.0;
        for ep in 0..100 {
            env.reset_with_seed(ep);
            loop {
                let a = scripted_optimal_policy(env.state());
                let r = env.step(a).unwrap();
                if r.terminal {
                    total += r.reward;
                    break;
                }
            }
        }
        assert!(total / 100.0 >= 0.95, "mean {}", total / 100.0);
    }

    #[test]
    fn determinism_over_action_sequences() {
        let run = || {
            let mut env = Env::new(EnvConfig { seed: 17, ..EnvConfig::tunnel() }).unwrap();
            let mut rng = SplitMix64::new(3);
            let mut trace = Vec::new();
            for _ in 0..300 {
                if env.is_terminal() {
                    env.reset();
                }
                let r = env.step(rng.bounded(3)).unwrap();
                trace.push((r.reward, r.terminal, r.observation.newest().pixels.clone()));
            }
            trace
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn rewards_are_unit_valued() {
        for cfg in [EnvConfig::catch(), EnvConfig::tunnel()] {
            let mut env = Env::new(cfg).unwrap();
            let mut rng = SplitMix64::new(12);
            for _ in 0..2000 {
                if env.is_terminal() {
                    env.reset();
                }
                let r = env.step(rng.bounded(3)).unwrap().reward;
                assert!(r == -1.0 || r == 0.0 || r == 1.0);
            }
        }
    }
}
