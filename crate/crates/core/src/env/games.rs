use super::{EnvConfig, Game, LEFT, RIGHT};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

pub const CATCH_PADDLE: usize = 2;
pub const TUNNEL_PADDLE: usize = 3;

/// Rows occupied by the tunnel brick band.
const BRICK_ROWS: std::ops::Range<usize> = 2..4;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CatchState {
    /// `(row, col)` of the ball.
    pub ball: (usize, usize),
    /// Leftmost paddle column; the paddle sits on the bottom row.
    pub paddle: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TunnelState {
    pub ball: (usize, usize),
    /// `(d_row, d_col)`, each -1 or +1.
    pub heading: (i8, i8),
    pub paddle: usize,
    /// Row-major `grid_h x grid_w` brick occupancy.
    pub bricks: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GameState {
    Catch(CatchState),
    Tunnel(TunnelState),
}

fn shift_paddle(paddle: usize, action: usize, max_left: usize) -> usize {
    match action {
        LEFT => paddle.saturating_sub(1),
        RIGHT => (paddle + 1).min(max_left),
        _ => paddle,
    }
}

impl TunnelState {
    pub fn brick_at(&self, w: usize, r: usize, c: usize) -> bool {
        self.bricks[r * w + c]
    }

    pub fn bricks_left(&self) -> usize {
        self.bricks.iter().filter(|&&b| b).count()
    }

    /// Full brick band for a `h x w` grid.
    pub fn full_wall(h: usize, w: usize) -> Vec<bool> {
        let mut bricks = vec![false; h * w];
        for r in BRICK_ROWS {
            bricks[r * w..(r + 1) * w].fill(true);
        }
        bricks
    }
}

impl GameState {
    pub(super) fn spawn(cfg: &EnvConfig, rng: &mut SplitMix64) -> Self {
        match cfg.game {
            Game::Catch => GameState::Catch(CatchState {
                ball: (0, rng.bounded(cfg.grid_w)),
                paddle: (cfg.grid_w - CATCH_PADDLE) / 2,
            }),
            Game::Tunnel => {
                let col = rng.bounded(cfg.grid_w);
                let dc = if rng.bounded(2) == 0 { -1 } else { 1 };
                GameState::Tunnel(TunnelState {
                    ball: (cfg.grid_h - 2, col),
                    heading: (-1, dc),
                    paddle: (cfg.grid_w - TUNNEL_PADDLE) / 2,
                    bricks: TunnelState::full_wall(cfg.grid_h, cfg.grid_w),
                })
            }
        }
    }

    pub(super) fn validate(&self, cfg: &EnvConfig) -> Result<()> {
        let (h, w) = (cfg.grid_h, cfg.grid_w);
        let ok = match (self, cfg.game) {
            (GameState::Catch(s), Game::Catch) => {
                s.ball.0 < h - 1 && s.ball.1 < w && s.paddle + CATCH_PADDLE <= w
            }
            (GameState::Tunnel(s), Game::Tunnel) => {
                s.ball.0 < h - 1
                    && s.ball.1 < w
                    && s.paddle + TUNNEL_PADDLE <= w
                    && s.bricks.len() == h * w
                    && s.heading.0.abs() == 1
                    && s.heading.1.abs() == 1
            }
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Env(format!("state {self:?} is not valid for {cfg:?}")))
        }
    }

    /// Applies one action; returns `(reward, terminal)`.
    pub(super) fn advance(&mut self, cfg: &EnvConfig, action: usize) -> (f64, bool) {
        match self {
            GameState::Catch(s) => {
                s.paddle = shift_paddle(s.paddle, action, cfg.grid_w - CATCH_PADDLE);
                s.ball.0 += 1;
                if s.ball.0 == cfg.grid_h - 1 {
                    let caught = (s.paddle..s.paddle + CATCH_PADDLE).contains(&s.ball.1);
                    (if caught { 1.0 } else { -1.0 }, true)
                } else {
                    (0.0, false)
                }
            }
            GameState::Tunnel(s) => advance_tunnel(s, cfg, action),
        }
    }
}

fn advance_tunnel(s: &mut TunnelState, cfg: &EnvConfig, action: usize) -> (f64, bool) {
    let (h, w) = (cfg.grid_h as isize, cfg.grid_w as isize);
    s.paddle = shift_paddle(s.paddle, action, cfg.grid_w - TUNNEL_PADDLE);

    let (r, c) = (s.ball.0 as isize, s.ball.1 as isize);
    let (mut dr, mut dc) = (s.heading.0 as isize, s.heading.1 as isize);
    if !(0..w).contains(&(c + dc)) {
        dc = -dc;
    }
    if r + dr < 0 {
        dr = -dr;
    }
    let (tr, tc) = (r + dr, c + dc);
    let mut reward = 0.0;
    let mut terminal = false;

    if s.brick_at(cfg.grid_w, tr as usize, tc as usize) {
        s.bricks[tr as usize * cfg.grid_w + tc as usize] = false;
        reward = 1.0;
        dr = -dr;
        terminal = s.bricks_left() == 0;
    } else if tr == h - 1 {
        let paddle = s.paddle as isize..(s.paddle + TUNNEL_PADDLE) as isize;
        if paddle.contains(&tc) {
            dr = -dr;
        } else {
            s.ball = (tr as usize, tc as usize);
            reward = -1.0;
            terminal = true;
        }
    } else {
        s.ball = (tr as usize, tc as usize);
    }
    s.heading = (dr as i8, dc as i8);
    (reward, terminal)
}
