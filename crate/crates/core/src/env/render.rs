use super::games::{GameState, CATCH_PADDLE, TUNNEL_PADDLE};
use super::EnvConfig;
use crate::tensor::Tensor;

/// Intensity levels; `k / 255` is the pixel value. 85/255 and 170/255 are
/// exactly 1/3 and 2/3 in f64.
pub const LEVEL_BALL: u8 = 255;
pub const LEVEL_PADDLE: u8 = 170;
pub const LEVEL_BRICK: u8 = 85;
pub const LEVEL_SCORE: u8 = 255;

pub const SCORE_STRIP_ROWS: usize = 2;

/// One grayscale frame stored as intensity levels.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Frame {
    pub h: usize,
    pub w: usize,
    pub pixels: Vec<u8>,
}

impl Frame {
    pub fn value(&self, y: usize, x: usize) -> f64 {
        f64::from(self.pixels[y * self.w + x]) / 255.0
    }

    pub fn write_values(&self, dst: &mut [f64]) {
        for (d, &p) in dst.iter_mut().zip(&self.pixels) {
            *d = f64::from(p) / 255.0;
        }
    }

    pub fn to_tensor(&self) -> Tensor {
        let mut v = vec![0.0; self.pixels.len()];
        self.write_values(&mut v);
        Tensor::from_vec(&[self.h, self.w], v).expect("frame shape")
    }
}

/// Nearest-neighbour rendering of the grid, plus the optional score strip
/// (`score = Some(n)` lights `n` ticks, modulo the strip capacity).
pub fn render_frame(cfg: &EnvConfig, state: &GameState, score: Option<u64>) -> Frame {
    let (gh, gw) = (cfg.grid_h, cfg.grid_w);
    let mut cells = vec![0u8; gh * gw];
    match state {
        GameState::Catch(s) => {
            for c in s.paddle..s.paddle + CATCH_PADDLE {
                cells[(gh - 1) * gw + c] = LEVEL_PADDLE;
            }
            cells[s.ball.0 * gw + s.ball.1] = LEVEL_BALL;
        }
        GameState::Tunnel(s) => {
            for (cell, &brick) in cells.iter_mut().zip(&s.bricks) {
                if brick {
                    *cell = LEVEL_BRICK;
                }
            }
            for c in s.paddle..s.paddle + TUNNEL_PADDLE {
                cells[(gh - 1) * gw + c] = LEVEL_PADDLE;
            }
            cells[s.ball.0 * gw + s.ball.1] = LEVEL_BALL;
        }
    }

    render_cells(cfg, &cells, score)
}

/// Scales a `grid_h x grid_w` grid of intensity levels to the render size.
pub fn render_cells(cfg: &EnvConfig, cells: &[u8], score: Option<u64>) -> Frame {
    let (gh, gw) = (cfg.grid_h, cfg.grid_w);
    assert_eq!(cells.len(), gh * gw, "cell grid size");
    let (h, w) = (cfg.render_h, cfg.render_w);
    let col_of: Vec<usize> = (0..w).map(|x| x * gw / w).collect();
    let mut pixels = vec![0u8; h * w];
    for y in 0..h {
        let row = y * gh / h;
        for x in 0..w {
            pixels[y * w + x] = cells[row * gw + col_of[x]];
        }
    }

    if let Some(score) = score {
        let strip = SCORE_STRIP_ROWS.min(h);
        pixels[..strip * w].fill(0);
        let capacity = w.div_ceil(2) as u64;
        let ticks = (score % (capacity + 1)) as usize;
        for k in 0..ticks {
            for y in 0..strip {
                pixels[y * w + 2 * k] = LEVEL_SCORE;
            }
        }
    }
    Frame { h, w, pixels }
}

/// Pixel-space bounding box `(y0, x0, y1, x1)` (inclusive) of a grid cell span.
pub(crate) fn cell_box(cfg: &EnvConfig, row: usize, col0: usize, col1: usize) -> (usize, usize, usize, usize) {
    let first = |g: usize, extent: usize, render: usize| (0..render).find(|&p| p * extent / render == g).unwrap_or(0);
    let last = |g: usize, extent: usize, render: usize| (0..render).rev().find(|&p| p * extent / render == g).unwrap_or(0);
    (
        first(row, cfg.grid_h, cfg.render_h),
        first(col0, cfg.grid_w, cfg.render_w),
        last(row, cfg.grid_h, cfg.render_h),
        last(col1, cfg.grid_w, cfg.render_w),
    )
}

/// Inclusive pixel boxes `(y0, x0, y1, x1)` of the ball and of the paddle.
pub fn entity_boxes(cfg: &EnvConfig, state: &GameState) -> [(usize, usize, usize, usize); 2] {
    let (ball, paddle, width) = match state {
        GameState::Catch(s) => (s.ball, s.paddle, CATCH_PADDLE),
        GameState::Tunnel(s) => (s.ball, s.paddle, TUNNEL_PADDLE),
    };
    [
        cell_box(cfg, ball.0, ball.1, ball.1),
        cell_box(cfg, cfg.grid_h - 1, paddle, paddle + width - 1),
    ]
}

#[cfg(test)]
mod tests {
    use super::super::CatchState;
    use super::*;

    /// 10x10 grid at 40x40: every cell is an exact 4x4 block.
    fn forty() -> EnvConfig {
        EnvConfig {
            render_h: 40,
            render_w: 40,
            ..EnvConfig::catch()
        }
    }

    #[test]
    fn empty_grid_renders_black() {
        let cfg = forty();
        let f = render_cells(&cfg, &[0; 100], None);
        assert_eq!(f.pixels.len(), 1600);
        assert!(f.pixels.iter().all(|&p| p == 0));
    }

    #[test]
    fn ball_cell_is_a_four_by_four_block() {
        let cfg = forty();
        let state = GameState::Catch(CatchState { ball: (3, 6), paddle: 0 });
        let f = render_frame(&cfg, &state, None);
        for y in 0..40 {
            for x in 0..40 {
                let in_ball = (12..16).contains(&y) && (24..28).contains(&x);
                let in_paddle = (36..40).contains(&y) && x < 8;
                let expect = if in_ball {
                    1.0
                } else if in_paddle {
                    2.0 / 3.0
                } else {
                    0.0
                };
                assert_eq!(f.value(y, x), expect, "pixel ({y},{x})");
            }
        }
        assert_eq!(cell_box(&cfg, 3, 6, 6), (12, 24, 15, 27));
        assert_eq!(entity_boxes(&cfg, &state), [(12, 24, 15, 27), (36, 0, 39, 7)]);
    }

    #[test]
    fn brick_level_is_one_third() {
        assert_eq!(f64::from(LEVEL_BRICK) / 255.0, 1.0 / 3.0);
        assert_eq!(f64::from(LEVEL_PADDLE) / 255.0, 2.0 / 3.0);
    }

    #[test]
    fn score_strip_counts_ticks() {
        let cfg = forty();
        let state = GameState::Catch(CatchState { ball: (5, 0), paddle: 4 });
        let f = render_frame(&cfg, &state, Some(3));
        let lit_cols: Vec<usize> = (0..40).filter(|&x| f.pixels[x] == LEVEL_SCORE).collect();
        assert_eq!(lit_cols, vec![0, 2, 4]);
        let lit_in_strip = f.pixels[..2 * 40].iter().filter(|&&p| p != 0).count();
        assert_eq!(lit_in_strip, 6);
    }

    #[test]
    fn non_integer_scale_covers_every_cell() {
        let cfg = EnvConfig { render_h: 44, render_w: 44, ..EnvConfig::catch() };
        let state = GameState::Catch(CatchState { ball: (0, 9), paddle: 0 });
        let f = render_frame(&cfg, &state, None);
        assert_eq!(f.value(0, 43), 1.0);
        assert_eq!(f.value(43, 0), 2.0 / 3.0);
    }
}
