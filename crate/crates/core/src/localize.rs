//! Heatmaps from the last conv layer's pre-pool activation maps: min-max
//! normalization, align-corners bilinear upsampling to frame size, red
//! overlays, per-episode export, and a localization score.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::env::{entity_boxes, Env, EnvConfig, GameState, SCORE_STRIP_ROWS};
use crate::error::{shape_err, Error, Result};
use crate::net::Network;
use crate::netpbm::{write_pgm_unit, write_ppm_unit};
use crate::tensor::{first_argmax, Tensor};

pub const DEFAULT_ALPHA: f64 = 0.5;

fn plane_dims(t: &Tensor, what: &str) -> Result<(usize, usize)> {
    match *t.shape() {
        [h, w] if h >= 1 && w >= 1 => Ok((h, w)),
        ref s => shape_err(format!("{what} must be a non-empty [H, W] map, got {s:?}")),
    }
}

/// `(x - min) / (max - min)`; a constant map becomes all zeros.
pub fn normalize_map(raw: &Tensor) -> Result<Tensor> {
    plane_dims(raw, "activation map")?;
    let v = raw.values();
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let out = if hi > lo {
        v.iter().map(|x| (x - lo) / (hi - lo)).collect()
    } else {
        vec![0.0; v.len()]
    };
    Tensor::from_vec(raw.shape(), out)
}

/// Source coordinate of output index `i` under the align-corners rule.
fn source_coord(i: usize, src: usize, dst: usize) -> f64 {
    if dst == 1 {
        0.0
    } else {
        i as f64 * (src - 1) as f64 / (dst - 1) as f64
    }
}

/// Align-corners bilinear resize to `out_h x out_w` (no smaller than the input).
pub fn bilinear_upsample(map: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let (h, w) = plane_dims(map, "map")?;
    if out_h < h || out_w < w {
        return shape_err(format!("cannot upsample {h}x{w} to smaller {out_h}x{out_w}"));
    }
    let v = map.values();
    let mut out = Vec::with_capacity(out_h * out_w);
    for i in 0..out_h {
        let sy = source_coord(i, h, out_h);
        let y0 = (sy.floor() as usize).min(h - 1);
        let y1 = (y0 + 1).min(h - 1);
        let fy = sy - y0 as f64;
        for j in 0..out_w {
            let sx = source_coord(j, w, out_w);
            let x0 = (sx.floor() as usize).min(w - 1);
            let x1 = (x0 + 1).min(w - 1);
            let fx = sx - x0 as f64;
            let top = v[y0 * w + x0] * (1.0 - fx) + v[y0 * w + x1] * fx;
            let bottom = v[y1 * w + x0] * (1.0 - fx) + v[y1 * w + x1] * fx;
            out.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    Tensor::from_vec(&[out_h, out_w], out)
}

/// `[H, W, 3]` image: red `alpha*heat + (1-alpha)*gray`, green and blue
/// `(1-alpha)*gray`, each clamped to `[0, 1]`.
pub fn overlay(frame: &Tensor, heat: &Tensor, alpha: f64) -> Result<Tensor> {
    let (h, w) = plane_dims(frame, "frame")?;
    if heat.shape() != frame.shape() {
        return shape_err(format!("heatmap {:?} does not match frame {:?}", heat.shape(), frame.shape()));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let mut rgb = Vec::with_capacity(h * w * 3);
    for (&g, &m) in frame.values().iter().zip(heat.values()) {
        let base = (1.0 - alpha) * g;
        rgb.push((alpha * m + base).clamp(0.0, 1.0));
        rgb.push(base.clamp(0.0, 1.0));
        rgb.push(base.clamp(0.0, 1.0));
    }
    Tensor::from_vec(&[h, w, 3], rgb)
}

/// Elementwise maximum over the channels of `[C, h, w]` maps.
pub fn aggregate_map(maps: &Tensor) -> Result<Tensor> {
    let (c, h, w) = match *maps.shape() {
        [c, h, w] if c >= 1 && h >= 1 && w >= 1 => (c, h, w),
        ref s => return shape_err(format!("activation maps must be [C, H, W], got {s:?}")),
    };
    let plane = h * w;
    let mut out = vec![f64::NEG_INFINITY; plane];
    for ch in 0..c {
        for (o, &v) in out.iter_mut().zip(&maps.values()[ch * plane..(ch + 1) * plane]) {
            *o = o.max(v);
        }
    }
    Tensor::from_vec(&[h, w], out)
}

fn channel_map(maps: &Tensor, ch: usize) -> Result<Tensor> {
    let [c, h, w] = <[usize; 3]>::try_from(maps.shape()).map_err(|_| Error::Shape("maps must be [C, H, W]".into()))?;
    if ch >= c {
        return Err(Error::InvalidArgument(format!("channel {ch} out of range 0..{c}")));
    }
    let plane = h * w;
    Tensor::from_vec(&[h, w], maps.values()[ch * plane..(ch + 1) * plane].to_vec())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChannelId {
    Index(usize),
    Aggregate,
}

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelId::Index(c) => write!(f, "c{c:03}"),
            ChannelId::Aggregate => f.write_str("aggregate"),
        }
    }
}

/// Every stage of one heatmap, from raw activations to the overlay.
#[derive(Clone, Debug, PartialEq)]
pub struct HeatmapFrame {
    pub channel: ChannelId,
    pub raw: Tensor,
    pub normalized: Tensor,
    pub upsampled: Tensor,
    pub overlay: Tensor,
}

impl HeatmapFrame {
    /// Builds the heatmap of `channel` from `[C, h, w]` maps over a `[H, W]` frame.
    pub fn build(maps: &Tensor, channel: ChannelId, frame: &Tensor, alpha: f64) -> Result<Self> {
        let raw = match channel {
            ChannelId::Index(c) => channel_map(maps, c)?,
            ChannelId::Aggregate => aggregate_map(maps)?,
        };
        let (fh, fw) = plane_dims(frame, "frame")?;
        let normalized = normalize_map(&raw)?;
        let upsampled = bilinear_upsample(&normalized, fh, fw)?;
        let overlay = overlay(frame, &upsampled, alpha)?;
        Ok(Self {
            channel,
            raw,
            normalized,
            upsampled,
            overlay,
        })
    }

    /// Frame-space position of the raw map's (first) argmax cell.
    pub fn argmax_frame_coords(&self) -> (f64, f64) {
        let (h, w) = (self.raw.shape()[0], self.raw.shape()[1]);
        let (fh, fw) = (self.upsampled.shape()[0], self.upsampled.shape()[1]);
        let k = first_argmax(self.raw.values());
        map_to_frame(k / w, k % w, (h, w), (fh, fw))
    }
}

/// Where cell `(i, j)` of an `h x w` map lands in an `fh x fw` frame under the
/// align-corners rule; a single row or column maps to the frame centre.
pub fn map_to_frame(i: usize, j: usize, (h, w): (usize, usize), (fh, fw): (usize, usize)) -> (f64, f64) {
    let axis = |k: usize, n: usize, f: usize| {
        if n == 1 {
            (f - 1) as f64 / 2.0
        } else {
            k as f64 * (f - 1) as f64 / (n - 1) as f64
        }
    };
    (axis(i, h, fh), axis(j, w, fw))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepRecord {
    pub step: usize,
    pub action: usize,
    pub reward: f64,
    /// Channel name to `[y, x]` frame coordinates of its argmax cell.
    pub argmax: Vec<(String, [f64; 2])>,
    pub files: Vec<String>,
}

/// What an export wrote.
#[derive(Clone, Debug, PartialEq)]
pub struct ExportManifest {
    pub manifest: PathBuf,
    pub images: Vec<PathBuf>,
    pub steps: Vec<StepRecord>,
}

/// Replays one greedy episode (environment seeded with `seed`) and writes, for
/// every step and every requested channel plus the aggregate: a PPM overlay
/// on the newest frame and a PGM of the normalized map at its native size.
/// `manifest.jsonl` holds one [`StepRecord`] per line.
pub fn export_episode(
    net: &Network,
    env_cfg: &EnvConfig,
    seed: u64,
    out_dir: &Path,
    channels: &[usize],
    alpha: f64,
) -> Result<ExportManifest> {
    let channel_count = net.spec().final_maps()?[0];
    if let Some(&bad) = channels.iter().find(|&&c| c >= channel_count) {
        return Err(Error::InvalidArgument(format!("channel {bad} out of range 0..{channel_count}")));
    }
    fs::create_dir_all(out_dir)?;
    let mut env = Env::new(EnvConfig {
        seed,
        ..env_cfg.clone()
    })?;
    let ids: Vec<ChannelId> = channels
        .iter()
        .map(|&c| ChannelId::Index(c))
        .chain(std::iter::once(ChannelId::Aggregate))
        .collect();

    let mut obs = env.observation();
    let mut steps = Vec::new();
    let mut images = Vec::new();
    for step in 0.. {
        let rec = net.forward(&obs.tensor(), true)?;
        let maps = rec.pre_pool_maps.expect("captured");
        let action = first_argmax(rec.q_values.values());
        let frame = obs.newest().to_tensor();
        let mut argmax = Vec::new();
        let mut files = Vec::new();
        for &id in &ids {
            let hm = HeatmapFrame::build(&maps, id, &frame, alpha)?;
            let (y, x) = hm.argmax_frame_coords();
            argmax.push((id.to_string(), [y, x]));
            let stem = format!("step_{step:04}_{id}");
            let (fh, fw) = (frame.shape()[0], frame.shape()[1]);
            let ppm = out_dir.join(format!("{stem}.ppm"));
            write_ppm_unit(BufWriter::new(File::create(&ppm)?), fh, fw, hm.overlay.values())?;
            let pgm = out_dir.join(format!("{stem}.pgm"));
            let (h, w) = (hm.normalized.shape()[0], hm.normalized.shape()[1]);
            write_pgm_unit(BufWriter::new(File::create(&pgm)?), h, w, hm.normalized.values())?;
            for p in [ppm, pgm] {
                files.push(p.file_name().unwrap().to_string_lossy().into_owned());
                images.push(p);
            }
        }
        let result = env.step(action)?;
        steps.push(StepRecord {
            step,
            action,
            reward: result.reward,
            argmax,
            files,
        });
        if result.terminal {
            break;
        }
        obs = result.observation;
    }

    let manifest = out_dir.join("manifest.jsonl");
    let mut out = BufWriter::new(File::create(&manifest)?);
    for s in &steps {
        serde_json::to_writer(&mut out, &step_json(s))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(ExportManifest {
        manifest,
        images,
        steps,
    })
}

fn step_json(s: &StepRecord) -> serde_json::Value {
    let argmax: serde_json::Map<String, serde_json::Value> = s
        .argmax
        .iter()
        .map(|(k, v)| (k.clone(), serde_json::json!(v)))
        .collect();
    serde_json::json!({
        "step": s.step,
        "action": s.action,
        "reward": s.reward,
        "argmax": argmax,
        "files": s.files,
    })
}

/// Where one heatmap's peak landed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Fixation {
    /// Within the Chebyshev radius of the ball's or the paddle's box.
    pub on_entity: bool,
    /// Inside the score strip.
    pub on_score_strip: bool,
}

fn chebyshev_to_box(y: usize, x: usize, (y0, x0, y1, x1): (usize, usize, usize, usize)) -> usize {
    let dy = if y < y0 { y0 - y } else { y.saturating_sub(y1) };
    let dx = if x < x0 { x0 - x } else { x.saturating_sub(x1) };
    dy.max(dx)
}

/// Classifies the (first) argmax pixel of a frame-sized heatmap.
pub fn fixation(heat: &Tensor, cfg: &EnvConfig, state: &GameState, radius: usize) -> Result<Fixation> {
    let (h, w) = plane_dims(heat, "heatmap")?;
    if (h, w) != (cfg.render_h, cfg.render_w) {
        return shape_err(format!("heatmap {h}x{w} does not match the {}x{} render", cfg.render_h, cfg.render_w));
    }
    let k = first_argmax(heat.values());
    let (y, x) = (k / w, k % w);
    Ok(Fixation {
        on_entity: entity_boxes(cfg, state)
            .iter()
            .any(|&b| chebyshev_to_box(y, x, b) <= radius),
        on_score_strip: cfg.draw_score && y < SCORE_STRIP_ROWS.min(h),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalizationScore {
    pub steps: usize,
    /// Fraction of steps whose aggregate peak is near the ball or paddle.
    pub on_entity: f64,
    /// Fraction of steps whose aggregate peak is in the score strip
    /// (only when the strip is drawn).
    pub on_score_strip: Option<f64>,
}

/// Greedy episodes, one per seed; every step's aggregate heatmap is classified
/// by [`fixation`]. Episodes run in parallel and are reduced in seed order.
pub fn localization_score(net: &Network, env_cfg: &EnvConfig, seeds: &[u64], radius: usize) -> Result<LocalizationScore> {
    let per_episode: Vec<Vec<Fixation>> = seeds
        .par_iter()
        .map(|&seed| {
            let mut env = Env::new(EnvConfig {
                seed,
                ..env_cfg.clone()
            })?;
            let mut obs = env.observation();
            let mut out = Vec::new();
            loop {
                let rec = net.forward(&obs.tensor(), true)?;
                let maps = rec.pre_pool_maps.expect("captured");
                let normalized = normalize_map(&aggregate_map(&maps)?)?;
                let heat = bilinear_upsample(&normalized, env_cfg.render_h, env_cfg.render_w)?;
                out.push(fixation(&heat, env_cfg, env.state(), radius)?);
                let step = env.step(first_argmax(rec.q_values.values()))?;
                if step.terminal {
                    return Ok(out);
                }
                obs = step.observation;
            }
        })
        .collect::<Result<_>>()?;
    let all: Vec<Fixation> = per_episode.into_iter().flatten().collect();
    let n = all.len();
    let frac = |pred: fn(&Fixation) -> bool| if n == 0 { 0.0 } else { all.iter().filter(|f| pred(f)).count() as f64 / n as f64 };
    Ok(LocalizationScore {
        steps: n,
        on_entity: frac(|f| f.on_entity),
        on_score_strip: env_cfg.draw_score.then(|| frac(|f| f.on_score_strip)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::CatchState;
    use crate::net::{Arch, NetworkSpec};
    use crate::rng::SplitMix64;

    fn t(shape: &[usize], v: &[f64]) -> Tensor {
        Tensor::from_vec(shape, v.to_vec()).unwrap()
    }

    #[test]
    fn normalize_examples() {
        let n = normalize_map(&t(&[2, 2], &[0.0, 5.0, 10.0, 5.0])).unwrap();
        assert_eq!(n.values(), &[0.0, 0.5, 1.0, 0.5]);
        let c = normalize_map(&t(&[2, 3], &[4.0; 6])).unwrap();
        assert!(c.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn normalize_random_hits_unit_extrema_and_is_idempotent() {
        let mut rng = SplitMix64::new(77);
        let raw = t(&[5, 7], &(0..35).map(|_| rng.uniform(-3.0, 8.0)).collect::<Vec<_>>());
        let n = normalize_map(&raw).unwrap();
        let lo = n.values().iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = n.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(lo.abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
        let again = normalize_map(&n).unwrap();
        for (a, b) in again.values().iter().zip(n.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn bilinear_closed_form_four_by_four() {
        let up = bilinear_upsample(&t(&[2, 2], &[0.0, 1.0, 2.0, 3.0]), 4, 4).unwrap();
        let expect = [
            [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0],
            [2.0 / 3.0, 1.0, 4.0 / 3.0, 5.0 / 3.0],
            [4.0 / 3.0, 5.0 / 3.0, 2.0, 7.0 / 3.0],
            [2.0, 7.0 / 3.0, 8.0 / 3.0, 3.0],
        ];
        for i in 0..4 {
            for j in 0..4 {
                assert!((up.at(&[i, j]) - expect[i][j]).abs() < 1e-12, "({i},{j})");
            }
        }
    }

    #[test]
    fn bilinear_reproduces_bilinear_functions() {
        let (a, b, c, d) = (0.7, -1.3, 0.25, 2.0);
        let f = |y: f64, x: f64| a * x + b * y + c * x * y + d;
        let (h, w, oh, ow) = (3, 4, 11, 13);
        let src: Vec<f64> = (0..h * w).map(|k| f((k / w) as f64, (k % w) as f64)).collect();
        let up = bilinear_upsample(&t(&[h, w], &src), oh, ow).unwrap();
        for i in 0..oh {
            for j in 0..ow {
                let (sy, sx) = (source_coord(i, h, oh), source_coord(j, w, ow));
                assert!((up.at(&[i, j]) - f(sy, sx)).abs() < 1e-12);
            }
        }
        assert_eq!(up.at(&[0, 0]), src[0]);
        assert_eq!(up.at(&[oh - 1, ow - 1]), src[h * w - 1]);
        assert_eq!(up.at(&[0, ow - 1]), src[w - 1]);
        assert_eq!(up.at(&[oh - 1, 0]), src[(h - 1) * w]);
    }

    #[test]
    fn bilinear_constant_and_single_cell() {
        let up = bilinear_upsample(&t(&[2, 3], &[0.4; 6]), 5, 9).unwrap();
        assert!(up.values().iter().all(|&v| (v - 0.4).abs() < 1e-15));
        let one = bilinear_upsample(&t(&[1, 1], &[0.9]), 4, 4).unwrap();
        assert!(one.values().iter().all(|&v| v == 0.9));
        assert!(bilinear_upsample(&t(&[3, 3], &[0.0; 9]), 2, 5).is_err());
    }

    #[test]
    fn overlay_examples() {
        let frame = t(&[1, 2], &[0.6, 0.0]);
        let zero = t(&[1, 2], &[0.0, 0.0]);
        let o = overlay(&frame, &zero, 0.5).unwrap();
        assert_eq!(o.values(), &[0.3, 0.3, 0.3, 0.0, 0.0, 0.0]);
        let red = overlay(&t(&[1, 1], &[0.0]), &t(&[1, 1], &[1.0]), 1.0).unwrap();
        assert_eq!(red.values(), &[1.0, 0.0, 0.0]);
        let mid = overlay(&t(&[1, 1], &[0.2]), &t(&[1, 1], &[0.7]), 0.3).unwrap();
        let expect = [0.3 * 0.7 + 0.7 * 0.2, 0.7 * 0.2, 0.7 * 0.2];
        for (a, b) in mid.values().iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn overlay_stays_in_unit_range() {
        let mut rng = SplitMix64::new(3);
        for _ in 0..50 {
            let g: Vec<f64> = (0..12).map(|_| rng.next_f64()).collect();
            let m: Vec<f64> = (0..12).map(|_| rng.next_f64()).collect();
            let o = overlay(&t(&[3, 4], &g), &t(&[3, 4], &m), rng.next_f64()).unwrap();
            assert!(o.values().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn aggregate_is_channel_max() {
        let maps = t(&[2, 1, 3], &[1.0, 5.0, 0.0, 2.0, 4.0, 0.5]);
        assert_eq!(aggregate_map(&maps).unwrap().values(), &[2.0, 5.0, 0.5]);
    }

    #[test]
    fn argmax_maps_through_align_corners() {
        assert_eq!(map_to_frame(1, 0, (2, 2), (44, 44)), (43.0, 0.0));
        assert_eq!(map_to_frame(0, 0, (1, 1), (40, 40)), (19.5, 19.5));
        let maps = t(&[1, 2, 2], &[0.0, 0.0, 0.0, 3.0]);
        let frame = Tensor::zeros(&[44, 44]);
        let hm = HeatmapFrame::build(&maps, ChannelId::Aggregate, &frame, DEFAULT_ALPHA).unwrap();
        assert_eq!(hm.argmax_frame_coords(), (43.0, 43.0));
        // The upsampled peak sits exactly where the raw argmax cell maps.
        let k = first_argmax(hm.upsampled.values());
        assert_eq!((k / 44, k % 44), (43, 43));
    }

    #[test]
    fn injected_ball_heatmap_scores_one() {
        let cfg = EnvConfig::catch();
        let state = GameState::Catch(CatchState { ball: (4, 3), paddle: 7 });
        let [(y0, x0, y1, x1), _] = entity_boxes(&cfg, &state);
        let mut heat = Tensor::zeros(&[cfg.render_h, cfg.render_w]);
        for y in y0..=y1 {
            for x in x0..=x1 {
                heat.set(&[y, x], 1.0);
            }
        }
        let f = fixation(&heat, &cfg, &state, 0).unwrap();
        assert!(f.on_entity && !f.on_score_strip);
        let mut far = Tensor::zeros(&[cfg.render_h, cfg.render_w]);
        far.set(&[0, cfg.render_w - 1], 1.0);
        assert!(!fixation(&far, &cfg, &state, 4).unwrap().on_entity);
        let scored = EnvConfig { draw_score: true, ..cfg.clone() };
        assert!(fixation(&far, &scored, &state, 4).unwrap().on_score_strip);
    }

    fn tiny() -> (EnvConfig, Network) {
        let cfg = EnvConfig {
            grid_h: 6,
            grid_w: 6,
            render_h: 44,
            render_w: 44,
            frame_stack: 2,
            ..EnvConfig::catch()
        };
        let net = Network::build(&NetworkSpec::new(Arch::MaxHalved, cfg.observation_shape(), 3), 8).unwrap();
        (cfg, net)
    }

    #[test]
    fn export_counts_and_determinism() {
        let (cfg, net) = tiny();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ma = export_episode(&net, &cfg, 4, &a.path().join("new"), &[0, 5], DEFAULT_ALPHA).unwrap();
        let mb = export_episode(&net, &cfg, 4, b.path(), &[0, 5], DEFAULT_ALPHA).unwrap();
        assert_eq!(ma.steps.len(), cfg.grid_h - 1);
        assert_eq!(ma.images.len(), ma.steps.len() * 3 * 2);
        for (pa, pb) in ma.images.iter().zip(&mb.images) {
            assert_eq!(fs::read(pa).unwrap(), fs::read(pb).unwrap());
        }
        let manifest = fs::read_to_string(&ma.manifest).unwrap();
        assert_eq!(manifest, fs::read_to_string(&mb.manifest).unwrap());
        let first: serde_json::Value = serde_json::from_str(manifest.lines().next().unwrap()).unwrap();
        assert_eq!(first["step"], 0);
        assert!(first["argmax"]["aggregate"].is_array());
        assert!(first["argmax"]["c005"].is_array());
        assert!(export_episode(&net, &cfg, 4, a.path(), &[32], DEFAULT_ALPHA).is_err());
    }

    #[test]
    fn flatten_tail_networks_export_too() {
        let (cfg, _) = tiny();
        let net = Network::build(&NetworkSpec::new(Arch::Expert, cfg.observation_shape(), 3), 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        assert!(export_episode(&net, &cfg, 1, dir.path(), &[], DEFAULT_ALPHA).is_ok());
    }

    #[test]
    fn localization_score_is_a_fraction() {
        let (cfg, net) = tiny();
        let s = localization_score(&net, &cfg, &[1, 2, 3], 4).unwrap();
        assert_eq!(s.steps, 3 * (cfg.grid_h - 1));
        assert!((0.0..=1.0).contains(&s.on_entity));
        assert!(s.on_score_strip.is_none());
        let scored = EnvConfig { draw_score: true, ..cfg };
        assert!(localization_score(&net, &scored, &[1], 4).unwrap().on_score_strip.is_some());
    }
}
