//! Per-episode trajectory files: concatenated binary PGM frames plus a JSON sidecar.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::Frame;
use crate::error::Result;
use crate::netpbm::write_pgm;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub episode: usize,
    pub frames: usize,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
}

/// Writes `episode_<k>.pgm` (one P5 image per frame, back to back) and
/// `episode_<k>.json`. Returns both paths.
pub fn dump_trajectory(
    dir: &Path,
    episode: usize,
    frames: &[Frame],
    actions: &[usize],
    rewards: &[f64],
) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let pgm = dir.join(format!("episode_{episode:04}.pgm"));
    let mut out = BufWriter::new(File::create(&pgm)?);
    for f in frames {
        write_pgm(&mut out, f.h, f.w, &f.pixels)?;
    }
    out.flush()?;
    let json = dir.join(format!("episode_{episode:04}.json"));
    let record = TrajectoryRecord {
        episode,
        frames: frames.len(),
        actions: actions.to_vec(),
        rewards: rewards.to_vec(),
    };
    fs::write(&json, serde_json::to_vec_pretty(&record)?)?;
    Ok((pgm, json))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_frames_and_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let f = Frame { h: 2, w: 2, pixels: vec![0, 85, 170, 255] };
        let (pgm, json) = dump_trajectory(dir.path(), 3, &[f.clone(), f], &[1], &[0.0]).unwrap();
        let bytes = fs::read(pgm).unwrap();
        assert_eq!(bytes.len(), 2 * (11 + 4));
        let rec: TrajectoryRecord = serde_json::from_slice(&fs::read(json).unwrap()).unwrap();
        assert_eq!(rec.frames, 2);
        assert_eq!(rec.actions, vec![1]);
    }
}
