//! Evaluation log rows and their CSV form.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const EVAL_LOG_HEADER: &str = "iter,phase,episodes,mean_reward,std_reward,epsilon,loss_mean,wall_s";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    /// Training episodes finished since the previous row.
    Train,
    /// Periodic evaluation of the current network.
    Eval,
    /// Re-evaluation of the selected best checkpoint.
    Final,
}

impl Phase {
    fn as_str(self) -> &'static str {
        match self {
            Phase::Train => "train",
            Phase::Eval => "eval",
            Phase::Final => "final",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub iter: u64,
    pub phase: Phase,
    pub episodes: usize,
    pub mean_reward: f64,
    pub std_reward: f64,
    pub epsilon: f64,
    pub loss_mean: Option<f64>,
    pub wall_s: f64,
    /// Distillation runs only.
    pub kl_loss_mean: Option<f64>,
}

/// Arithmetic mean and population standard deviation (divisor `n`).
pub fn summarize(rewards: &[f64]) -> (f64, f64) {
    if rewards.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalLog {
    pub rows: Vec<EvalRow>,
    /// Adds the `kl_loss_mean` column.
    pub distill: bool,
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

impl EvalLog {
    pub fn new(distill: bool) -> Self {
        Self {
            rows: Vec::new(),
            distill,
        }
    }

    pub fn push(&mut self, row: EvalRow) {
        self.rows.push(row);
    }

    pub fn final_row(&self) -> Option<&EvalRow> {
        self.rows.iter().rev().find(|r| r.phase == Phase::Final)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(EVAL_LOG_HEADER);
        if self.distill {
            s.push_str(",kl_loss_mean");
        }
        s.push('\n');
        for r in &self.rows {
            let _ = write!(
                s,
                "{},{},{},{},{},{},{},{:.3}",
                r.iter,
                r.phase.as_str(),
                r.episodes,
                r.mean_reward,
                r.std_reward,
                r.epsilon,
                opt(r.loss_mean),
                r.wall_s
            );
            if self.distill {
                let _ = write!(s, ",{}", opt(r.kl_loss_mean));
            }
            s.push('\n');
        }
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// Equality of every logged number except wall-clock time.
    pub fn same_numbers(&self, other: &EvalLog) -> bool {
        let strip = |log: &EvalLog| -> Vec<EvalRow> {
            log.rows
                .iter()
                .cloned()
                .map(|mut r| {
                    r.wall_s = 0.0;
                    r
                })
                .collect()
        };
        self.distill == other.distill && bits(&strip(self)) == bits(&strip(other))
    }
}

/// Bit patterns so that NaN == NaN and -0.0 != 0.0.
fn bits(rows: &[EvalRow]) -> Vec<(u64, Phase, usize, [u64; 6])> {
    let b = |x: Option<f64>| x.map(f64::to_bits).unwrap_or(u64::MAX - 1);
    rows.iter()
        .map(|r| {
            (
                r.iter,
                r.phase,
                r.episodes,
                [
                    r.mean_reward.to_bits(),
                    r.std_reward.to_bits(),
                    r.epsilon.to_bits(),
                    b(r.loss_mean),
                    b(r.kl_loss_mean),
                    r.wall_s.to_bits(),
                ],
            )
        })
        .collect()
}
