//! Periodic evaluation with best-checkpoint selection and the final
//! re-evaluation of the selected checkpoint.

use std::time::Instant;

use super::eval::evaluate;
use super::log::{summarize, EvalRow, Phase};
use crate::env::EnvConfig;
use crate::error::Result;
use crate::net::{Checkpoint, CheckpointMeta, Network};
use crate::rng::SplitMix64;

pub(crate) struct Selection {
    env: EnvConfig,
    eval_episodes: usize,
    eval_epsilon: f64,
    seed: u64,
    meta: CheckpointMeta,
    best: Option<(f64, Checkpoint)>,
    evals: u64,
    started: Instant,
}

impl Selection {
    pub fn new(env: &EnvConfig, eval_episodes: usize, eval_epsilon: f64, seed: u64, meta: CheckpointMeta) -> Self {
        Self {
            env: env.clone(),
            eval_episodes,
            eval_epsilon,
            seed,
            meta,
            best: None,
            evals: 0,
            started: Instant::now(),
        }
    }

    pub fn wall(&self) -> f64 {
        self.started.elapsed().as_secs_f64()
    }

    /// Evaluates the f32-quantized network (what a checkpoint would hold) and
    /// keeps it when its mean strictly beats the best so far.
    pub fn checkpoint(&mut self, net: &Network, iter: u64, epsilon: f64, loss_mean: Option<f64>) -> Result<EvalRow> {
        let mut meta = self.meta.clone();
        meta.iterations = iter;
        let ckpt = Checkpoint::from_network(net, meta);
        let quantized = ckpt.to_network()?;
        self.evals += 1;
        let seed = SplitMix64::derive(self.seed, self.evals);
        let rewards = evaluate(&quantized, &self.env, self.eval_episodes, self.eval_epsilon, seed)?;
        let (mean, std) = summarize(&rewards);
        if self.best.as_ref().map_or(true, |(b, _)| mean > *b) {
            self.best = Some((mean, ckpt));
        }
        Ok(EvalRow {
            iter,
            phase: Phase::Eval,
            episodes: rewards.len(),
            mean_reward: mean,
            std_reward: std,
            epsilon,
            loss_mean,
            wall_s: self.wall(),
            kl_loss_mean: None,
        })
    }

    /// Best checkpoint (the initial network if nothing was evaluated), its
    /// final-evaluation returns, and the matching log row.
    pub fn finish(self, initial: &Network, iter: u64, final_episodes: usize) -> Result<(Checkpoint, Vec<f64>, EvalRow)> {
        let ckpt = match self.best {
            Some((_, c)) => c,
            None => {
                let mut meta = self.meta.clone();
                meta.iterations = 0;
                Checkpoint::from_network(initial, meta)
            }
        };
        let net = ckpt.to_network()?;
        let rewards = final_evaluation(&net, &self.env, final_episodes, self.eval_epsilon, self.seed)?;
        let (mean, std) = summarize(&rewards);
        let row = EvalRow {
            iter,
            phase: Phase::Final,
            episodes: rewards.len(),
            mean_reward: mean,
            std_reward: std,
            epsilon: self.eval_epsilon,
            loss_mean: None,
            wall_s: self.started.elapsed().as_secs_f64(),
            kl_loss_mean: None,
        };
        Ok((ckpt, rewards, row))
    }
}

/// The final-evaluation episode stream for a run seed.
pub fn final_evaluation(net: &Network, env: &EnvConfig, episodes: usize, epsilon: f64, seed: u64) -> Result<Vec<f64>> {
    evaluate(net, env, episodes, epsilon, SplitMix64::derive(seed, 0))
}
