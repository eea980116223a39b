//! Deep Q-learning with experience replay and a periodically synced target
//! network.

use serde::{Deserialize, Serialize};

use super::eval::act_epsilon_greedy;
use super::log::{summarize, EvalLog, EvalRow, Phase};
use super::protocol::Selection;
use super::replay::{ReplayBuffer, Transition};
use crate::env::{Env, EnvConfig, Observation};
use crate::error::{Error, Result};
use crate::kernel::{huber_loss, RmsProp, RmsPropConfig};
use crate::net::{Checkpoint, CheckpointMeta, Network, NetworkSpec};
use crate::rng::SplitMix64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DqnConfig {
    pub gamma: f64,
    pub optimizer: RmsPropConfig,
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// Environment steps collected before the first update.
    pub learn_start: u64,
    /// One gradient step every `train_every` environment steps.
    pub train_every: u64,
    /// Target network refresh period, in environment steps.
    pub target_sync: u64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of `iterations` over which epsilon decays linearly.
    pub epsilon_fraction: f64,
    /// Environment steps.
    pub iterations: u64,
    pub eval_interval: u64,
    pub eval_episodes: usize,
    pub final_eval_episodes: usize,
    pub eval_epsilon: f64,
    pub huber_delta: f64,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            optimizer: RmsPropConfig::desk(),
            batch_size: 32,
            replay_capacity: 50_000,
            learn_start: 1_000,
            train_every: 4,
            target_sync: 1_000,
            epsilon_start: 1.0,
            epsilon_end: 0.1,
            epsilon_fraction: 0.1,
            iterations: 50_000,
            eval_interval: 2_000,
            eval_episodes: 10,
            final_eval_episodes: 100,
            eval_epsilon: 0.05,
            huber_delta: 1.0,
        }
    }
}

pub(crate) fn check_schedule(iterations: u64, eval_interval: u64) -> Result<()> {
    if eval_interval == 0 || iterations % eval_interval != 0 {
        return Err(Error::Config(format!(
            "eval_interval ({eval_interval}) must be positive and divide iterations ({iterations})"
        )));
    }
    Ok(())
}

pub(crate) fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")));
    }
    Ok(())
}

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        check_probability("gamma", self.gamma)?;
        check_probability("epsilon_start", self.epsilon_start)?;
        check_probability("epsilon_end", self.epsilon_end)?;
        check_probability("epsilon_fraction", self.epsilon_fraction)?;
        check_probability("eval_epsilon", self.eval_epsilon)?;
        check_schedule(self.iterations, self.eval_interval)?;
        if self.batch_size == 0 || self.replay_capacity == 0 || self.train_every == 0 || self.target_sync == 0 {
            return Err(Error::Config(
                "batch_size, replay_capacity, train_every and target_sync must be positive".into(),
            ));
        }
        if self.eval_episodes == 0 || self.final_eval_episodes == 0 {
            return Err(Error::Config("evaluation episode counts must be positive".into()));
        }
        if !(self.huber_delta > 0.0) {
            return Err(Error::Config("huber_delta must be positive".into()));
        }
        Ok(())
    }

    /// Linear decay from `epsilon_start` to `epsilon_end` over the first
    /// `epsilon_fraction * iterations` steps, then constant.
    pub fn epsilon_at(&self, step: u64) -> f64 {
        let span = self.epsilon_fraction * self.iterations as f64;
        if span <= 0.0 || step as f64 >= span {
            return self.epsilon_end;
        }
        let t = step as f64 / span;
        self.epsilon_start + t * (self.epsilon_end - self.epsilon_start)
    }
}

/// `y = r` for terminal transitions, else `r + gamma * max_a' Q_target(s', a')`.
pub fn td_targets(rewards: &[f64], terminals: &[bool], next_q: &[f64], actions: usize, gamma: f64) -> Vec<f64> {
    rewards
        .iter()
        .zip(terminals)
        .enumerate()
        .map(|(i, (&r, &done))| {
            if done {
                r
            } else {
                let row = &next_q[i * actions..(i + 1) * actions];
                r + gamma * row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            }
        })
        .collect()
}

/// One minibatch update of `online` towards targets formed by `target`.
/// Returns the mean Huber loss over the batch (before the update).
pub fn q_learning_step(
    online: &mut Network,
    target: &Network,
    batch: &[&Transition],
    cfg: &DqnConfig,
    opt: &mut RmsProp,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty minibatch".into()));
    }
    let a = online.num_actions();
    let states: Vec<&Observation> = batch.iter().map(|t| &t.state).collect();
    let nexts: Vec<&Observation> = batch.iter().map(|t| &t.next_state).collect();
    let rewards: Vec<f64> = batch.iter().map(|t| t.reward).collect();
    let terminals: Vec<bool> = batch.iter().map(|t| t.terminal).collect();

    let next_q = target.q_values(&Observation::batch_tensor(&nexts)?)?;
    let y = td_targets(&rewards, &terminals, next_q.values(), a, cfg.gamma);

    online.zero_grad();
    let mut tape = online.forward_train(&Observation::batch_tensor(&states)?)?;
    let n = batch.len() as f64;
    let mut dq = vec![0.0; batch.len() * a];
    let mut total = 0.0;
    for (i, t) in batch.iter().enumerate() {
        if t.action >= a {
            return Err(Error::InvalidArgument(format!("action {} out of range 0..{a}", t.action)));
        }
        let (loss, d) = huber_loss(tape.q().values()[i * a + t.action], y[i], cfg.huber_delta);
        total += loss;
        dq[i * a + t.action] = d / n;
    }
    online.backward(&mut tape, &dq, false)?;
    opt.step(&mut online.params_mut())?;
    Ok(total / n)
}

pub fn sync_target(target: &mut Network, online: &Network) -> Result<()> {
    target.copy_params_from(online)
}

/// Result of a training run.
pub struct TrainOutcome {
    /// Best checkpoint by periodic evaluation (earliest wins ties).
    pub best: Checkpoint,
    pub log: EvalLog,
    /// Per-episode returns of the best checkpoint's final evaluation.
    pub final_rewards: Vec<f64>,
    /// `(iteration, loss)` of every minibatch update, in order.
    pub losses: Vec<(u64, f64)>,
}

/// Seed streams of one run, all derived from the run seed.
pub(crate) struct RunSeeds {
    pub net: u64,
    pub env: u64,
    pub replay: u64,
    pub act: u64,
    pub eval: u64,
}

impl RunSeeds {
    pub fn new(seed: u64) -> Self {
        Self {
            net: SplitMix64::derive(seed, 1),
            env: SplitMix64::derive(seed, 2),
            replay: SplitMix64::derive(seed, 3),
            act: SplitMix64::derive(seed, 4),
            eval: SplitMix64::derive(seed, 5),
        }
    }
}

/// Seed of a run's evaluation streams: periodic evaluation `k` uses
/// `derive(run_eval_seed(seed), k)` and the final evaluation `k = 0`.
pub fn run_eval_seed(seed: u64) -> u64 {
    RunSeeds::new(seed).eval
}

/// Median loss of each consecutive `window`-iteration block `[k*window, (k+1)*window)`
/// that saw at least one update, up to the last update.
pub fn window_medians(losses: &[(u64, f64)], window: u64) -> Vec<f64> {
    assert!(window > 0, "window must be positive");
    let Some(&(last, _)) = losses.last() else {
        return Vec::new();
    };
    (0..=last / window)
        .filter_map(|k| {
            let mut w: Vec<f64> = losses
                .iter()
                .filter(|(i, _)| i / window == k)
                .map(|&(_, l)| l)
                .collect();
            if w.is_empty() {
                return None;
            }
            w.sort_by(f64::total_cmp);
            let m = w.len() / 2;
            Some(if w.len() % 2 == 1 { w[m] } else { (w[m - 1] + w[m]) / 2.0 })
        })
        .collect()
}

/// Mean return and episode count of training episodes finished in an interval.
pub(crate) fn train_row(iter: u64, returns: &[f64], epsilon: f64, losses: &[f64], wall_s: f64) -> EvalRow {
    let (mean, std) = summarize(returns);
    EvalRow {
        iter,
        phase: Phase::Train,
        episodes: returns.len(),
        mean_reward: mean,
        std_reward: std,
        epsilon,
        loss_mean: (!losses.is_empty()).then(|| summarize(losses).0),
        wall_s,
        kl_loss_mean: None,
    }
}

/// Trains a Q-network from scratch. `on_row` sees every log row as it is made.
pub fn train_expert(
    env_cfg: &EnvConfig,
    spec: &NetworkSpec,
    cfg: &DqnConfig,
    seed: u64,
    on_row: &mut dyn FnMut(&EvalRow),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    env_cfg.validate()?;
    spec.validate()?;
    if spec.input != env_cfg.observation_shape() {
        return Err(Error::Shape(format!(
            "network input {:?} does not match observations {:?}",
            spec.input,
            env_cfg.observation_shape()
        )));
    }
    let seeds = RunSeeds::new(seed);
    let mut online = Network::build(spec, seeds.net)?;
    let initial = online.clone();
    let mut target = online.clone();
    let mut opt = RmsProp::new(cfg.optimizer);
    let mut replay = ReplayBuffer::new(cfg.replay_capacity, seeds.replay);
    let mut act_rng = SplitMix64::new(seeds.act);
    let mut env = Env::new(EnvConfig {
        seed: seeds.env,
        ..env_cfg.clone()
    })?;
    let meta = CheckpointMeta {
        iterations: 0,
        seed,
        environment: env_cfg.id(),
        note: format!("dqn {}", spec.arch().name()),
    };
    let mut selection = Selection::new(env_cfg, cfg.eval_episodes, cfg.eval_epsilon, seeds.eval, meta);
    let mut log = EvalLog::new(false);
    let mut losses = Vec::new();
    let mut interval_losses = Vec::new();
    let mut interval_returns = Vec::new();
    let mut episode_return = 0.0;
    let mut obs = env.observation();

    for iter in 1..=cfg.iterations {
        let epsilon = cfg.epsilon_at(iter - 1);
        let action = act_epsilon_greedy(&online, &obs, epsilon, &mut act_rng)?;
        let step = env.step(action)?;
        episode_return += step.reward;
        let next = if step.terminal {
            interval_returns.push(episode_return);
            episode_return = 0.0;
            env.reset()
        } else {
            step.observation.clone()
        };
        replay.push(Transition {
            state: obs,
            action,
            reward: step.reward,
            next_state: step.observation,
            terminal: step.terminal,
        });
        obs = next;

        if iter >= cfg.learn_start && iter % cfg.train_every == 0 {
            let batch = replay.sample(cfg.batch_size);
            let loss = q_learning_step(&mut online, &target, &batch, cfg, &mut opt)?;
            losses.push((iter, loss));
            interval_losses.push(loss);
        }
        if iter % cfg.target_sync == 0 {
            sync_target(&mut target, &online)?;
        }
        if iter % cfg.eval_interval == 0 {
            let row = train_row(iter, &interval_returns, epsilon, &interval_losses, selection.wall());
            on_row(&row);
            log.push(row);
            let loss_mean = (!interval_losses.is_empty()).then(|| summarize(&interval_losses).0);
            let row = selection.checkpoint(&online, iter, cfg.eval_epsilon, loss_mean)?;
            on_row(&row);
            log.push(row);
            interval_returns.clear();
            interval_losses.clear();
        }
    }

    let (best, final_rewards, row) = selection.finish(&initial, cfg.iterations, cfg.final_eval_episodes)?;
    on_row(&row);
    log.push(row);
    Ok(TrainOutcome {
        best,
        log,
        final_rewards,
        losses,
    })
}
