//! Policy distillation: a student network is trained to match a frozen
//! expert's temperature-softened policy on states visited by the student's
//! own sampled policy.

use serde::{Deserialize, Serialize};

use crate::env::{Env, EnvConfig, Observation};
use crate::error::{Error, Result};
use crate::kernel::{kl_to_softmax, softmax_temperature, PolicyDistribution, RmsProp, RmsPropConfig};
use crate::net::{CheckpointMeta, Network, NetworkSpec};
use crate::rng::SplitMix64;
use crate::train::protocol::Selection;
use crate::train::{check_probability, check_schedule, summarize, train_row, EvalLog, ReplayBuffer, RunSeeds, TrainOutcome};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistillConfig {
    pub tau_expert: f64,
    /// Temperature of the student policy, for both the loss and action sampling.
    pub tau_student: f64,
    pub optimizer: RmsPropConfig,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub learn_start: u64,
    pub train_every: u64,
    /// Environment steps.
    pub iterations: u64,
    pub eval_interval: u64,
    pub eval_episodes: usize,
    pub final_eval_episodes: usize,
    pub eval_epsilon: f64,
}

impl Default for DistillConfig {
    fn default() -> Self {
        Self {
            tau_expert: 1.0,
            tau_student: 1.0,
            optimizer: RmsPropConfig::desk(),
            batch_size: 32,
            replay_capacity: 50_000,
            learn_start: 1_000,
            train_every: 4,
            iterations: 100_000,
            eval_interval: 2_000,
            eval_episodes: 10,
            final_eval_episodes: 100,
            eval_epsilon: 0.05,
        }
    }
}

impl DistillConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, tau) in [("tau_expert", self.tau_expert), ("tau_student", self.tau_student)] {
            if !(tau > 0.0) || !tau.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {tau}")));
            }
        }
        check_probability("eval_epsilon", self.eval_epsilon)?;
        check_schedule(self.iterations, self.eval_interval)?;
        if self.batch_size == 0 || self.replay_capacity == 0 || self.train_every == 0 {
            return Err(Error::Config("batch_size, replay_capacity and train_every must be positive".into()));
        }
        if self.eval_episodes == 0 || self.final_eval_episodes == 0 {
            return Err(Error::Config("evaluation episode counts must be positive".into()));
        }
        Ok(())
    }
}

/// `softmax(Q_expert(s) / tau)`.
pub fn expert_policy(expert: &Network, observation: &Observation, tau: f64) -> Result<PolicyDistribution> {
    let q = expert.forward(&observation.tensor(), false)?.q_values;
    softmax_temperature(q.values(), tau)
}

/// One inverse-CDF draw from `softmax(Q_student(s) / tau)`; consumes exactly
/// one uniform from `rng`.
pub fn sample_student_action(student: &Network, observation: &Observation, tau: f64, rng: &mut SplitMix64) -> Result<usize> {
    let u = rng.next_f64();
    let q = student.forward(&observation.tensor(), false)?.q_values;
    Ok(softmax_temperature(q.values(), tau)?.sample_with(u))
}

/// Mean KL over the batch between the expert's and the student's policies,
/// with its gradient accumulated into the student's (zeroed) gradient planes.
/// Returns `(loss, gradient L2 norm)`; no parameter is changed.
pub fn distill_gradient(
    student: &mut Network,
    expert: &Network,
    batch: &[&Observation],
    cfg: &DistillConfig,
) -> Result<(f64, f64)> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty minibatch".into()));
    }
    check_pair(expert, student)?;
    let states = Observation::batch_tensor(batch)?;
    let expert_q = expert.q_values(&states)?;
    let a = student.num_actions();
    let n = batch.len() as f64;

    student.zero_grad();
    let mut tape = student.forward_train(&states)?;
    let mut dq = vec![0.0; batch.len() * a];
    let mut total = 0.0;
    for i in 0..batch.len() {
        let target = softmax_temperature(&expert_q.values()[i * a..(i + 1) * a], cfg.tau_expert)?;
        let (loss, grad) = kl_to_softmax(&target, &tape.q().values()[i * a..(i + 1) * a], cfg.tau_student)?;
        total += loss;
        for (d, g) in dq[i * a..(i + 1) * a].iter_mut().zip(grad) {
            *d = g / n;
        }
    }
    student.backward(&mut tape, &dq, false)?;
    Ok((total / n, student.grad_norm()))
}

/// One optimizer step on the student; returns the batch loss before the step.
/// Expert targets are recomputed from the frozen expert for every batch.
pub fn distill_step(
    student: &mut Network,
    expert: &Network,
    batch: &[&Observation],
    cfg: &DistillConfig,
    opt: &mut RmsProp,
) -> Result<f64> {
    let (loss, _) = distill_gradient(student, expert, batch, cfg)?;
    opt.step(&mut student.params_mut())?;
    Ok(loss)
}

fn check_pair(expert: &Network, student: &Network) -> Result<()> {
    if expert.num_actions() != student.num_actions() {
        return Err(Error::Config(format!(
            "expert has {} actions, student has {}",
            expert.num_actions(),
            student.num_actions()
        )));
    }
    if expert.spec().input != student.spec().input {
        return Err(Error::Shape(format!(
            "expert input {:?} differs from student input {:?}",
            expert.spec().input,
            student.spec().input
        )));
    }
    Ok(())
}

/// Distils `expert` into a freshly initialized `student_spec` network.
pub fn train_student(
    expert: &Network,
    student_spec: &NetworkSpec,
    env_cfg: &EnvConfig,
    cfg: &DistillConfig,
    seed: u64,
    on_row: &mut dyn FnMut(&crate::train::EvalRow),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    env_cfg.validate()?;
    student_spec.validate()?;
    let seeds = RunSeeds::new(seed);
    let mut student = Network::build(student_spec, seeds.net)?;
    check_pair(expert, &student)?;
    if student_spec.input != env_cfg.observation_shape() {
        return Err(Error::Shape(format!(
            "student input {:?} does not match observations {:?}",
            student_spec.input,
            env_cfg.observation_shape()
        )));
    }
    let initial = student.clone();
    let mut opt = RmsProp::new(cfg.optimizer);
    let mut replay: ReplayBuffer<Observation> = ReplayBuffer::new(cfg.replay_capacity, seeds.replay);
    let mut act_rng = SplitMix64::new(seeds.act);
    let mut env = Env::new(EnvConfig {
        seed: seeds.env,
        ..env_cfg.clone()
    })?;
    let meta = CheckpointMeta {
        iterations: 0,
        seed,
        environment: env_cfg.id(),
        note: format!("distilled {}", student_spec.arch().name()),
    };
    let mut selection = Selection::new(env_cfg, cfg.eval_episodes, cfg.eval_epsilon, seeds.eval, meta);
    let mut log = EvalLog::new(true);
    let mut losses = Vec::new();
    let mut interval_losses = Vec::new();
    let mut interval_returns = Vec::new();
    let mut episode_return = 0.0;
    let mut obs = env.observation();

    for iter in 1..=cfg.iterations {
        let action = sample_student_action(&student, &obs, cfg.tau_student, &mut act_rng)?;
        let step = env.step(action)?;
        episode_return += step.reward;
        replay.push(obs);
        obs = if step.terminal {
            interval_returns.push(episode_return);
            episode_return = 0.0;
            env.reset()
        } else {
            step.observation
        };

        if iter >= cfg.learn_start && iter % cfg.train_every == 0 {
            let batch = replay.sample(cfg.batch_size);
            let loss = distill_step(&mut student, expert, &batch, cfg, &mut opt)?;
            losses.push((iter, loss));
            interval_losses.push(loss);
        }
        if iter % cfg.eval_interval == 0 {
            let kl = (!interval_losses.is_empty()).then(|| summarize(&interval_losses).0);
            let mut row = train_row(iter, &interval_returns, 0.0, &[], selection.wall());
            row.kl_loss_mean = kl;
            on_row(&row);
            log.push(row);
            let mut row = selection.checkpoint(&student, iter, cfg.eval_epsilon, None)?;
            row.kl_loss_mean = kl;
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
