//! Greedy/epsilon-greedy action selection and seeded evaluation episodes.

use rayon::prelude::*;

use crate::env::{Env, EnvConfig, Observation};
use crate::error::{Error, Result};
use crate::net::Network;
use crate::rng::SplitMix64;
use crate::tensor::first_argmax;

/// With probability `epsilon` a uniform random action, else the greedy one
/// (ties go to the lowest index). Always consumes one draw, plus one more
/// when exploring.
pub fn act_epsilon_greedy(net: &Network, obs: &Observation, epsilon: f64, rng: &mut SplitMix64) -> Result<usize> {
    let explore = rng.next_f64() < epsilon;
    if explore {
        return Ok(rng.bounded(net.num_actions()));
    }
    greedy_action(net, obs)
}

pub fn greedy_action(net: &Network, obs: &Observation) -> Result<usize> {
    let rec = net.forward(&obs.tensor(), false)?;
    Ok(first_argmax(rec.q_values.values()))
}

/// Seed of the environment used for evaluation episode `episode`.
pub fn episode_seed(seed: u64, episode: usize) -> u64 {
    SplitMix64::derive(seed, episode as u64)
}

/// Plays one epsilon-greedy episode; returns the undiscounted return.
pub fn run_episode(net: &Network, env_cfg: &EnvConfig, epsilon: f64, seed: u64) -> Result<f64> {
    let mut env = Env::new(EnvConfig {
        seed,
        ..env_cfg.clone()
    })?;
    let mut rng = SplitMix64::new(SplitMix64::derive(seed, u64::MAX));
    let mut obs = env.observation();
    let mut total = 0.0;
    loop {
        let a = act_epsilon_greedy(net, &obs, epsilon, &mut rng)?;
        let step = env.step(a)?;
        total += step.reward;
        if step.terminal {
            return Ok(total);
        }
        obs = step.observation;
    }
}

/// Per-episode returns, episodes fanned out across threads and reduced in
/// episode order.
pub fn evaluate(net: &Network, env_cfg: &EnvConfig, episodes: usize, epsilon: f64, seed: u64) -> Result<Vec<f64>> {
    if net.spec().input != env_cfg.observation_shape() {
        return Err(Error::Shape(format!(
            "network input {:?} does not match environment observations {:?}",
            net.spec().input,
            env_cfg.observation_shape()
        )));
    }
    (0..episodes)
        .into_par_iter()
        .map(|ep| run_episode(net, env_cfg, epsilon, episode_seed(seed, ep)))
        .collect()
}
