//! Q-learning of expert networks: replay, exploration, periodic evaluation
//! with best-checkpoint selection, and the evaluation log.

mod dqn;
mod eval;
mod log;
pub(crate) mod protocol;
mod replay;

pub use dqn::{q_learning_step, run_eval_seed, sync_target, td_targets, train_expert, window_medians, DqnConfig, TrainOutcome};
pub(crate) use dqn::{check_probability, check_schedule, train_row, RunSeeds};
pub use eval::{act_epsilon_greedy, episode_seed, evaluate, greedy_action, run_episode};
pub use log::{summarize, EvalLog, EvalRow, Phase, EVAL_LOG_HEADER};
pub use protocol::final_evaluation;
pub use replay::{ReplayBuffer, Transition};
