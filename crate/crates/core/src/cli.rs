//! The `dqn-compress` command line.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::env::Game;
use crate::error::{Error, Result};
use crate::gradcheck;
use crate::harness::{self, ExperimentConfig, GridOptions, ATARI_ACTIONS};
use crate::localize::{export_episode, localization_score, DEFAULT_ALPHA};
use crate::net::{Arch, Network};
use crate::train::{final_evaluation, summarize};

/// Compress Q-learning agents into max-pooled students and look at where
/// they attend.
#[derive(Debug, Parser)]
#[command(name = "dqn-compress", version, arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Q-learning from pixels (the expert, or any architecture without distillation).
    TrainExpert {
        #[command(flatten)]
        common: Common,
    },
    /// Distil a trained checkpoint into a fresh student.
    Distill {
        #[command(flatten)]
        common: Common,
        /// Expert checkpoint (overrides `expert_checkpoint` in the config).
        #[arg(long)]
        expert: Option<PathBuf>,
    },
    /// Epsilon-greedy evaluation of a checkpoint.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Defaults to the config's final-evaluation episode count.
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// The 8-cell {kd, no_kd} x {max_pool, flatten} x {same, halved} grid.
    Ablate {
        #[command(flatten)]
        common: Common,
        /// Reuse completed run directories under --out.
        #[arg(long)]
        resume: bool,
        /// Number of (cell, seed) runs trained concurrently.
        #[arg(long, default_value_t = 1)]
        parallel_cells: usize,
    },
    /// Export heatmap overlays for one greedy episode and report how often
    /// the activation peak sits on a game entity.
    Visualize {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Comma-separated channel indices; the channel-max aggregate is always exported.
        #[arg(long, value_delimiter = ',')]
        channels: Vec<usize>,
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
        /// Fixation radius in frame pixels.
        #[arg(long, default_value_t = 4)]
        radius: usize,
        /// Episodes for the localization score.
        #[arg(long, default_value_t = 20)]
        episodes: usize,
        /// Draw the score strip on every frame.
        #[arg(long)]
        draw_score: bool,
    },
    /// Closed-form parameter counts of the four architectures.
    CountParams {
        /// Print one architecture's count only.
        #[arg(long)]
        arch: Option<Arch>,
        #[arg(long, default_value_t = ATARI_ACTIONS)]
        actions: usize,
        /// Input geometry `stack x height x width`.
        #[arg(long, default_value = "4x84x84", value_parser = parse_input)]
        input: [usize; 3],
    },
    /// Finite-difference check of every analytic gradient.
    Gradcheck {
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        /// Random probes per operation.
        #[arg(long, default_value_t = 20)]
        samples: usize,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// JSON experiment configuration (unknown keys are rejected).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replaces the configured seed list with this single seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// expert | max-same | max-halved | none-halved
    #[arg(long)]
    arch: Option<Arch>,
    /// catch | tunnel
    #[arg(long)]
    env: Option<Game>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seeds = vec![seed];
        }
        if let Some(game) = self.env {
            cfg.env.game = game;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn seed(&self, cfg: &ExperimentConfig) -> u64 {
        cfg.seeds[0]
    }
}

fn parse_input(s: &str) -> std::result::Result<[usize; 3], String> {
    let dims: Vec<usize> = s
        .split('x')
        .map(|d| d.trim().parse::<usize>().map_err(|e| format!("`{s}`: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    dims.try_into().map_err(|_| format!("`{s}`: expected STACKxHxW"))
}

fn load_for_env(path: &Path, cfg: &ExperimentConfig) -> Result<Network> {
    let net = harness::load_network(path)?;
    if net.spec().input != cfg.env.observation_shape() {
        return Err(Error::Shape(format!(
            "{} expects input {:?}, the environment renders {:?}",
            path.display(),
            net.spec().input,
            cfg.env.observation_shape()
        )));
    }
    Ok(net)
}

fn report(what: &str, rewards: &[f64], out: &Path) {
    let (mean, std) = summarize(rewards);
    println!("{what}: final mean {mean:.4} ± {std:.4} over {} episodes ({})", rewards.len(), out.display());
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::TrainExpert { common } => {
            let cfg = common.config()?;
            let arch = common.arch.unwrap_or(Arch::Expert);
            let outcome = harness::run_train_expert(&cfg, arch, common.seed(&cfg), &common.out, true)?;
            report(arch.name(), &outcome.final_rewards, &common.out);
        }
        Command::Distill { common, expert } => {
            let cfg = common.config()?;
            let arch = common.arch.unwrap_or(Arch::MaxHalved);
            let expert = expert
                .or_else(|| cfg.expert_checkpoint.clone())
                .ok_or_else(|| Error::Config("distill needs --expert or `expert_checkpoint` in the config".into()))?;
            let outcome = harness::run_distill(&cfg, &expert, arch, common.seed(&cfg), &common.out, true)?;
            report(arch.name(), &outcome.final_rewards, &common.out);
        }
        Command::Evaluate {
            common,
            checkpoint,
            episodes,
        } => {
            let cfg = common.config()?;
            let net = load_for_env(&checkpoint, &cfg)?;
            let episodes = episodes.unwrap_or(cfg.dqn.final_eval_episodes);
            if episodes == 0 {
                return Err(Error::Config("--episodes must be positive".into()));
            }
            let rewards = final_evaluation(&net, &cfg.env, episodes, cfg.dqn.eval_epsilon, common.seed(&cfg))?;
            let (mean, std) = summarize(&rewards);
            println!("mean {mean:.4} ± {std:.4} over {episodes} episodes");
        }
        Command::Ablate {
            common,
            resume,
            parallel_cells,
        } => {
            let cfg = common.config()?;
            let opts = GridOptions {
                out: common.out.clone(),
                resume,
                parallel_cells,
                verbose: true,
            };
            let table = harness::run_ablation(&cfg, &opts)?;
            print!("{}", table.to_text());
        }
        Command::Visualize {
            common,
            checkpoint,
            channels,
            alpha,
            radius,
            episodes,
            draw_score,
        } => {
            let mut cfg = common.config()?;
            cfg.env.draw_score |= draw_score;
            let net = load_for_env(&checkpoint, &cfg)?;
            let seed = common.seed(&cfg);
            let export = export_episode(&net, &cfg.env, seed, &common.out, &channels, alpha)?;
            println!(
                "wrote {} images for {} steps; manifest {}",
                export.images.len(),
                export.steps.len(),
                export.manifest.display()
            );
            let score = localization_score(&net, &cfg.env, &harness::episode_seeds(seed, episodes), radius)?;
            print!("localization: {} steps, peak on ball/paddle {:.3}", score.steps, score.on_entity);
            match score.on_score_strip {
                Some(f) => println!(", on score strip {f:.3}"),
                None => println!(),
            }
        }
        Command::CountParams { arch, actions, input } => {
            let rows = harness::param_report(input, actions)?;
            match arch {
                Some(a) => println!("{}", rows.iter().find(|r| r.arch == a).map_or(0, |r| r.params)),
                None => print!("{}", harness::param_report_text(&rows)),
            }
        }
        Command::Gradcheck { seed, samples } => {
            if samples == 0 {
                return Err(Error::Config("--samples must be positive".into()));
            }
            let reports = gradcheck::run_all(seed, samples)?;
            let mut worst: f64 = 0.0;
            for r in &reports {
                println!("{:<28} {:>6} checks  max rel error {:.3e}", r.op, r.checks, r.max_rel_error);
                worst = worst.max(r.max_rel_error);
            }
            println!("max relative error {worst:.3e}");
            if !(worst < GRADCHECK_LIMIT) {
                return Err(Error::InvalidArgument(format!("gradient check failed: {worst:.3e} >= {GRADCHECK_LIMIT:e}")));
            }
        }
    }
    Ok(())
}

/// Exit threshold of the `gradcheck` subcommand.
pub const GRADCHECK_LIMIT: f64 = 1e-5;

/// Parses `argv` (program name first) and runs the subcommand. Returns the
/// process exit code: 0 on success, 2 for usage errors, 1 for failures, with
/// a one-line diagnostic on standard error.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
