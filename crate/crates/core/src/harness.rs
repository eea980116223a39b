//! Experiment plumbing: JSON configuration, single training runs with their
//! on-disk artifacts, the 8-cell ablation grid, result tables and the
//! parameter-count report.
//!
//! Every run directory holds `best.ckpt`, `eval_log.csv`,
//! `final_rewards.csv` (one reward per line, full precision) and `run.json`
//! (the complete configuration plus provenance).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distill::{train_student, DistillConfig};
use crate::env::{EnvConfig, NUM_ACTIONS};
use crate::error::{Error, Result};
use crate::localize::DEFAULT_ALPHA;
use crate::net::{count_params, Arch, Checkpoint, Network, NetworkSpec, Tail, Width};
use crate::rng::SplitMix64;
use crate::train::{final_evaluation, run_eval_seed, summarize, train_expert, DqnConfig, EvalLog, EvalRow, Phase, TrainOutcome};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const BEST_CHECKPOINT: &str = "best.ckpt";
pub const EVAL_LOG: &str = "eval_log.csv";
pub const FINAL_REWARDS: &str = "final_rewards.csv";
pub const RUN_METADATA: &str = "run.json";
pub const RESULTS_CSV: &str = "results.csv";
pub const RESULTS_TABLE: &str = "results.txt";
pub const RESULTS_CSV_HEADER: &str = "mode,tail,width,params,final_mean,final_std,episodes,train_iters,seed";

/// Everything a run or a grid needs besides the command-line selections
/// (architecture, mode, output directory).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub dqn: DqnConfig,
    pub distill: DistillConfig,
    pub seeds: Vec<u64>,
    /// Trained expert to distil from / to use as the grid's expert cell.
    pub expert_checkpoint: Option<PathBuf>,
    /// Iteration budget of every non-expert grid cell, KD and no-KD alike;
    /// `None` uses `distill.iterations`.
    pub cell_iterations: Option<u64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            env: EnvConfig::catch(),
            dqn: DqnConfig::default(),
            distill: DistillConfig::default(),
            seeds: vec![7],
            expert_checkpoint: None,
            cell_iterations: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.dqn.validate()?;
        self.distill.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(Error::Config(format!("duplicate seeds in {:?}", self.seeds)));
        }
        self.grid_dqn().validate()?;
        self.grid_distill().validate()
    }

    pub fn spec(&self, arch: Arch) -> NetworkSpec {
        NetworkSpec::new(arch, self.env.observation_shape(), NUM_ACTIONS)
    }

    fn cell_budget(&self) -> u64 {
        self.cell_iterations.unwrap_or(self.distill.iterations)
    }

    /// Q-learning settings of the compressed no-KD cells.
    pub fn grid_dqn(&self) -> DqnConfig {
        DqnConfig {
            iterations: self.cell_budget(),
            ..self.dqn.clone()
        }
    }

    /// Distillation settings of the KD cells.
    pub fn grid_distill(&self) -> DistillConfig {
        DistillConfig {
            iterations: self.cell_budget(),
            ..self.distill.clone()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Kd,
    NoKd,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::Kd => "kd",
            Mode::NoKd => "no_kd",
        }
    }
}

/// One of the 8 ablation combinations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub mode: Mode,
    pub tail: Tail,
    pub width: Width,
}

impl Cell {
    pub const EXPERT: Cell = Cell {
        mode: Mode::NoKd,
        tail: Tail::Flatten,
        width: Width::Same,
    };
    pub const OURS: Cell = Cell {
        mode: Mode::Kd,
        tail: Tail::MaxPool,
        width: Width::Halved,
    };

    /// Table order: KD block first, then no-KD; within each, max pool before
    /// flatten and same before halved.
    pub fn all() -> [Cell; 8] {
        let mut cells = [Cell::EXPERT; 8];
        let mut k = 0;
        for mode in [Mode::Kd, Mode::NoKd] {
            for tail in [Tail::MaxPool, Tail::Flatten] {
                for width in [Width::Same, Width::Halved] {
                    cells[k] = Cell { mode, tail, width };
                    k += 1;
                }
            }
        }
        cells
    }

    pub fn arch(self) -> Arch {
        Arch::from_cell(self.width, self.tail)
    }

    pub fn is_expert(self) -> bool {
        self == Cell::EXPERT
    }

    /// `kd-max_pool-halved` style directory name.
    pub fn id(self) -> String {
        format!("{}-{}-{}", self.mode.label(), self.tail.label(), self.width.label())
    }

    pub fn note(self) -> &'static str {
        if self.is_expert() {
            "expert"
        } else if self == Cell::OURS {
            "ours"
        } else {
            ""
        }
    }

    /// The same architecture trained in the other mode.
    pub fn counterpart(self) -> Cell {
        Cell {
            mode: match self.mode {
                Mode::Kd => Mode::NoKd,
                Mode::NoKd => Mode::Kd,
            },
            ..self
        }
    }
}

/// Provenance written next to every set of artifacts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub code_version: String,
    pub kind: String,
    pub arch: Option<String>,
    pub cell: Option<String>,
    pub seeds: Vec<u64>,
    pub train_iters: u64,
    pub iteration_unit: String,
    pub tau_expert: f64,
    pub tau_student: f64,
    pub overlay_alpha: f64,
    pub expert_checkpoint: Option<PathBuf>,
    pub config: ExperimentConfig,
}

impl RunMetadata {
    pub fn new(kind: &str, cfg: &ExperimentConfig, seeds: Vec<u64>, train_iters: u64) -> Self {
        Self {
            code_version: CODE_VERSION.into(),
            kind: kind.into(),
            arch: None,
            cell: None,
            seeds,
            train_iters,
            iteration_unit: format!(
                "environment step; one minibatch update every {} (dqn) / {} (distill) steps after learn_start",
                cfg.dqn.train_every, cfg.distill.train_every
            ),
            tau_expert: cfg.distill.tau_expert,
            tau_student: cfg.distill.tau_student,
            overlay_alpha: DEFAULT_ALPHA,
            expert_checkpoint: cfg.expert_checkpoint.clone(),
            config: cfg.clone(),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(RUN_METADATA), serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

/// Full-precision rewards, one per line (`f64` `Display` round-trips).
pub fn rewards_csv(rewards: &[f64]) -> String {
    let mut s = String::from("reward\n");
    for r in rewards {
        let _ = writeln!(s, "{r}");
    }
    s
}

pub fn read_rewards(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some("reward") {
        return Err(Error::Config(format!("{}: missing `reward` header", path.display())));
    }
    lines
        .map(|l| {
            l.trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("{}: bad reward `{l}`: {e}", path.display())))
        })
        .collect()
}

/// Writes the three training artifacts of an outcome into `dir`.
pub fn save_outcome(dir: &Path, outcome: &TrainOutcome) -> Result<()> {
    fs::create_dir_all(dir)?;
    outcome.best.save(&dir.join(BEST_CHECKPOINT))?;
    outcome.log.save(&dir.join(EVAL_LOG))?;
    fs::write(dir.join(FINAL_REWARDS), rewards_csv(&outcome.final_rewards))?;
    Ok(())
}

/// A finished run as read back from disk.
#[derive(Clone, Debug)]
pub struct StoredRun {
    pub checkpoint: Checkpoint,
    pub rewards: Vec<f64>,
}

/// A run directory is complete iff its checkpoint loads with the expected
/// spec and its final-reward CSV parses with the expected episode count.
pub fn load_complete_run(dir: &Path, spec: &NetworkSpec, episodes: usize) -> Result<Option<StoredRun>> {
    let ckpt_path = dir.join(BEST_CHECKPOINT);
    let rewards_path = dir.join(FINAL_REWARDS);
    if !ckpt_path.is_file() || !rewards_path.is_file() {
        return Ok(None);
    }
    let checkpoint = match Checkpoint::load(&ckpt_path) {
        Ok(c) if &c.spec == spec => c,
        _ => return Ok(None),
    };
    match read_rewards(&rewards_path) {
        Ok(rewards) if rewards.len() == episodes => Ok(Some(StoredRun { checkpoint, rewards })),
        _ => Ok(None),
    }
}

fn print_row(prefix: &str) -> impl FnMut(&EvalRow) + '_ {
    move |r: &EvalRow| {
        if r.phase != Phase::Train {
            eprintln!(
                "{prefix} {:>5} iter {:>8}  mean {:+.3} ± {:.3} over {} episodes",
                format!("{:?}", r.phase).to_lowercase(),
                r.iter,
                r.mean_reward,
                r.std_reward,
                r.episodes
            );
        }
    }
}

/// Q-learning run of `arch`; artifacts go to `out`.
pub fn run_train_expert(cfg: &ExperimentConfig, arch: Arch, seed: u64, out: &Path, verbose: bool) -> Result<TrainOutcome> {
    cfg.validate()?;
    let spec = cfg.spec(arch);
    let mut quiet = |_: &EvalRow| {};
    let mut loud = print_row(arch.name());
    let on_row: &mut dyn FnMut(&EvalRow) = if verbose { &mut loud } else { &mut quiet };
    let outcome = train_expert(&cfg.env, &spec, &cfg.dqn, seed, on_row)?;
    save_outcome(out, &outcome)?;
    let mut meta = RunMetadata::new("train-expert", cfg, vec![seed], cfg.dqn.iterations);
    meta.arch = Some(arch.name().into());
    meta.save(out)?;
    Ok(outcome)
}

pub fn load_network(path: &Path) -> Result<Network> {
    Checkpoint::load(path)
        .and_then(|c| c.to_network())
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))
}

/// Distils the checkpoint at `expert_path` into a fresh `arch` student.
pub fn run_distill(cfg: &ExperimentConfig, expert_path: &Path, arch: Arch, seed: u64, out: &Path, verbose: bool) -> Result<TrainOutcome> {
    cfg.validate()?;
    let expert = load_network(expert_path)?;
    let spec = cfg.spec(arch);
    let mut quiet = |_: &EvalRow| {};
    let mut loud = print_row(arch.name());
    let on_row: &mut dyn FnMut(&EvalRow) = if verbose { &mut loud } else { &mut quiet };
    let outcome = train_student(&expert, &spec, &cfg.env, &cfg.distill, seed, on_row)?;
    save_outcome(out, &outcome)?;
    let mut meta = RunMetadata::new("distill", cfg, vec![seed], cfg.distill.iterations);
    meta.arch = Some(arch.name().into());
    meta.expert_checkpoint = Some(expert_path.to_path_buf());
    meta.save(out)?;
    Ok(outcome)
}

/// Final-evaluation result of one (cell, seed) run.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub train_iters: u64,
    pub rewards: Vec<f64>,
}

impl SeedRun {
    pub fn summary(&self) -> (f64, f64) {
        summarize(&self.rewards)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellResult {
    pub cell: Cell,
    pub params: usize,
    pub runs: Vec<SeedRun>,
}

impl CellResult {
    /// Median over seeds of the per-seed final means (mean of the middle two
    /// for an even count).
    pub fn median_mean(&self) -> f64 {
        let mut means: Vec<f64> = self.runs.iter().map(|r| r.summary().0).collect();
        median(&mut means)
    }
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// The ablation grid's results, one entry per cell in [`Cell::all`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultTable {
    pub cells: Vec<CellResult>,
}

impl ResultTable {
    pub fn cell(&self, cell: Cell) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.cell == cell)
    }

    /// One line per (cell, seed).
    pub fn to_csv(&self) -> String {
        let mut s = format!("{RESULTS_CSV_HEADER}\n");
        for c in &self.cells {
            for r in &c.runs {
                let (mean, std) = r.summary();
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{},{}",
                    c.cell.mode.label(),
                    c.cell.tail.label(),
                    c.cell.width.label(),
                    c.params,
                    mean,
                    std,
                    r.rewards.len(),
                    r.train_iters,
                    r.seed
                );
            }
        }
        s
    }

    /// Aligned plain-text table: one row per cell with the median of the
    /// per-seed means and every seed's `mean ± std`.
    pub fn to_text(&self) -> String {
        let header = ["mode", "tail", "width", "params", "median", "per-seed final mean ± std", "note"];
        let rows: Vec<[String; 7]> = self
            .cells
            .iter()
            .map(|c| {
                let seeds = c
                    .runs
                    .iter()
                    .map(|r| {
                        let (m, s) = r.summary();
                        format!("{}: {m:+.3} ± {s:.3}", r.seed)
                    })
                    .collect::<Vec<_>>()
                    .join("; ");
                [
                    c.cell.mode.label().to_string(),
                    c.cell.tail.label().to_string(),
                    c.cell.width.label().to_string(),
                    c.params.to_string(),
                    format!("{:+.3}", c.median_mean()),
                    seeds,
                    c.cell.note().to_string(),
                ]
            })
            .collect();
        let mut widths = header.map(str::len);
        for row in &rows {
            for (w, v) in widths.iter_mut().zip(row) {
                *w = (*w).max(v.chars().count());
            }
        }
        let line = |cols: &[&str]| -> String {
            let mut s = String::new();
            for (i, (v, w)) in cols.iter().zip(widths).enumerate() {
                if i > 0 {
                    s.push_str(" | ");
                }
                let _ = write!(s, "{v:<w$}");
            }
            s.trim_end().to_string() + "\n"
        };
        let mut out = line(&header);
        out.push_str(&line(&widths.map(|w| "-".repeat(w)).iter().map(String::as_str).collect::<Vec<_>>()));
        for row in &rows {
            out.push_str(&line(&row.iter().map(String::as_str).collect::<Vec<_>>()));
        }
        out
    }
}

/// Grid invocation options beyond the configuration file.
#[derive(Clone, Debug, Default)]
pub struct GridOptions {
    pub out: PathBuf,
    /// Reuse complete run directories instead of retraining.
    pub resume: bool,
    /// Concurrent (cell, seed) runs; 0 or 1 runs them one after another.
    pub parallel_cells: usize,
    pub verbose: bool,
}

fn cell_error(cell: &str, seed: u64, e: Error) -> Error {
    Error::Config(format!("cell {cell} (seed {seed}) failed: {e}"))
}

/// The expert cell's network: the supplied checkpoint, a completed
/// `out/expert` run (with `resume`), or a fresh Q-learning run with the
/// first seed.
fn grid_expert(cfg: &ExperimentConfig, opts: &GridOptions) -> Result<(Network, u64)> {
    let spec = cfg.spec(Arch::Expert);
    if let Some(path) = &cfg.expert_checkpoint {
        let ckpt = Checkpoint::load(path).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        if ckpt.spec != spec {
            return Err(Error::Config(format!(
                "expert checkpoint {} has spec {:?}, the grid needs {:?}",
                path.display(),
                ckpt.spec,
                spec
            )));
        }
        return Ok((ckpt.to_network()?, ckpt.meta.iterations));
    }
    let dir = opts.out.join("expert");
    if opts.resume {
        if let Some(run) = load_complete_run(&dir, &spec, cfg.dqn.final_eval_episodes)? {
            return Ok((run.checkpoint.to_network()?, cfg.dqn.iterations));
        }
    }
    let outcome = run_train_expert(cfg, Arch::Expert, cfg.seeds[0], &dir, opts.verbose)
        .map_err(|e| cell_error(&Cell::EXPERT.id(), cfg.seeds[0], e))?;
    Ok((outcome.best.to_network()?, cfg.dqn.iterations))
}

/// Trains and evaluates all 8 cells for every configured seed. The expert
/// cell is trained once (or supplied) and re-evaluated on the final-evaluation
/// stream a training run with each seed would use; every other cell gets the
/// same iteration budget.
pub fn run_ablation(cfg: &ExperimentConfig, opts: &GridOptions) -> Result<ResultTable> {
    cfg.validate()?;
    fs::create_dir_all(&opts.out)?;
    RunMetadata::new("ablate", cfg, cfg.seeds.clone(), cfg.grid_distill().iterations).save(&opts.out)?;
    let (expert, expert_iters) = grid_expert(cfg, opts)?;

    let jobs: Vec<(Cell, u64)> = Cell::all()
        .into_iter()
        .flat_map(|cell| cfg.seeds.iter().map(move |&s| (cell, s)))
        .collect();
    let run_job = |&(cell, seed): &(Cell, u64)| -> Result<SeedRun> {
        run_cell(cfg, opts, &expert, expert_iters, cell, seed).map_err(|e| cell_error(&cell.id(), seed, e))
    };
    let runs: Vec<SeedRun> = if opts.parallel_cells > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.parallel_cells)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| jobs.par_iter().map(run_job).collect::<Result<Vec<_>>>())?
    } else {
        jobs.iter().map(run_job).collect::<Result<Vec<_>>>()?
    };

    let mut cells = Vec::new();
    for (k, cell) in Cell::all().into_iter().enumerate() {
        let n = cfg.seeds.len();
        cells.push(CellResult {
            cell,
            params: count_params(&cfg.spec(cell.arch()))?,
            runs: runs[k * n..(k + 1) * n].to_vec(),
        });
    }
    let table = ResultTable { cells };
    fs::write(opts.out.join(RESULTS_CSV), table.to_csv())?;
    fs::write(opts.out.join(RESULTS_TABLE), table.to_text())?;
    Ok(table)
}

fn run_cell(cfg: &ExperimentConfig, opts: &GridOptions, expert: &Network, expert_iters: u64, cell: Cell, seed: u64) -> Result<SeedRun> {
    let dir = opts.out.join("cells").join(cell.id()).join(format!("seed_{seed}"));
    let spec = cfg.spec(cell.arch());
    let (episodes, train_iters) = if cell.is_expert() {
        (cfg.dqn.final_eval_episodes, expert_iters)
    } else if cell.mode == Mode::Kd {
        (cfg.distill.final_eval_episodes, cfg.grid_distill().iterations)
    } else {
        (cfg.dqn.final_eval_episodes, cfg.grid_dqn().iterations)
    };
    if opts.resume {
        if let Some(run) = load_complete_run(&dir, &spec, episodes)? {
            return Ok(SeedRun {
                seed,
                train_iters,
                rewards: run.rewards,
            });
        }
    }
    let prefix = format!("{} seed {seed}", cell.id());
    let mut quiet = |_: &EvalRow| {};
    let mut loud = print_row(&prefix);
    let on_row: &mut dyn FnMut(&EvalRow) = if opts.verbose { &mut loud } else { &mut quiet };
    let outcome = if cell.is_expert() {
        let rewards = final_evaluation(expert, &cfg.env, episodes, cfg.dqn.eval_epsilon, run_eval_seed(seed))?;
        let (mean, std) = summarize(&rewards);
        let mut log = EvalLog::new(false);
        log.push(EvalRow {
            iter: expert_iters,
            phase: Phase::Final,
            episodes,
            mean_reward: mean,
            std_reward: std,
            epsilon: cfg.dqn.eval_epsilon,
            loss_mean: None,
            wall_s: 0.0,
            kl_loss_mean: None,
        });
        on_row(&log.rows[0]);
        let meta = crate::net::CheckpointMeta {
            iterations: expert_iters,
            seed,
            environment: cfg.env.id(),
            note: "grid expert".into(),
        };
        TrainOutcome {
            best: Checkpoint::from_network(expert, meta),
            log,
            final_rewards: rewards,
            losses: Vec::new(),
        }
    } else if cell.mode == Mode::Kd {
        train_student(expert, &spec, &cfg.env, &cfg.grid_distill(), seed, on_row)?
    } else {
        train_expert(&cfg.env, &spec, &cfg.grid_dqn(), seed, on_row)?
    };
    save_outcome(&dir, &outcome)?;
    let mut meta = RunMetadata::new("ablate-cell", cfg, vec![seed], train_iters);
    meta.arch = Some(cell.arch().name().into());
    meta.cell = Some(cell.id());
    meta.save(&dir)?;
    Ok(SeedRun {
        seed,
        train_iters,
        rewards: outcome.final_rewards,
    })
}

/// A published parameter figure, given as a number of `unit`s printed with
/// `decimals` decimals (e.g. 43.1K = `(43.1, 1e3, 1)`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReferenceCount {
    pub value: f64,
    pub unit: f64,
    pub decimals: i32,
}

impl ReferenceCount {
    pub fn label(&self) -> String {
        let suffix = if self.unit >= 1e6 { "M" } else { "K" };
        format!("{:.*}{suffix}", self.decimals as usize, self.value)
    }

    /// Whether `count` prints as this figure under rounding or truncation.
    pub fn matches(&self, count: usize) -> bool {
        let scale = 10f64.powi(self.decimals);
        let x = count as f64 / self.unit * scale;
        let target = (self.value * scale).round();
        x.round() == target || x.floor() == target
    }

    /// `count` minus the figure read as an exact count (0 when it matches).
    pub fn gap(&self, count: usize) -> i64 {
        if self.matches(count) {
            0
        } else {
            count as i64 - (self.value * self.unit).round() as i64
        }
    }
}

/// Reference figures for the standard Atari input (4x84x84, 9 actions).
pub fn reference_count(arch: Arch) -> ReferenceCount {
    match arch {
        Arch::Expert => ReferenceCount {
            value: 1.68,
            unit: 1e6,
            decimals: 2,
        },
        Arch::MaxSame => ReferenceCount {
            value: 115.88,
            unit: 1e3,
            decimals: 2,
        },
        Arch::MaxHalved => ReferenceCount {
            value: 43.1,
            unit: 1e3,
            decimals: 1,
        },
        Arch::NoneHalved => ReferenceCount {
            value: 829.51,
            unit: 1e3,
            decimals: 2,
        },
    }
}

pub const ATARI_INPUT: [usize; 3] = [4, 84, 84];
pub const ATARI_ACTIONS: usize = 9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParamRow {
    pub arch: Arch,
    pub params: usize,
    /// `params / params(expert)`.
    pub ratio: f64,
    /// Reference figure and the parameter gap, reported for the standard
    /// Atari geometry only.
    pub reference: Option<(String, i64)>,
}

pub fn param_report(input: [usize; 3], actions: usize) -> Result<Vec<ParamRow>> {
    let expert = count_params(&NetworkSpec::new(Arch::Expert, input, actions))?;
    let atari = input == ATARI_INPUT && actions == ATARI_ACTIONS;
    Arch::ALL
        .into_iter()
        .map(|arch| {
            let params = count_params(&NetworkSpec::new(arch, input, actions))?;
            let reference = atari.then(|| {
                let r = reference_count(arch);
                (r.label(), r.gap(params))
            });
            Ok(ParamRow {
                arch,
                params,
                ratio: params as f64 / expert as f64,
                reference,
            })
        })
        .collect()
}

pub fn param_report_text(rows: &[ParamRow]) -> String {
    let mut s = format!("{:<12} {:>10} {:>9}  reference\n", "arch", "params", "ratio");
    for r in rows {
        let reference = match &r.reference {
            None => String::new(),
            Some((label, 0)) => format!("{label} (matches)"),
            Some((label, gap)) => format!("{label} (gap of {gap:+} parameters)"),
        };
        let _ = writeln!(s, "{:<12} {:>10} {:>9.5}  {reference}", r.arch.name(), r.params, r.ratio);
    }
    s
}

/// Seeds for `n` localization or evaluation episodes derived from `seed`.
pub fn episode_seeds(seed: u64, n: usize) -> Vec<u64> {
    (0..n as u64).map(|k| SplitMix64::derive(seed, k)).collect()
}
