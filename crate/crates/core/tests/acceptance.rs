//! Acceptance run: one `PASS` / `FAIL` line per criterion, then a summary.
//!
//! The training criteria run at desk scale from `configs/desk_catch.json`
//! and take roughly an hour and a half on one core. Artifacts are kept under
//! the cargo target tmp directory (`acceptance/`). Set `ACCEPTANCE_ONLY` to a
//! comma-separated list of criterion numbers to run a subset; the others
//! print `SKIP`. The process exits 0 even when a criterion fails: failures
//! are reported, not hidden behind a panic.

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use dqn_compress::distill::{distill_gradient, DistillConfig};
use dqn_compress::env::{scripted_optimal_policy, Env, EnvConfig, NUM_ACTIONS};
use dqn_compress::gradcheck::run_all;
use dqn_compress::harness::{self, param_report, ExperimentConfig, GridOptions, ResultTable, ATARI_ACTIONS, ATARI_INPUT};
use dqn_compress::localize::{bilinear_upsample, export_episode, localization_score, normalize_map, overlay};
use dqn_compress::net::{count_params, Arch, Network, NetworkSpec};
use dqn_compress::rng::SplitMix64;
use dqn_compress::train::{episode_seed, run_eval_seed, summarize, window_medians, EvalLog, TrainOutcome};
use dqn_compress::Tensor;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

struct Runner {
    only: Option<BTreeSet<u32>>,
    results: Vec<(u32, Option<bool>)>,
}

impl Runner {
    fn wants(&self, k: u32) -> bool {
        self.only.as_ref().map_or(true, |s| s.contains(&k))
    }

    fn run(&mut self, k: u32, name: &str, f: impl FnOnce() -> Result<Outcome, String>) {
        if !self.wants(k) {
            println!("SKIP criterion {k:>2} {name}");
            self.results.push((k, None));
            return;
        }
        let start = Instant::now();
        let out = f().unwrap_or_else(|e| outcome(false, format!("error: {e}")));
        println!(
            "{} criterion {k:>2} {name}: {} [{:.1}s]",
            if out.pass { "PASS" } else { "FAIL" },
            out.detail,
            start.elapsed().as_secs_f64()
        );
        self.results.push((k, Some(out.pass)));
    }
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn desk_config() -> Result<ExperimentConfig, String> {
    ExperimentConfig::load(&workspace().join("configs/desk_catch.json")).map_err(e)
}

fn out_root() -> PathBuf {
    Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance")
}

fn mean_of(rewards: &[f64]) -> f64 {
    summarize(rewards).0
}

/// The scripted-optimal policy under the evaluation epsilon, on the episode
/// seeds of the final evaluation of a run with `seed`.
fn scripted_oracle(env_cfg: &EnvConfig, episodes: usize, epsilon: f64, seed: u64) -> Result<f64, String> {
    let stream = SplitMix64::derive(run_eval_seed(seed), 0);
    let mut rewards = Vec::new();
    for ep in 0..episodes {
        let s = episode_seed(stream, ep);
        let mut env = Env::new(EnvConfig {
            seed: s,
            ..env_cfg.clone()
        })
        .map_err(e)?;
        let mut rng = SplitMix64::new(SplitMix64::derive(s, u64::MAX));
        let mut total = 0.0;
        loop {
            let a = if rng.next_f64() < epsilon {
                rng.bounded(NUM_ACTIONS)
            } else {
                scripted_optimal_policy(env.state())
            };
            let step = env.step(a).map_err(e)?;
            total += step.reward;
            if step.terminal {
                break;
            }
        }
        rewards.push(total);
    }
    Ok(mean_of(&rewards))
}

fn c1() -> Result<Outcome, String> {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut min_checks = usize::MAX;
    let mut ops = 0;
    for seed in [2024, 7] {
        for r in run_all(seed, 20).map_err(e)? {
            worst = worst.max(r.max_rel_error);
            min_checks = min_checks.min(r.checks);
            ops += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok(outcome(
        worst < 1e-5 && min_checks >= 20 && secs < 60.0,
        format!("{ops} op reports, >= {min_checks} probes each, max rel error {worst:.2e} (< 1e-5), {secs:.2}s (< 60s)"),
    ))
}

fn c2() -> Result<Outcome, String> {
    let start = Instant::now();
    let rows = param_report(ATARI_INPUT, ATARI_ACTIONS).map_err(e)?;
    let secs = start.elapsed().as_secs_f64();
    let get = |a: Arch| rows.iter().find(|r| r.arch == a).unwrap();
    let expected = [
        (Arch::MaxHalved, 43_097, 0),
        (Arch::MaxSame, 115_881, 0),
        (Arch::Expert, 1_688_745, 0),
        (Arch::NoneHalved, 829_529, 19),
    ];
    let mut ok = secs < 1.0;
    let mut parts = Vec::new();
    for (arch, count, gap) in expected {
        let row = get(arch);
        let (label, g) = row.reference.clone().unwrap_or_default();
        ok &= row.params == count && g == gap;
        parts.push(format!("{}={} (ref {label}, gap {g})", arch.name(), row.params));
    }
    Ok(outcome(ok, parts.join(", ")))
}

fn c3() -> Result<Outcome, String> {
    let mut worst = (0usize, 0.0f64);
    let mut ok = true;
    for a in 3..=18 {
        let small = count_params(&NetworkSpec::new(Arch::MaxHalved, ATARI_INPUT, a)).map_err(e)?;
        let big = count_params(&NetworkSpec::new(Arch::Expert, ATARI_INPUT, a)).map_err(e)?;
        // Exact: small / big < 3 / 100.
        ok &= 100 * small < 3 * big;
        let ratio = small as f64 / big as f64;
        if ratio > worst.1 {
            worst = (a, ratio);
        }
    }
    Ok(outcome(ok, format!("max ratio {:.5} at A={} (< 0.03 for A in 3..=18)", worst.1, worst.0)))
}

struct Trained {
    dir: PathBuf,
    outcome: TrainOutcome,
    secs: f64,
}

fn train_expert_run(cfg: &ExperimentConfig, dir: &Path) -> Result<Trained, String> {
    let start = Instant::now();
    let outcome = harness::run_train_expert(cfg, Arch::Expert, 7, dir, false).map_err(e)?;
    Ok(Trained {
        dir: dir.to_path_buf(),
        outcome,
        secs: start.elapsed().as_secs_f64(),
    })
}

fn distill_run(cfg: &ExperimentConfig, expert: &Path, dir: &Path) -> Result<Trained, String> {
    let start = Instant::now();
    let outcome = harness::run_distill(cfg, expert, Arch::MaxHalved, 7, dir, false).map_err(e)?;
    Ok(Trained {
        dir: dir.to_path_buf(),
        outcome,
        secs: start.elapsed().as_secs_f64(),
    })
}

fn c4(cfg: &ExperimentConfig, run: &Trained) -> Result<Outcome, String> {
    let mean = mean_of(&run.outcome.final_rewards);
    let oracle = scripted_oracle(&cfg.env, cfg.dqn.final_eval_episodes, cfg.dqn.eval_epsilon, 7)?;
    Ok(outcome(
        mean >= 0.90,
        format!(
            "expert final mean {mean:.3} over {} episodes (>= 0.90; scripted oracle {oracle:.3}), best checkpoint at iteration {}, {:.0}s (target < 1800s)",
            run.outcome.final_rewards.len(),
            run.outcome.best.meta.iterations,
            run.secs
        ),
    ))
}

fn c5(expert: &Trained, student: &Trained) -> Result<Outcome, String> {
    let e_mean = mean_of(&expert.outcome.final_rewards);
    let s_mean = mean_of(&student.outcome.final_rewards);
    let medians = window_medians(&student.outcome.losses, 5_000);
    let first3: Vec<String> = medians.iter().take(3).map(|m| format!("{m:.4}")).collect();
    let monotone = medians.len() >= 3 && medians[0] >= medians[1] && medians[1] >= medians[2];
    Ok(outcome(
        s_mean >= e_mean - 0.05,
        format!(
            "student {s_mean:.3} vs expert {e_mean:.3} (student >= expert - 0.05), {:.0}s (target < 2700s); KL median over 5k-iteration windows [{}] {}",
            student.secs,
            first3.join(", "),
            if monotone { "non-increasing" } else { "NOT non-increasing" }
        ),
    ))
}

fn c6(cfg: &ExperimentConfig, expert_ckpt: &Path) -> Result<Outcome, String> {
    let grid_cfg = ExperimentConfig {
        seeds: vec![7, 8, 9],
        expert_checkpoint: Some(expert_ckpt.to_path_buf()),
        ..cfg.clone()
    };
    let opts = GridOptions {
        out: out_root().join("grid"),
        resume: false,
        parallel_cells: 1,
        verbose: false,
    };
    let table: ResultTable = harness::run_ablation(&grid_cfg, &opts).map_err(e)?;
    println!("{}", table.to_text());
    let mut ok = true;
    let mut parts = Vec::new();
    for c in &table.cells {
        let kd = c.cell;
        if kd.mode != harness::Mode::Kd || kd.arch() == Arch::Expert {
            continue;
        }
        let no = table.cell(kd.counterpart()).ok_or("missing counterpart")?;
        let (a, b) = (c.median_mean(), no.median_mean());
        ok &= a > b;
        parts.push(format!("{}: kd {a:+.3} vs no_kd {b:+.3}", kd.arch().name()));
    }
    Ok(outcome(
        ok,
        format!(
            "median of 3 seeds, {} iterations per cell: {}",
            grid_cfg.grid_distill().iterations,
            parts.join("; ")
        ),
    ))
}

fn c7(cfg: &ExperimentConfig) -> Result<Outcome, String> {
    // A batch of real observations from random play.
    let mut env = Env::new(EnvConfig {
        seed: 5,
        ..cfg.env.clone()
    })
    .map_err(e)?;
    let mut rng = SplitMix64::new(6);
    let mut obs = vec![env.observation()];
    while obs.len() < 32 {
        let step = env.step(rng.bounded(NUM_ACTIONS)).map_err(e)?;
        obs.push(if step.terminal { env.reset() } else { step.observation });
    }
    let batch: Vec<_> = obs.iter().collect();
    let dcfg = DistillConfig::default();
    let mut worst = (0.0f64, 0.0f64);
    for arch in Arch::ALL {
        let net = Network::build(&cfg.spec(arch), 11).map_err(e)?;
        let mut copy = net.clone();
        let (loss, norm) = distill_gradient(&mut copy, &net, &batch, &dcfg).map_err(e)?;
        worst = (worst.0.max(loss.abs()), worst.1.max(norm));
    }
    Ok(outcome(
        worst.0 < 1e-9 && worst.1 < 1e-6,
        format!("all 4 architectures: max |KL| {:.2e} (< 1e-9), max grad norm {:.2e} (< 1e-6)", worst.0, worst.1),
    ))
}

fn tensor(shape: &[usize], v: Vec<f64>) -> Result<Tensor, String> {
    Tensor::from_vec(shape, v).map_err(e)
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn dir_bytes(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .map_err(e)?
        .map(|entry| {
            let p = entry.map_err(e)?.path();
            Ok((p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).map_err(e)?))
        })
        .collect::<Result<_, String>>()?;
    files.sort();
    Ok(files)
}

fn c8(cfg: &ExperimentConfig, student: Option<&Path>) -> Result<Outcome, String> {
    let mut ok = true;
    let mut parts = Vec::new();

    let n = normalize_map(&tensor(&[2, 2], vec![0.0, 5.0, 10.0, 5.0])?).map_err(e)?;
    let d = max_diff(n.values(), &[0.0, 0.5, 1.0, 0.5]);
    let constant = normalize_map(&tensor(&[2, 3], vec![0.7; 6])?).map_err(e)?;
    ok &= d < 1e-12 && constant.values().iter().all(|&x| x == 0.0);
    parts.push(format!("normalize {d:.0e}"));

    let up = bilinear_upsample(&tensor(&[2, 2], vec![0.0, 1.0, 2.0, 3.0])?, 4, 4).map_err(e)?;
    let t = 1.0 / 3.0;
    let expected: Vec<f64> = (0..4).flat_map(|i| (0..4).map(move |j| 2.0 * i as f64 * t + j as f64 * t)).collect();
    let d = max_diff(up.values(), &expected);
    ok &= d < 1e-12;
    parts.push(format!("bilinear 4x4 {d:.1e}"));

    let frame = tensor(&[1, 3], vec![0.0, 0.6, 0.2])?;
    let heat = tensor(&[1, 3], vec![1.0, 0.0, 0.9])?;
    let o = overlay(&frame, &heat, 0.3).map_err(e)?;
    let blend = |h: f64, g: f64| [0.3 * h + 0.7 * g, 0.7 * g, 0.7 * g];
    let want: Vec<f64> = [blend(1.0, 0.0), blend(0.0, 0.6), blend(0.9, 0.2)].concat();
    let red = overlay(&tensor(&[1, 1], vec![0.0])?, &tensor(&[1, 1], vec![1.0])?, 1.0).map_err(e)?;
    let d = max_diff(o.values(), &want);
    ok &= d < 1e-12 && red.values() == [1.0, 0.0, 0.0];
    parts.push(format!("overlay {d:.0e}"));

    let net = match student {
        Some(p) => harness::load_network(p).map_err(e)?,
        None => Network::build(&cfg.spec(Arch::MaxHalved), 3).map_err(e)?,
    };
    let root = out_root().join("export");
    let _ = fs::remove_dir_all(&root);
    let a = export_episode(&net, &cfg.env, 21, &root.join("a"), &[0, 7], 0.5).map_err(e)?;
    export_episode(&net, &cfg.env, 21, &root.join("b"), &[0, 7], 0.5).map_err(e)?;
    let same = dir_bytes(&root.join("a"))? == dir_bytes(&root.join("b"))?;
    ok &= same && a.images.len() == 3 * 2 * a.steps.len();
    parts.push(format!(
        "export of {} files over {} steps {}",
        a.images.len() + 1,
        a.steps.len(),
        if same { "byte-identical" } else { "DIFFERS" }
    ));
    Ok(outcome(ok, parts.join(", ")))
}

fn c9(cfg: &ExperimentConfig, student: &Path) -> Result<Outcome, String> {
    let seeds = harness::episode_seeds(9, 20);
    let trained = harness::load_network(student).map_err(e)?;
    let untrained = Network::build(trained.spec(), 12345).map_err(e)?;
    let s = localization_score(&trained, &cfg.env, &seeds, 4).map_err(e)?;
    let u = localization_score(&untrained, &cfg.env, &seeds, 4).map_err(e)?;
    let strip_env = EnvConfig {
        draw_score: true,
        ..cfg.env.clone()
    };
    let strip = localization_score(&trained, &strip_env, &seeds, 4).map_err(e)?;
    Ok(outcome(
        true,
        format!(
            "non-gating report: on-entity fraction student {:.3} ({} steps) vs untrained {:.3} ({} steps); with the score strip drawn, student on-entity {:.3}, on-strip {:.3}",
            s.on_entity,
            s.steps,
            u.on_entity,
            u.steps,
            strip.on_entity,
            strip.on_score_strip.unwrap_or(f64::NAN)
        ),
    ))
}

fn same_run(a: &Trained, b: &Trained) -> Result<(bool, bool, bool), String> {
    let ckpt = fs::read(a.dir.join(harness::BEST_CHECKPOINT)).map_err(e)? == fs::read(b.dir.join(harness::BEST_CHECKPOINT)).map_err(e)?;
    let log = a.outcome.log.same_numbers(&b.outcome.log);
    let bits = |r: &[f64]| r.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    let rewards = bits(&a.outcome.final_rewards) == bits(&b.outcome.final_rewards);
    Ok((ckpt, log, rewards))
}

fn c10(cfg: &ExperimentConfig, expert: &Trained, student: &Trained) -> Result<Outcome, String> {
    let expert2 = train_expert_run(cfg, &out_root().join("expert_rerun"))?;
    let student2 = distill_run(cfg, &expert.dir.join(harness::BEST_CHECKPOINT), &out_root().join("student_rerun"))?;
    let (ec, el, er) = same_run(expert, &expert2)?;
    let (sc, sl, sr) = same_run(student, &student2)?;
    // The logs also agree as written, apart from the wall-clock column.
    let strip = |log: &EvalLog| {
        log.to_csv()
            .lines()
            .map(|l| {
                let mut f: Vec<&str> = l.split(',').collect();
                if f.len() > 7 {
                    f[7] = "";
                }
                f.join(",")
            })
            .collect::<Vec<_>>()
    };
    let csv = strip(&expert.outcome.log) == strip(&expert2.outcome.log) && strip(&student.outcome.log) == strip(&student2.outcome.log);
    Ok(outcome(
        ec && el && er && sc && sl && sr && csv,
        format!(
            "expert rerun: checkpoint bytes {}, eval log {}, final rewards {}; student rerun: checkpoint bytes {}, eval log {}, final rewards {}",
            word(ec),
            word(el),
            word(er),
            word(sc),
            word(sl),
            word(sr)
        ),
    ))
}

fn word(same: bool) -> &'static str {
    if same {
        "identical"
    } else {
        "DIFFER"
    }
}

fn main() {
    // Respect the libtest flags cargo may pass (e.g. `--list`, filters).
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let only = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|k| k.trim().parse().ok()).collect());
    let mut r = Runner {
        only,
        results: Vec::new(),
    };
    let cfg = match desk_config() {
        Ok(c) => c,
        Err(err) => {
            println!("FAIL acceptance: cannot load the desk configuration: {err}");
            return;
        }
    };
    let root = out_root();
    println!("acceptance artifacts under {}", root.display());

    r.run(1, "gradient suite", c1);
    r.run(2, "parameter accounting", c2);
    r.run(3, "compression ratio", c3);
    r.run(7, "self-distillation fixed point", || c7(&cfg));

    let needs_expert = [4, 5, 6, 9, 10].iter().any(|&k| r.wants(k));
    let needs_student = [5, 9, 10].iter().any(|&k| r.wants(k));
    let expert = if needs_expert {
        let run = train_expert_run(&cfg, &root.join("expert"));
        if let Err(err) = &run {
            println!("expert training failed: {err}");
        }
        run.ok()
    } else {
        None
    };
    r.run(4, "expert training", || match &expert {
        Some(run) => c4(&cfg, run),
        None => Err("no expert run".into()),
    });

    let student = match (&expert, needs_student) {
        (Some(run), true) => {
            let s = distill_run(&cfg, &run.dir.join(harness::BEST_CHECKPOINT), &root.join("student"));
            if let Err(err) = &s {
                println!("distillation failed: {err}");
            }
            s.ok()
        }
        _ => None,
    };
    r.run(5, "distillation parity", || match (&expert, &student) {
        (Some(x), Some(s)) => c5(x, s),
        _ => Err("missing expert or student run".into()),
    });
    let student_ckpt = student.as_ref().map(|s| s.dir.join(harness::BEST_CHECKPOINT));
    r.run(8, "localization pipeline exactness", || c8(&cfg, student_ckpt.as_deref()));
    r.run(9, "localization diagnostic", || match &student_ckpt {
        Some(p) => c9(&cfg, p),
        None => Err("no student run".into()),
    });
    r.run(6, "ablation ordering", || match &expert {
        Some(x) => c6(&cfg, &x.dir.join(harness::BEST_CHECKPOINT)),
        None => Err("no expert run".into()),
    });
    r.run(10, "determinism", || match (&expert, &student) {
        (Some(x), Some(s)) => c10(&cfg, x, s),
        _ => Err("missing expert or student run".into()),
    });

    let ran: Vec<bool> = r.results.iter().filter_map(|(_, p)| *p).collect();
    let passed = ran.iter().filter(|&&p| p).count();
    let failed: Vec<u32> = r.results.iter().filter(|(_, p)| *p == Some(false)).map(|(k, _)| *k).collect();
    println!(
        "acceptance summary: {passed}/{} criteria passed{}",
        ran.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!("; failed: {failed:?}")
        }
    );
}
