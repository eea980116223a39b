//! Python bindings: parameter accounting, gradient checks, training runs,
//! evaluation and heatmap export. Long-running calls release the GIL.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use dqn_compress::harness::{self, ExperimentConfig};
use dqn_compress::localize::{export_episode, DEFAULT_ALPHA};
use dqn_compress::net::{count_params as closed_form, Arch, NetworkSpec};
use dqn_compress::train::{final_evaluation, summarize as mean_std};

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

fn to_py(e: dqn_compress::Error) -> PyErr {
    match e {
        dqn_compress::Error::Config(_) | dqn_compress::Error::InvalidArgument(_) | dqn_compress::Error::Shape(_) => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// `None` gives the defaults; otherwise a JSON experiment configuration.
pub fn parse_config(config_json: Option<&str>, seed: Option<u64>) -> dqn_compress::Result<ExperimentConfig> {
    let mut cfg = match config_json {
        Some(text) => ExperimentConfig::from_json(text)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.seeds = vec![seed];
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_arch(arch: &str) -> PyResult<Arch> {
    arch.parse().map_err(to_py)
}

/// Closed-form parameter count of `arch` for a `(stack, height, width)` input.
#[pyfunction]
#[pyo3(signature = (arch, actions = 9, input = (4, 84, 84)))]
fn count_params(arch: &str, actions: usize, input: (usize, usize, usize)) -> PyResult<usize> {
    let spec = NetworkSpec::new(parse_arch(arch)?, [input.0, input.1, input.2], actions);
    closed_form(&spec).map_err(to_py)
}

/// `(operation, checks, max relative error)` for every differentiable op.
#[pyfunction]
#[pyo3(signature = (seed = 2024, samples = 20))]
fn gradcheck(py: Python<'_>, seed: u64, samples: usize) -> PyResult<Vec<(String, usize, f64)>> {
    let reports = py.detach(|| dqn_compress::gradcheck::run_all(seed, samples)).map_err(to_py)?;
    Ok(reports.into_iter().map(|r| (r.op, r.checks, r.max_rel_error)).collect())
}

/// Arithmetic mean and population standard deviation.
#[pyfunction]
fn summarize(rewards: Vec<f64>) -> (f64, f64) {
    mean_std(&rewards)
}

/// Q-learning run; writes the run directory `out` and returns the final
/// per-episode rewards of the selected checkpoint.
#[pyfunction]
#[pyo3(signature = (out, arch = "expert", seed = 7, config_json = None))]
fn train_expert(py: Python<'_>, out: PathBuf, arch: &str, seed: u64, config_json: Option<&str>) -> PyResult<Vec<f64>> {
    let arch = parse_arch(arch)?;
    let cfg = parse_config(config_json, Some(seed)).map_err(to_py)?;
    let outcome = py
        .detach(|| harness::run_train_expert(&cfg, arch, seed, &out, false))
        .map_err(to_py)?;
    Ok(outcome.final_rewards)
}

/// Distils the checkpoint at `expert` into a fresh `arch` student.
#[pyfunction]
#[pyo3(signature = (expert, out, arch = "max-halved", seed = 7, config_json = None))]
fn distill(py: Python<'_>, expert: PathBuf, out: PathBuf, arch: &str, seed: u64, config_json: Option<&str>) -> PyResult<Vec<f64>> {
    let arch = parse_arch(arch)?;
    let cfg = parse_config(config_json, Some(seed)).map_err(to_py)?;
    let outcome = py
        .detach(|| harness::run_distill(&cfg, &expert, arch, seed, &out, false))
        .map_err(to_py)?;
    Ok(outcome.final_rewards)
}

/// Epsilon-greedy episode rewards of a checkpoint.
#[pyfunction]
#[pyo3(signature = (checkpoint, episodes = 100, seed = 7, config_json = None))]
fn evaluate(py: Python<'_>, checkpoint: PathBuf, episodes: usize, seed: u64, config_json: Option<&str>) -> PyResult<Vec<f64>> {
    let cfg = parse_config(config_json, Some(seed)).map_err(to_py)?;
    py.detach(|| {
        let net = harness::load_network(&checkpoint)?;
        final_evaluation(&net, &cfg.env, episodes, cfg.dqn.eval_epsilon, seed)
    })
    .map_err(to_py)
}

/// Heatmap overlays for one greedy episode; returns the written image paths.
#[pyfunction]
#[pyo3(signature = (checkpoint, out, seed = 0, channels = Vec::new(), alpha = DEFAULT_ALPHA, config_json = None))]
fn export_heatmaps(
    py: Python<'_>,
    checkpoint: PathBuf,
    out: PathBuf,
    seed: u64,
    channels: Vec<usize>,
    alpha: f64,
    config_json: Option<&str>,
) -> PyResult<Vec<PathBuf>> {
    let cfg = parse_config(config_json, None).map_err(to_py)?;
    py.detach(|| {
        let net = harness::load_network(&checkpoint)?;
        export_episode(&net, &cfg.env, seed, &out, &channels, alpha)
    })
    .map(|m| m.images)
    .map_err(to_py)
}

/// Runs the command line with `argv` (without the program name); returns
/// the exit code.
#[pyfunction]
fn main(py: Python<'_>, argv: Vec<String>) -> i32 {
    py.detach(|| dqn_compress::cli_main(std::iter::once("dqn-compress".to_string()).chain(argv)))
}

#[pymodule]
fn dqn_compress_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(count_params, m)?)?;
    m.add_function(wrap_pyfunction!(gradcheck, m)?)?;
    m.add_function(wrap_pyfunction!(summarize, m)?)?;
    m.add_function(wrap_pyfunction!(train_expert, m)?)?;
    m.add_function(wrap_pyfunction!(distill, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(export_heatmaps, m)?)?;
    m.add_function(wrap_pyfunction!(main, m)?)?;
    Ok(())
}
