//! Central-difference verification of every backward pass.
//!
//! Each check builds a random instance, forms the scalar `L = sum(r * y)`
//! with a fixed random `r`, and compares the analytic gradient of `L` with
//! `(L(x + h) - L(x - h)) / 2h` at sampled coordinates. The error measure is
//! `|analytic - numeric| / max(1, |analytic|)`.

use serde::Serialize;

use crate::distill::{distill_gradient, DistillConfig};
use crate::env::{EnvConfig, Observation};
use crate::error::Result;
use crate::kernel::{
    global_max_pool, global_max_pool_backward, huber_loss, kl_to_softmax, relu, relu_backward, softmax_temperature,
    Conv2d, ConvSpec, Linear,
};
use crate::net::{Arch, Network, NetworkSpec};
use crate::rng::SplitMix64;
use crate::tensor::Tensor;

pub const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradReport {
    pub op: String,
    pub checks: usize,
    pub max_rel_error: f64,
}

impl GradReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= TOLERANCE
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(1.0)
}

fn random_tensor(shape: &[usize], rng: &mut SplitMix64) -> Tensor {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect()).expect("shape")
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Accumulates the worst error over sampled coordinates of one buffer.
struct Tally {
    checks: usize,
    worst: f64,
}

impl Tally {
    fn new() -> Self {
        Self { checks: 0, worst: 0.0 }
    }

    fn record(&mut self, analytic: f64, numeric: f64) {
        self.checks += 1;
        self.worst = self.worst.max(relative_error(analytic, numeric));
    }

    fn report(self, op: &str) -> GradReport {
        GradReport {
            op: op.to_string(),
            checks: self.checks,
            max_rel_error: self.worst,
        }
    }
}

/// Central difference of `eval` in the coordinate written by `set`;
/// the coordinate is restored to `base` afterwards.
fn central<S>(
    state: &mut S,
    base: f64,
    set: impl Fn(&mut S, f64),
    eval: impl Fn(&S) -> Result<f64>,
) -> Result<f64> {
    set(state, base + STEP);
    let up = eval(state)?;
    set(state, base - STEP);
    let down = eval(state)?;
    set(state, base);
    Ok((up - down) / (2.0 * STEP))
}

fn sample_indices(len: usize, count: usize, rng: &mut SplitMix64) -> Vec<usize> {
    (0..count).map(|_| rng.bounded(len)).collect()
}

fn conv_slot<'a>(conv: &'a mut Conv2d, input: &'a mut Tensor, which: usize) -> &'a mut [f64] {
    match which {
        0 => conv.weight.values_mut(),
        1 => conv.bias.values_mut(),
        _ => input.values_mut(),
    }
}

pub fn check_conv2d(seed: u64, samples: usize) -> Result<GradReport> {
    let mut rng = SplitMix64::new(seed);
    let spec = ConvSpec::new(3, 4, 3, 2);
    let input = random_tensor(&[2, 3, 9, 9], &mut rng);
    let mut conv = Conv2d::new(
        spec,
        random_tensor(&spec.weight_shape(), &mut rng),
        random_tensor(&[4], &mut rng),
    )?;
    let out_shape = conv.infer(&input)?.shape().to_vec();
    let r = random_tensor(&out_shape, &mut rng);

    let mut x = input.clone();
    let mut y = conv.forward(&x)?;
    y.grad_mut().copy_from_slice(r.values());
    conv.backward(&mut x, &y, true)?;

    let slot = conv_slot;
    let mut tally = Tally::new();
    for which in 0..3 {
        let len = [conv.weight.len(), conv.bias.len(), input.len()][which];
        for i in sample_indices(len, samples, &mut rng) {
            let analytic = [conv.weight.grad(), conv.bias.grad(), x.grad()][which][i];
            let mut state = (conv.clone(), input.clone());
            let base = slot(&mut state.0, &mut state.1, which)[i];
            let numeric = central(
                &mut state,
                base,
                |(c, x), v| slot(c, x, which)[i] = v,
                |(c, x)| Ok(dot(c.infer(x)?.values(), r.values())),
            )?;
            tally.record(analytic, numeric);
        }
    }
    Ok(tally.report("conv2d"))
}

fn linear_slot<'a>(fc: &'a mut Linear, input: &'a mut Tensor, which: usize) -> &'a mut [f64] {
    match which {
        0 => fc.weight.values_mut(),
        1 => fc.bias.values_mut(),
        _ => input.values_mut(),
    }
}

pub fn check_linear(seed: u64, samples: usize) -> Result<GradReport> {
    let mut rng = SplitMix64::new(seed);
    let input = random_tensor(&[3, 7], &mut rng);
    let mut fc = Linear::new(random_tensor(&[5, 7], &mut rng), random_tensor(&[5], &mut rng))?;
    let r = random_tensor(&[3, 5], &mut rng);

    let mut x = input.clone();
    let mut y = fc.forward(&x)?;
    y.grad_mut().copy_from_slice(r.values());
    fc.backward(&mut x, &y, true)?;

    let slot = linear_slot;
    let mut tally = Tally::new();
    for which in 0..3 {
        let len = [fc.weight.len(), fc.bias.len(), input.len()][which];
        for i in sample_indices(len, samples, &mut rng) {
            let analytic = [fc.weight.grad(), fc.bias.grad(), x.grad()][which][i];
            let mut state = (fc.clone(), input.clone());
            let base = slot(&mut state.0, &mut state.1, which)[i];
            let numeric = central(
                &mut state,
                base,
                |(c, x), v| slot(c, x, which)[i] = v,
                |(c, x)| Ok(dot(c.infer(x)?.values(), r.values())),
            )?;
            tally.record(analytic, numeric);
        }
    }
    Ok(tally.report("linear"))
}

/// Inputs are kept at least `0.05` away from the kink at zero.
pub fn check_relu(seed: u64, samples: usize) -> Result<GradReport> {
    let mut rng = SplitMix64::new(seed);
    let n = 40;
    let values: Vec<f64> = (0..n)
        .map(|_| {
            let m = rng.uniform(0.05, 1.0);
            if rng.bounded(2) == 0 { m } else { -m }
        })
        .collect();
    let input = Tensor::from_vec(&[n], values)?;
    let r = random_tensor(&[n], &mut rng);
    let mut x = input.clone();
    let mut y = relu(&x);
    y.grad_mut().copy_from_slice(r.values());
    relu_backward(&mut x, &y)?;

    let mut tally = Tally::new();
    for i in sample_indices(n, samples, &mut rng) {
        let mut probe = input.clone();
        let base = probe.values()[i];
        let numeric = central(
            &mut probe,
            base,
            |t, v| t.values_mut()[i] = v,
            |t| Ok(dot(relu(t).values(), r.values())),
        )?;
        tally.record(x.grad()[i], numeric);
    }
    Ok(tally.report("relu"))
}

/// Maps hold distinct values spaced `0.01` apart so the argmax is stable
/// under the probe step.
pub fn check_global_max_pool(seed: u64, samples: usize) -> Result<GradReport> {
    let mut rng = SplitMix64::new(seed);
    let (n, c, h, w) = (2, 3, 4, 5);
    let plane = h * w;
    let mut values = Vec::with_capacity(n * c * plane);
    for _ in 0..n * c {
        let mut levels: Vec<f64> = (0..plane).map(|k| k as f64 * 0.01).collect();
        for k in (1..plane).rev() {
            levels.swap(k, rng.bounded(k + 1));
        }
        values.extend(levels);
    }
    let input = Tensor::from_vec(&[n, c, h, w], values)?;
    let r = random_tensor(&[n, c], &mut rng);
    let mut x = input.clone();
    let mut pooled = global_max_pool(&x)?;
    pooled.pooled.grad_mut().copy_from_slice(r.values());
    global_max_pool_backward(&mut x, &pooled)?;

    let mut tally = Tally::new();
    // Half the probes land on argmax cells, where the gradient is nonzero.
    let hot: Vec<usize> = pooled
        .argmax
        .iter()
        .enumerate()
        .map(|(k, &(y, xx))| k * plane + y * w + xx)
        .collect();
    for s in 0..samples {
        let i = if s % 2 == 0 { hot[rng.bounded(hot.len())] } else { rng.bounded(input.len()) };
        let mut probe = input.clone();
        let base = probe.values()[i];
        let numeric = central(
            &mut probe,
            base,
            |t, v| t.values_mut()[i] = v,
            |t| Ok(dot(global_max_pool(t)?.pooled.values(), r.values())),
        )?;
        tally.record(x.grad()[i], numeric);
    }
    Ok(tally.report("global_max_pool"))
}

/// Predictions are placed away from the `|pred - target| = delta` seam.
pub fn check_huber(seed: u64, samples: usize) -> Result<GradReport> {
    let mut rng = SplitMix64::new(seed);
    let mut tally = Tally::new();
    for s in 0..samples {
        let target = rng.uniform(-2.0, 2.0);
        let gap = if s % 2 == 0 { rng.uniform(0.0, 0.9) } else { rng.uniform(1.1, 3.0) };
        let pred = if rng.bounded(2) == 0 { target + gap } else { target - gap };
        let (_, analytic) = huber_loss(pred, target, 1.0);
        let numeric = central(&mut pred.clone(), pred, |p, v| *p = v, |&p| Ok(huber_loss(p, target, 1.0).0))?;
        tally.record(analytic, numeric);
    }
    Ok(tally.report("huber"))
}

pub fn check_kl_softmax(seed: u64, samples: usize) -> Result<GradReport> {
    let mut rng = SplitMix64::new(seed);
    let mut tally = Tally::new();
    for s in 0..samples {
        let tau = [1.0, 0.5, 2.0][s % 3];
        let target_q: Vec<f64> = (0..4).map(|_| rng.uniform(-2.0, 2.0)).collect();
        let target = softmax_temperature(&target_q, 0.7)?;
        let logits: Vec<f64> = (0..4).map(|_| rng.uniform(-2.0, 2.0)).collect();
        let (_, grad) = kl_to_softmax(&target, &logits, tau)?;
        let i = rng.bounded(4);
        let numeric = central(
            &mut logits.clone(),
            logits[i],
            |l, v| l[i] = v,
            |l| Ok(kl_to_softmax(&target, l, tau)?.0),
        )?;
        tally.record(grad[i], numeric);
    }
    Ok(tally.report("kl_softmax"))
}

/// End-to-end check of [`Network::backward`] on a two-sample batch, over
/// parameters of every layer and over the input.
pub fn check_network(arch: Arch, seed: u64, samples: usize) -> Result<GradReport> {
    let mut rng = SplitMix64::new(seed);
    let mut spec = NetworkSpec::new(arch, [2, 44, 44], 3);
    spec.hidden = 16;
    let mut net = Network::build(&spec, rng.next_u64())?;
    let input = {
        let mut t = random_tensor(&[2, 2, 44, 44], &mut rng);
        t.values_mut().iter_mut().for_each(|v| *v = (*v + 1.0) / 2.0);
        t
    };
    let r = random_tensor(&[2, 3], &mut rng);
    net.zero_grad();
    let mut tape = net.forward_train(&input)?;
    net.backward(&mut tape, r.values(), true)?;
    let grads: Vec<Vec<f64>> = net.named_params().iter().map(|(_, t)| t.grad().to_vec()).collect();
    let input_grad = tape.input().grad().to_vec();

    let loss = |net: &Network, x: &Tensor| -> Result<f64> { Ok(dot(net.q_values(x)?.values(), r.values())) };
    let mut tally = Tally::new();
    let layers = grads.len();
    for s in 0..samples {
        let which = s % (layers + 1);
        if which == layers {
            let i = rng.bounded(input.len());
            let mut x = input.clone();
            let base = x.values()[i];
            let numeric = central(&mut x, base, |t, v| t.values_mut()[i] = v, |t| loss(&net, t))?;
            tally.record(input_grad[i], numeric);
        } else {
            let i = rng.bounded(grads[which].len());
            let mut probe = net.clone();
            let base = probe.params_mut()[which].values()[i];
            let numeric = central(
                &mut probe,
                base,
                |n, v| n.params_mut()[which].values_mut()[i] = v,
                |n| loss(n, &input),
            )?;
            tally.record(grads[which][i], numeric);
        }
    }
    Ok(tally.report(&format!("network:{}", arch.name())))
}

/// Distillation loss through a small student, over every parameter tensor.
pub fn check_distill(seed: u64, samples: usize) -> Result<GradReport> {
    let mut rng = SplitMix64::new(seed);
    let env_cfg = EnvConfig {
        grid_h: 6,
        grid_w: 6,
        render_h: 36,
        render_w: 36,
        frame_stack: 2,
        ..EnvConfig::catch()
    };
    let (mut env, mut obs) = crate::env::reset(&env_cfg, rng.next_u64())?;
    let mut states = Vec::new();
    for k in 0..3 {
        states.push(obs.clone());
        obs = env.step(k % 3)?.observation;
    }
    let batch: Vec<&Observation> = states.iter().collect();
    let mut spec = NetworkSpec::new(Arch::MaxHalved, env_cfg.observation_shape(), 3);
    spec.hidden = 16;
    let expert = Network::build_with_gain(&NetworkSpec::new(Arch::Expert, spec.input, 3), rng.next_u64(), 2.0)?;
    let mut student = Network::build_with_gain(&spec, rng.next_u64(), 2.0)?;
    let cfg = DistillConfig {
        tau_expert: 0.5,
        tau_student: 1.5,
        ..DistillConfig::default()
    };
    distill_gradient(&mut student, &expert, &batch, &cfg)?;
    let grads: Vec<Vec<f64>> = student.named_params().iter().map(|(_, t)| t.grad().to_vec()).collect();

    let states_t = Observation::batch_tensor(&batch)?;
    let expert_q = expert.q_values(&states_t)?;
    let loss = |net: &Network| -> Result<f64> {
        let q = net.q_values(&states_t)?;
        let mut total = 0.0;
        for i in 0..batch.len() {
            let p = softmax_temperature(&expert_q.values()[i * 3..i * 3 + 3], cfg.tau_expert)?;
            total += kl_to_softmax(&p, &q.values()[i * 3..i * 3 + 3], cfg.tau_student)?.0;
        }
        Ok(total / batch.len() as f64)
    };
    let mut tally = Tally::new();
    for s in 0..samples {
        let which = s % grads.len();
        let i = rng.bounded(grads[which].len());
        let mut probe = student.clone();
        let base = probe.params_mut()[which].values()[i];
        let numeric = central(&mut probe, base, |n, v| n.params_mut()[which].values_mut()[i] = v, |n| loss(n))?;
        tally.record(grads[which][i], numeric);
    }
    Ok(tally.report("distill_kl"))
}

/// Runs every check with `samples` probes each.
pub fn run_all(seed: u64, samples: usize) -> Result<Vec<GradReport>> {
    let mut out = vec![
        check_conv2d(seed, samples)?,
        check_linear(seed, samples)?,
        check_relu(seed, samples)?,
        check_global_max_pool(seed, samples)?,
        check_huber(seed, samples)?,
        check_kl_softmax(seed, samples)?,
        check_distill(seed, samples)?,
    ];
    for arch in Arch::ALL {
        out.push(check_network(arch, seed, samples)?);
    }
    Ok(out)
}
