use super::{NetworkSpec, Tail};
use crate::error::{shape_err, Error, Result};
use crate::kernel::{
    global_max_pool, global_max_pool_backward, relu, relu_backward, Conv2d, Linear, Pooled,
};
use crate::rng::SplitMix64;
use crate::tensor::Tensor;

/// Outputs of one forward pass on a single observation.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivationRecord {
    /// Last conv layer, post-ReLU, before any pooling: `[C, H', W']`.
    pub pre_pool_maps: Option<Tensor>,
    pub q_values: Tensor,
}

/// Activations recorded by [`Network::forward_train`], consumed by backward.
pub struct Tape {
    input: Tensor,
    pre: Vec<Tensor>,
    post: Vec<Tensor>,
    pooled: Option<Pooled>,
    tail: Tensor,
    hidden_pre: Tensor,
    hidden: Tensor,
    q: Tensor,
}

impl Tape {
    /// `[N, A]` Q-values of the recorded batch.
    pub fn q(&self) -> &Tensor {
        &self.q
    }

    /// Gradient that reached the input batch (zero unless requested).
    pub fn input(&self) -> &Tensor {
        &self.input
    }

    /// Post-ReLU last conv maps `[N, C, H', W']`.
    pub fn final_maps(&self) -> &Tensor {
        &self.post[2]
    }
}

#[derive(Clone)]
pub struct Network {
    spec: NetworkSpec,
    convs: Vec<Conv2d>,
    fc1: Linear,
    fc2: Linear,
}

fn uniform_tensor(shape: &[usize], bound: f64, rng: &mut SplitMix64) -> Tensor {
    let n = shape.iter().product();
    let v = (0..n).map(|_| rng.uniform(-bound, bound)).collect();
    Tensor::from_vec(shape, v).expect("init shape")
}

impl Network {
    /// Fan-in scaled uniform initialization, `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`
    /// for weights and biases, drawn in layer order from one stream.
    pub fn build(spec: &NetworkSpec, seed: u64) -> Result<Self> {
        Self::build_with_gain(spec, seed, 1.0)
    }

    pub fn build_with_gain(spec: &NetworkSpec, seed: u64, gain: f64) -> Result<Self> {
        spec.validate()?;
        let mut rng = SplitMix64::new(seed);
        let mut convs = Vec::with_capacity(3);
        for cs in spec.conv_layers() {
            let fan_in = (cs.in_channels * cs.kernel_h * cs.kernel_w) as f64;
            let bound = gain / fan_in.sqrt();
            let w = uniform_tensor(&cs.weight_shape(), bound, &mut rng);
            let b = uniform_tensor(&[cs.out_channels], bound, &mut rng);
            convs.push(Conv2d::new(cs, w, b)?);
        }
        let tail = spec.tail_features()?;
        let mut dense = |fan_in: usize, out: usize| -> Result<Linear> {
            let bound = gain / (fan_in as f64).sqrt();
            let w = uniform_tensor(&[out, fan_in], bound, &mut rng);
            let b = uniform_tensor(&[out], bound, &mut rng);
            Linear::new(w, b)
        };
        let fc1 = dense(tail, spec.hidden)?;
        let fc2 = dense(spec.hidden, spec.actions)?;
        Ok(Self {
            spec: spec.clone(),
            convs,
            fc1,
            fc2,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn num_actions(&self) -> usize {
        self.spec.actions
    }

    /// Parameters in canonical order with their names.
    pub fn named_params(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::with_capacity(10);
        for (i, c) in self.convs.iter().enumerate() {
            out.push((format!("conv{}.weight", i + 1), &c.weight));
            out.push((format!("conv{}.bias", i + 1), &c.bias));
        }
        out.push(("fc1.weight".into(), &self.fc1.weight));
        out.push(("fc1.bias".into(), &self.fc1.bias));
        out.push(("fc2.weight".into(), &self.fc2.weight));
        out.push(("fc2.bias".into(), &self.fc2.bias));
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = Vec::with_capacity(10);
        for c in self.convs.iter_mut() {
            out.push(&mut c.weight);
            out.push(&mut c.bias);
        }
        out.push(&mut self.fc1.weight);
        out.push(&mut self.fc1.bias);
        out.push(&mut self.fc2.weight);
        out.push(&mut self.fc2.bias);
        out
    }

    /// Scalars actually allocated.
    pub fn allocated_params(&self) -> usize {
        self.named_params().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    /// L2 norm of all parameter gradients.
    pub fn grad_norm(&self) -> f64 {
        self.named_params()
            .iter()
            .flat_map(|(_, t)| t.grad().iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    /// Bit-exact copy of another network's parameters (same spec required).
    pub fn copy_params_from(&mut self, other: &Network) -> Result<()> {
        if self.spec != other.spec {
            return Err(Error::Shape("cannot copy parameters across different specs".into()));
        }
        let src: Vec<Vec<f64>> = other.named_params().iter().map(|(_, t)| t.values().to_vec()).collect();
        for (dst, s) in self.params_mut().into_iter().zip(src) {
            dst.values_mut().copy_from_slice(&s);
        }
        Ok(())
    }

    pub fn same_params(&self, other: &Network) -> bool {
        self.spec == other.spec
            && self
                .named_params()
                .iter()
                .zip(other.named_params())
                .all(|((_, a), (_, b))| a.values() == b.values())
    }

    fn check_input(&self, shape: &[usize]) -> Result<bool> {
        let batched = match shape.len() {
            3 => false,
            4 => true,
            _ => return shape_err(format!("observation must be [S,H,W] or [N,S,H,W], got {shape:?}")),
        };
        let s = &shape[shape.len() - 3..];
        if s != self.spec.input {
            return shape_err(format!(
                "observation {:?} does not match network input {:?}",
                s, self.spec.input
            ));
        }
        Ok(batched)
    }

    fn tail_of(&self, maps: &Tensor, batch: usize) -> Result<(Tensor, Option<Pooled>)> {
        match self.spec.tail {
            Tail::MaxPool => {
                let p = global_max_pool(maps)?;
                let t = p.pooled.clone().reshape(&[batch, p.pooled.len() / batch])?;
                Ok((t, Some(p)))
            }
            Tail::Flatten => {
                let per = maps.len() / batch;
                Ok((Tensor::from_vec(&[batch, per], maps.values().to_vec())?, None))
            }
        }
    }

    /// Inference on one observation `[S,H,W]`.
    pub fn forward(&self, observation: &Tensor, capture: bool) -> Result<ActivationRecord> {
        if self.check_input(observation.shape())? {
            return shape_err("forward takes a single observation; use q_values for batches");
        }
        let batch = Tensor::from_vec(
            &[1, observation.shape()[0], observation.shape()[1], observation.shape()[2]],
            observation.values().to_vec(),
        )?;
        let (q, maps) = self.infer(&batch)?;
        let pre_pool_maps = if capture {
            let shape = maps.shape()[1..].to_vec();
            Some(Tensor::from_vec(&shape, maps.into_values())?)
        } else {
            None
        };
        Ok(ActivationRecord {
            pre_pool_maps,
            q_values: Tensor::from_vec(&[self.spec.actions], q.into_values())?,
        })
    }

    /// `[N, A]` Q-values for a batch `[N,S,H,W]`.
    pub fn q_values(&self, batch: &Tensor) -> Result<Tensor> {
        if !self.check_input(batch.shape())? {
            return shape_err("q_values expects a batch [N,S,H,W]");
        }
        Ok(self.infer(batch)?.0)
    }

    fn infer(&self, batch: &Tensor) -> Result<(Tensor, Tensor)> {
        let n = batch.shape()[0];
        let mut x = relu(&self.convs[0].infer(batch)?);
        for conv in &self.convs[1..] {
            x = relu(&conv.infer(&x)?);
        }
        let (tail, _) = self.tail_of(&x, n)?;
        let h = relu(&self.fc1.infer(&tail)?);
        let q = self.fc2.infer(&h)?;
        Ok((q, x))
    }

    /// Recording forward pass on a batch `[N,S,H,W]`.
    pub fn forward_train(&mut self, batch: &Tensor) -> Result<Tape> {
        if !self.check_input(batch.shape())? {
            return shape_err("forward_train expects a batch [N,S,H,W]");
        }
        let n = batch.shape()[0];
        let mut pre = Vec::with_capacity(3);
        let mut post: Vec<Tensor> = Vec::with_capacity(3);
        for i in 0..3 {
            let input = if i == 0 { batch } else { &post[i - 1] };
            let z = self.convs[i].forward(input)?;
            post.push(relu(&z));
            pre.push(z);
        }
        let (tail, pooled) = self.tail_of(&post[2], n)?;
        let hidden_pre = self.fc1.forward(&tail)?;
        let hidden = relu(&hidden_pre);
        let q = self.fc2.forward(&hidden)?;
        Ok(Tape {
            input: batch.clone(),
            pre,
            post,
            pooled,
            tail,
            hidden_pre,
            hidden,
            q,
        })
    }

    /// Backpropagates `dq` (`[N*A]`, row-major) through a recorded pass,
    /// accumulating into the parameter gradient planes. With
    /// `input_grad`, the gradient w.r.t. the input batch is also formed.
    pub fn backward(&mut self, tape: &mut Tape, dq: &[f64], input_grad: bool) -> Result<()> {
        if dq.len() != tape.q.len() {
            return shape_err(format!("dq has {} entries, Q batch has {}", dq.len(), tape.q.len()));
        }
        tape.q.grad_mut().copy_from_slice(dq);
        self.fc2.backward(&mut tape.hidden, &tape.q, true)?;
        relu_backward(&mut tape.hidden_pre, &tape.hidden)?;
        self.fc1.backward(&mut tape.tail, &tape.hidden_pre, true)?;
        match &mut tape.pooled {
            Some(p) => {
                p.pooled.grad_mut().copy_from_slice(tape.tail.grad());
                global_max_pool_backward(&mut tape.post[2], p)?;
            }
            None => tape.post[2].accumulate_grad(tape.tail.grad())?,
        }
        for i in (0..3).rev() {
            relu_backward(&mut tape.pre[i], &tape.post[i])?;
            let (before, _) = tape.post.split_at_mut(i);
            let input = if i == 0 { &mut tape.input } else { &mut before[i - 1] };
            self.convs[i].backward(input, &tape.pre[i], i > 0 || input_grad)?;
        }
        Ok(())
    }

    pub(crate) fn param_slots(&mut self) -> Vec<(String, &mut Tensor)> {
        let names: Vec<String> = self.named_params().into_iter().map(|(n, _)| n).collect();
        names.into_iter().zip(self.params_mut()).collect()
    }
}
