//! Fully connected layer: `y = W x + b`, batched over a leading axis.

use super::gemm::{gemm, Layout};
use crate::error::{shape_err, Error, Result};
use crate::tensor::Tensor;

/// `(batch, unbatched)` for an input of `[n]` or `[N, n]`.
fn batch_of(input: &[usize], in_features: usize) -> Result<(usize, bool)> {
    match *input {
        [n] if n == in_features => Ok((1, true)),
        [b, n] if n == in_features => Ok((b, false)),
        _ => shape_err(format!(
            "linear input {input:?} does not end in the expected feature extent {in_features}"
        )),
    }
}

fn check_params(weights: &Tensor, bias: &Tensor) -> Result<(usize, usize)> {
    let (out, inp) = match *weights.shape() {
        [m, n] => (m, n),
        ref s => return shape_err(format!("linear weights must be [m, n], got {s:?}")),
    };
    if bias.shape() != [out] {
        return shape_err(format!("bias is {:?}, weights imply [{out}]", bias.shape()));
    }
    Ok((out, inp))
}

/// Pure affine map.
pub fn linear(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (out, inp) = check_params(weights, bias)?;
    let (batch, unbatched) = batch_of(input.shape(), inp)?;
    let shape = if unbatched { vec![out] } else { vec![batch, out] };
    let mut y = Tensor::zeros(&shape);
    {
        let dst = y.values_mut();
        for row in dst.chunks_exact_mut(out) {
            row.copy_from_slice(bias.values());
        }
        gemm(
            input.values(),
            Layout::row_major(batch, inp),
            weights.values(),
            Layout::transposed(out, inp),
            dst,
            Layout::row_major(batch, out),
            1.0,
        );
    }
    Ok(y)
}

#[derive(Clone)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
    recorded: Option<usize>,
}

impl Linear {
    pub fn new(weight: Tensor, bias: Tensor) -> Result<Self> {
        check_params(&weight, &bias)?;
        Ok(Self {
            weight,
            bias,
            recorded: None,
        })
    }

    pub fn in_features(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_features(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn infer(&self, input: &Tensor) -> Result<Tensor> {
        linear(input, &self.weight, &self.bias)
    }

    pub fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let y = linear(input, &self.weight, &self.bias)?;
        self.recorded = Some(batch_of(input.shape(), self.in_features())?.0);
        Ok(y)
    }

    /// Reads `output.grad`; accumulates parameter gradients and, if
    /// `propagate`, the input gradient.
    pub fn backward(&mut self, input: &mut Tensor, output: &Tensor, propagate: bool) -> Result<()> {
        let batch = self.recorded.take().ok_or(Error::NoForward("linear"))?;
        let (out, inp) = (self.out_features(), self.in_features());
        if input.len() != batch * inp || output.len() != batch * out {
            return shape_err("linear tensors do not match the recorded forward");
        }
        let dy = output.grad();
        gemm(
            dy,
            Layout::transposed(batch, out),
            input.values(),
            Layout::row_major(batch, inp),
            self.weight.grad_mut(),
            Layout::row_major(out, inp),
            1.0,
        );
        for row in dy.chunks_exact(out) {
            for (g, d) in self.bias.grad_mut().iter_mut().zip(row) {
                *g += d;
            }
        }
        if propagate {
            gemm(
                dy,
                Layout::row_major(batch, out),
                self.weight.values(),
                Layout::row_major(out, inp),
                input.grad_mut(),
                Layout::row_major(batch, inp),
                1.0,
            );
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_weights_pass_input_through() {
        let mut w = Tensor::zeros(&[3, 3]);
        for i in 0..3 {
            w.set(&[i, i], 1.0);
        }
        let x = Tensor::from_vec(&[3], vec![0.5, -2.0, 7.0]).unwrap();
        let y = linear(&x, &w, &Tensor::zeros(&[3])).unwrap();
        assert_eq!(y.values(), x.values());
    }

    #[test]
    fn small_hand_example() {
        let w = Tensor::from_vec(&[2, 2], vec![1.0, 1.0, 1.0, -1.0]).unwrap();
        let x = Tensor::from_vec(&[2], vec![2.0, 3.0]).unwrap();
        let y = linear(&x, &w, &Tensor::zeros(&[2])).unwrap();
        assert_eq!(y.values(), &[5.0, -1.0]);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let w = Tensor::zeros(&[2, 3]);
        assert!(linear(&Tensor::zeros(&[2]), &w, &Tensor::zeros(&[2])).is_err());
        assert!(linear(&Tensor::zeros(&[3]), &w, &Tensor::zeros(&[3])).is_err());
    }

    #[test]
    fn backward_requires_forward() {
        let mut l = Linear::new(Tensor::zeros(&[1, 1]), Tensor::zeros(&[1])).unwrap();
        let mut x = Tensor::zeros(&[1]);
        let y = Tensor::zeros(&[1]);
        assert!(l.backward(&mut x, &y, true).is_err());
    }
}
