//! ReLU and global spatial max pooling.

use crate::error::{shape_err, Result};
use crate::tensor::{first_argmax, Tensor};

pub fn relu(input: &Tensor) -> Tensor {
    let values = input.values().iter().map(|&x| x.max(0.0)).collect();
    Tensor::from_vec(input.shape(), values).expect("same shape")
}

/// `input.grad += output.grad` where the input was strictly positive.
pub fn relu_backward(input: &mut Tensor, output: &Tensor) -> Result<()> {
    if input.shape() != output.shape() {
        return shape_err(format!(
            "relu input {:?} vs output {:?}",
            input.shape(),
            output.shape()
        ));
    }
    let (x, gx) = input.planes_mut();
    for ((g, &v), &up) in gx.iter_mut().zip(x.iter()).zip(output.grad()) {
        if v > 0.0 {
            *g += up;
        }
    }
    Ok(())
}

/// Per-channel spatial maxima and where they were found.
#[derive(Clone, Debug, PartialEq)]
pub struct Pooled {
    /// `[C]` for an unbatched input, `[N, C]` for a batch.
    pub pooled: Tensor,
    /// `(h, w)` of the first maximal element per (sample, channel), row-major.
    pub argmax: Vec<(usize, usize)>,
}

fn pool_geometry(shape: &[usize]) -> Result<(usize, usize, usize, usize, bool)> {
    match *shape {
        [c, h, w] if h >= 1 && w >= 1 => Ok((1, c, h, w, true)),
        [n, c, h, w] if h >= 1 && w >= 1 => Ok((n, c, h, w, false)),
        _ => shape_err(format!(
            "global max pool expects [C,H,W] or [N,C,H,W] with H,W >= 1, got {shape:?}"
        )),
    }
}

pub fn global_max_pool(input: &Tensor) -> Result<Pooled> {
    let (n, c, h, w, unbatched) = pool_geometry(input.shape())?;
    let plane = h * w;
    let mut pooled = Vec::with_capacity(n * c);
    let mut argmax = Vec::with_capacity(n * c);
    for map in input.values().chunks_exact(plane) {
        let i = first_argmax(map);
        pooled.push(map[i]);
        argmax.push((i / w, i % w));
    }
    let shape = if unbatched { vec![c] } else { vec![n, c] };
    Ok(Pooled {
        pooled: Tensor::from_vec(&shape, pooled)?,
        argmax,
    })
}

/// Routes each pooled gradient entirely to its recorded argmax position.
pub fn global_max_pool_backward(input: &mut Tensor, pooled: &Pooled) -> Result<()> {
    let (n, c, h, w, _) = pool_geometry(input.shape())?;
    if pooled.argmax.len() != n * c || pooled.pooled.len() != n * c {
        return shape_err("pooled record does not match the pool input");
    }
    let plane = h * w;
    let gx = input.grad_mut();
    for (k, (&(y, x), &up)) in pooled.argmax.iter().zip(pooled.pooled.grad()).enumerate() {
        gx[k * plane + y * w + x] += up;
    }
    Ok(())
}
