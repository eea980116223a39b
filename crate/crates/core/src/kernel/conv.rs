//! Valid (unpadded) 2-D cross-correlation via im2col + GEMM.

use serde::{Deserialize, Serialize};

use super::gemm::{gemm, Layout};
use crate::error::{shape_err, Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
}

impl ConvSpec {
    pub fn new(in_channels: usize, out_channels: usize, kernel: usize, stride: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel_h: kernel,
            kernel_w: kernel,
            stride,
        }
    }

    /// Spatial output extent for an `h x w` input.
    pub fn output_extent(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        if self.stride == 0 {
            return Err(Error::InvalidArgument("conv stride must be >= 1".into()));
        }
        if h < self.kernel_h {
            return shape_err(format!(
                "height axis: input extent {h} is smaller than kernel height {}",
                self.kernel_h
            ));
        }
        if w < self.kernel_w {
            return shape_err(format!(
                "width axis: input extent {w} is smaller than kernel width {}",
                self.kernel_w
            ));
        }
        Ok((
            (h - self.kernel_h) / self.stride + 1,
            (w - self.kernel_w) / self.stride + 1,
        ))
    }

    pub fn weight_shape(&self) -> [usize; 4] {
        [self.out_channels, self.in_channels, self.kernel_h, self.kernel_w]
    }

    fn patch_len(&self) -> usize {
        self.in_channels * self.kernel_h * self.kernel_w
    }

    pub fn param_count(&self) -> usize {
        self.patch_len() * self.out_channels + self.out_channels
    }
}

/// Batch geometry of a conv input: accepts `[C,H,W]` or `[N,C,H,W]`.
#[derive(Clone, Copy, Debug)]
struct Geometry {
    batch: usize,
    h: usize,
    w: usize,
    out_h: usize,
    out_w: usize,
    unbatched: bool,
}

impl Geometry {
    fn of(input: &[usize], spec: &ConvSpec) -> Result<Self> {
        let (batch, c, h, w, unbatched) = match *input {
            [c, h, w] => (1, c, h, w, true),
            [n, c, h, w] => (n, c, h, w, false),
            _ => {
                return shape_err(format!(
                    "conv input must be [C,H,W] or [N,C,H,W], got {input:?}"
                ))
            }
        };
        if c != spec.in_channels {
            return shape_err(format!(
                "channel axis: input has {c} channels, spec expects {}",
                spec.in_channels
            ));
        }
        let (out_h, out_w) = spec.output_extent(h, w)?;
        Ok(Self {
            batch,
            h,
            w,
            out_h,
            out_w,
            unbatched,
        })
    }

    fn positions(&self) -> usize {
        self.out_h * self.out_w
    }

    fn output_shape(&self, channels: usize) -> Vec<usize> {
        if self.unbatched {
            vec![channels, self.out_h, self.out_w]
        } else {
            vec![self.batch, channels, self.out_h, self.out_w]
        }
    }
}

fn check_params(spec: &ConvSpec, weights: &Tensor, bias: &Tensor) -> Result<()> {
    if weights.shape() != spec.weight_shape() {
        return shape_err(format!(
            "weights are {:?}, spec expects {:?}",
            weights.shape(),
            spec.weight_shape()
        ));
    }
    if bias.shape() != [spec.out_channels] {
        return shape_err(format!(
            "bias is {:?}, spec expects [{}]",
            bias.shape(),
            spec.out_channels
        ));
    }
    Ok(())
}

/// Unfold patches into a `[C*kh*kw, N*H'*W']` row-major matrix.
fn im2col(x: &[f64], spec: &ConvSpec, g: &Geometry) -> Vec<f64> {
    let p = g.positions();
    let np = g.batch * p;
    let mut cols = vec![0.0; spec.patch_len() * np];
    let plane = g.h * g.w;
    let sample = spec.in_channels * plane;
    for ci in 0..spec.in_channels {
        for ki in 0..spec.kernel_h {
            for kj in 0..spec.kernel_w {
                let row = (ci * spec.kernel_h + ki) * spec.kernel_w + kj;
                let dst = &mut cols[row * np..(row + 1) * np];
                for b in 0..g.batch {
                    let src = &x[b * sample + ci * plane..];
                    for oy in 0..g.out_h {
                        let line = (oy * spec.stride + ki) * g.w + kj;
                        let out = b * p + oy * g.out_w;
                        for ox in 0..g.out_w {
                            dst[out + ox] = src[line + ox * spec.stride];
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Fold a column-gradient matrix back onto the input gradient (accumulating).
fn col2im(dcols: &[f64], spec: &ConvSpec, g: &Geometry, dx: &mut [f64]) {
    let p = g.positions();
    let np = g.batch * p;
    let plane = g.h * g.w;
    let sample = spec.in_channels * plane;
    for ci in 0..spec.in_channels {
        for ki in 0..spec.kernel_h {
            for kj in 0..spec.kernel_w {
                let row = (ci * spec.kernel_h + ki) * spec.kernel_w + kj;
                let src = &dcols[row * np..(row + 1) * np];
                for b in 0..g.batch {
                    let dst = &mut dx[b * sample + ci * plane..];
                    for oy in 0..g.out_h {
                        let line = (oy * spec.stride + ki) * g.w + kj;
                        let from = b * p + oy * g.out_w;
                        for ox in 0..g.out_w {
                            dst[line + ox * spec.stride] += src[from + ox];
                        }
                    }
                }
            }
        }
    }
}

fn forward_cols(cols: &[f64], spec: &ConvSpec, g: &Geometry, weights: &Tensor, bias: &Tensor) -> Tensor {
    let k = spec.patch_len();
    let p = g.positions();
    let np = g.batch * p;
    let co = spec.out_channels;
    let mut mat = vec![0.0; co * np];
    gemm(
        weights.values(),
        Layout::row_major(co, k),
        cols,
        Layout::row_major(k, np),
        &mut mat,
        Layout::row_major(co, np),
        0.0,
    );
    let mut out = Tensor::zeros(&g.output_shape(co));
    let dst = out.values_mut();
    let b_vals = bias.values();
    for b in 0..g.batch {
        for c in 0..co {
            let o = (b * co + c) * p;
            let m = c * np + b * p;
            for i in 0..p {
                dst[o + i] = mat[m + i] + b_vals[c];
            }
        }
    }
    out
}

/// Pure forward pass: valid cross-correlation plus per-channel bias.
pub fn conv2d_forward(input: &Tensor, spec: &ConvSpec, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    check_params(spec, weights, bias)?;
    let g = Geometry::of(input.shape(), spec)?;
    let cols = im2col(input.values(), spec, &g);
    Ok(forward_cols(&cols, spec, &g, weights, bias))
}

struct ConvTape {
    cols: Vec<f64>,
    geometry: Geometry,
}

/// Trainable convolution layer that records its unfolded input for backward.
pub struct Conv2d {
    pub spec: ConvSpec,
    pub weight: Tensor,
    pub bias: Tensor,
    tape: Option<ConvTape>,
}

impl Clone for Conv2d {
    fn clone(&self) -> Self {
        Self {
            spec: self.spec,
            weight: self.weight.clone(),
            bias: self.bias.clone(),
            tape: None,
        }
    }
}

impl Conv2d {
    pub fn new(spec: ConvSpec, weight: Tensor, bias: Tensor) -> Result<Self> {
        check_params(&spec, &weight, &bias)?;
        Ok(Self {
            spec,
            weight,
            bias,
            tape: None,
        })
    }

    /// Forward without recording.
    pub fn infer(&self, input: &Tensor) -> Result<Tensor> {
        conv2d_forward(input, &self.spec, &self.weight, &self.bias)
    }

    /// Forward that records what backward needs.
    pub fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let geometry = Geometry::of(input.shape(), &self.spec)?;
        let cols = im2col(input.values(), &self.spec, &geometry);
        let out = forward_cols(&cols, &self.spec, &geometry, &self.weight, &self.bias);
        self.tape = Some(ConvTape { cols, geometry });
        Ok(out)
    }

    /// Accumulates weight and bias gradients from `output.grad`, and the input
    /// gradient into `input.grad` when `propagate` is set. Consumes the record.
    pub fn backward(&mut self, input: &mut Tensor, output: &Tensor, propagate: bool) -> Result<()> {
        let tape = self.tape.take().ok_or(Error::NoForward("conv2d"))?;
        let g = tape.geometry;
        if output.shape() != g.output_shape(self.spec.out_channels).as_slice() {
            return shape_err(format!(
                "conv output gradient is {:?}, recorded forward produced {:?}",
                output.shape(),
                g.output_shape(self.spec.out_channels)
            ));
        }
        let k = self.spec.patch_len();
        let p = g.positions();
        let np = g.batch * p;
        let co = self.spec.out_channels;

        // Regroup upstream gradient as [C_out, N*P].
        let up = output.grad();
        let mut gmat = vec![0.0; co * np];
        for b in 0..g.batch {
            for c in 0..co {
                let src = (b * co + c) * p;
                let dst = c * np + b * p;
                gmat[dst..dst + p].copy_from_slice(&up[src..src + p]);
            }
        }

        gemm(
            &gmat,
            Layout::row_major(co, np),
            &tape.cols,
            Layout::transposed(k, np),
            self.weight.grad_mut(),
            Layout::row_major(co, k),
            1.0,
        );
        for (c, bg) in self.bias.grad_mut().iter_mut().enumerate() {
            *bg += gmat[c * np..(c + 1) * np].iter().sum::<f64>();
        }

        if propagate {
            if input.len() != g.batch * self.spec.in_channels * g.h * g.w {
                return shape_err("conv input does not match the recorded forward");
            }
            let mut dcols = vec![0.0; k * np];
            gemm(
                self.weight.values(),
                Layout::transposed(co, k),
                &gmat,
                Layout::row_major(co, np),
                &mut dcols,
                Layout::row_major(k, np),
                0.0,
            );
            col2im(&dcols, &self.spec, &g, input.grad_mut());
        }
        Ok(())
    }
}
