use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{axpy, dot, Tensor2};
use crate::error::{Error, Result};

/// Uniform Glorot bound `sqrt(6 / (fan_in + fan_out))`.
fn glorot_fill(values: &mut [f64], fan_in: usize, fan_out: usize, rng: &mut impl Rng) {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for v in values {
        *v = rng.gen_range(-bound..=bound);
    }
}

/// 1D convolution over a `seq_len x in_channels` input with zero "same"
/// padding: the output has the input's length and one column per kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv1dLayer {
    pub kernel_count: usize,
    pub kernel_size: usize,
    pub in_channels: usize,
    /// `kernel_count x in_channels x kernel_size`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv1dLayer {
    pub fn zeros(in_channels: usize, kernel_count: usize, kernel_size: usize) -> Result<Self> {
        if kernel_size % 2 == 0 {
            return Err(Error::Shape(format!("same padding needs an odd kernel, got {kernel_size}")));
        }
        Ok(Conv1dLayer {
            kernel_count,
            kernel_size,
            in_channels,
            weights: vec![0.0; kernel_count * in_channels * kernel_size],
            bias: vec![0.0; kernel_count],
        })
    }

    pub fn glorot(in_channels: usize, kernel_count: usize, kernel_size: usize, rng: &mut impl Rng) -> Result<Self> {
        let mut layer = Self::zeros(in_channels, kernel_count, kernel_size)?;
        glorot_fill(
            &mut layer.weights,
            in_channels * kernel_size,
            kernel_count * kernel_size,
            rng,
        );
        Ok(layer)
    }

    fn check_shapes(&self) -> Result<()> {
        if self.weights.len() != self.kernel_count * self.in_channels * self.kernel_size
            || self.bias.len() != self.kernel_count
            || self.kernel_size % 2 == 0
        {
            return Err(Error::Shape("conv1d parameter arrays do not match declared shape".into()));
        }
        Ok(())
    }

    fn pad(&self) -> isize {
        (self.kernel_size / 2) as isize
    }

    #[inline]
    fn w(&self, k: usize, c: usize, j: usize) -> f64 {
        self.weights[(k * self.in_channels + c) * self.kernel_size + j]
    }

    pub fn forward(&self, input: &Tensor2) -> Result<Tensor2> {
        self.check_shapes()?;
        if input.cols() != self.in_channels {
            return Err(Error::Shape(format!(
                "conv1d expects {} input channels, got {}",
                self.in_channels,
                input.cols()
            )));
        }
        let len = input.rows() as isize;
        let mut out = Tensor2::zeros(input.rows(), self.kernel_count);
        for t in 0..len {
            for k in 0..self.kernel_count {
                let mut acc = self.bias[k];
                for j in 0..self.kernel_size {
                    let src = t + j as isize - self.pad();
                    if src < 0 || src >= len {
                        continue;
                    }
                    let row = input.row(src as usize);
                    for (c, &x) in row.iter().enumerate() {
                        acc += self.w(k, c, j) * x;
                    }
                }
                out.set(t as usize, k, acc);
            }
        }
        Ok(out)
    }

    /// Accumulates parameter gradients and returns the gradient w.r.t. the input.
    pub fn backward(&self, input: &Tensor2, grad_out: &Tensor2, grad_w: &mut [f64], grad_b: &mut [f64]) -> Tensor2 {
        let len = input.rows() as isize;
        let mut grad_in = Tensor2::zeros(input.rows(), self.in_channels);
        for t in 0..len {
            for k in 0..self.kernel_count {
                let g = grad_out.get(t as usize, k);
                if g == 0.0 {
                    continue;
                }
                grad_b[k] += g;
                for j in 0..self.kernel_size {
                    let src = t + j as isize - self.pad();
                    if src < 0 || src >= len {
                        continue;
                    }
                    let src = src as usize;
                    for c in 0..self.in_channels {
                        let widx = (k * self.in_channels + c) * self.kernel_size + j;
                        grad_w[widx] += g * input.get(src, c);
                        let gi = grad_in.get(src, c) + g * self.weights[widx];
                        grad_in.set(src, c, gi);
                    }
                }
            }
        }
        grad_in
    }
}

/// Fully connected layer, `y = W x + b` with `W` stored `out_dim x in_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        DenseLayer {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    pub fn glorot(in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        let mut layer = Self::zeros(in_dim, out_dim);
        glorot_fill(&mut layer.weights, in_dim, out_dim, rng);
        layer
    }

    fn check_shapes(&self) -> Result<()> {
        if self.weights.len() != self.in_dim * self.out_dim || self.bias.len() != self.out_dim {
            return Err(Error::Shape("dense parameter arrays do not match declared shape".into()));
        }
        Ok(())
    }

    /// Batch forward: `x` is `batch x in_dim`.
    pub fn forward(&self, x: &Tensor2) -> Result<Tensor2> {
        self.check_shapes()?;
        if x.cols() != self.in_dim {
            return Err(Error::Shape(format!("dense expects {} inputs, got {}", self.in_dim, x.cols())));
        }
        let mut out = Tensor2::zeros(x.rows(), self.out_dim);
        for b in 0..x.rows() {
            let xb = x.row(b);
            let yb = out.row_mut(b);
            for (o, y) in yb.iter_mut().enumerate() {
                *y = self.bias[o] + dot(&self.weights[o * self.in_dim..(o + 1) * self.in_dim], xb);
            }
        }
        Ok(out)
    }

    /// Accumulates parameter gradients; returns the input gradient when asked.
    pub fn backward(
        &self,
        x: &Tensor2,
        grad_out: &Tensor2,
        grad_w: &mut [f64],
        grad_b: &mut [f64],
        want_input_grad: bool,
    ) -> Option<Tensor2> {
        for b in 0..x.rows() {
            let xb = x.row(b);
            for (o, &g) in grad_out.row(b).iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                grad_b[o] += g;
                axpy(g, xb, &mut grad_w[o * self.in_dim..(o + 1) * self.in_dim]);
            }
        }
        if !want_input_grad {
            return None;
        }
        let mut grad_in = Tensor2::zeros(x.rows(), self.in_dim);
        for b in 0..x.rows() {
            let gi = grad_in.row_mut(b);
            for (o, &g) in grad_out.row(b).iter().enumerate() {
                if g != 0.0 {
                    axpy(g, &self.weights[o * self.in_dim..(o + 1) * self.in_dim], gi);
                }
            }
        }
        Some(grad_in)
    }
}
