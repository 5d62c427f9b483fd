//! Parameter containers and forward primitives (conv, batch norm, dense).

use crate::error::{Error, Result};
use crate::tensor::TensorChw;

/// 2-D convolution weights plus geometry. Layout `[out][in][kf][kt]`,
/// no bias (batch norm follows every conv).
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2dParams {
    pub out_channels: usize,
    pub in_channels: usize,
    pub kernel_f: usize,
    pub kernel_t: usize,
    pub stride_f: usize,
    pub stride_t: usize,
    pub pad_f: usize,
    pub pad_t: usize,
    pub weight: Vec<f64>,
}

impl Conv2dParams {
    pub fn zeros(
        out_channels: usize,
        in_channels: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        pad: (usize, usize),
    ) -> Self {
        Self {
            out_channels,
            in_channels,
            kernel_f: kernel.0,
            kernel_t: kernel.1,
            stride_f: stride.0,
            stride_t: stride.1,
            pad_f: pad.0,
            pad_t: pad.1,
            weight: vec![0.0; out_channels * in_channels * kernel.0 * kernel.1],
        }
    }

    pub fn weight_count(&self) -> usize {
        self.weight.len()
    }

    #[inline]
    pub fn weight_at(&self, co: usize, ci: usize, kf: usize, kt: usize) -> f64 {
        self.weight[((co * self.in_channels + ci) * self.kernel_f + kf) * self.kernel_t + kt]
    }

    pub fn set_weight(&mut self, co: usize, ci: usize, kf: usize, kt: usize, v: f64) {
        self.weight[((co * self.in_channels + ci) * self.kernel_f + kf) * self.kernel_t + kt] = v;
    }
}

/// Inference-mode batch norm: per-channel affine over stored statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormParams {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub eps: f64,
}

impl BatchNormParams {
    pub fn identity(channels: usize) -> Self {
        Self {
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            mean: vec![0.0; channels],
            var: vec![1.0; channels],
            eps: 1e-5,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    /// Trainable scalars (gamma and beta; running stats are buffers).
    pub fn param_count(&self) -> usize {
        2 * self.channels()
    }
}

/// Fully connected layer, weight layout `[out][in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseParams {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weight: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn apply(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.in_dim {
            return Err(Error::Data(format!(
                "dense input dim {} does not match layer dim {}",
                input.len(),
                self.in_dim
            )));
        }
        Ok((0..self.out_dim)
            .map(|o| {
                let row = &self.weight[o * self.in_dim..(o + 1) * self.in_dim];
                self.bias[o] + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>()
            })
            .collect())
    }
}

pub fn conv_out_extent(input: usize, kernel: usize, pad: usize, stride: usize) -> Result<usize> {
    if stride == 0 {
        return Err(Error::Config("conv stride must be positive".into()));
    }
    let padded = input + 2 * pad;
    if padded < kernel {
        return Err(Error::Data(format!(
            "conv input extent {input} (+{pad} pad) smaller than kernel {kernel}"
        )));
    }
    Ok((padded - kernel) / stride + 1)
}

/// Zero-padded 2-D convolution.
pub fn conv2d(x: &TensorChw, p: &Conv2dParams) -> Result<TensorChw> {
    if x.channels() != p.in_channels {
        return Err(Error::Config(format!(
            "conv expects {} input channels, got {}",
            p.in_channels,
            x.channels()
        )));
    }
    let out_f = conv_out_extent(x.freq(), p.kernel_f, p.pad_f, p.stride_f)?;
    let out_t = conv_out_extent(x.time(), p.kernel_t, p.pad_t, p.stride_t)?;
    let in_t = x.time() as isize;
    let stride_t = p.stride_t as isize;
    let mut y = TensorChw::zeros(p.out_channels, out_f, out_t);

    for co in 0..p.out_channels {
        for ci in 0..p.in_channels {
            for kf in 0..p.kernel_f {
                for kt in 0..p.kernel_t {
                    let w = p.weight_at(co, ci, kf, kt);
                    let shift_t = kt as isize - p.pad_t as isize;
                    // Output time range with in-bounds input samples.
                    let to_lo = if shift_t >= 0 {
                        0
                    } else {
                        ((-shift_t + stride_t - 1) / stride_t) as usize
                    };
                    let to_hi = if in_t > shift_t {
                        (((in_t - shift_t + stride_t - 1) / stride_t) as usize).min(out_t)
                    } else {
                        0
                    };
                    if to_lo >= to_hi {
                        continue;
                    }
                    for fo in 0..out_f {
                        let fi = (fo * p.stride_f + kf) as isize - p.pad_f as isize;
                        if fi < 0 || fi >= x.freq() as isize {
                            continue;
                        }
                        let in_row = x.row(ci, fi as usize);
                        let out_row = y.row_mut(co, fo);
                        if p.stride_t == 1 {
                            let base = shift_t;
                            for to in to_lo..to_hi {
                                out_row[to] += w * in_row[(to as isize + base) as usize];
                            }
                        } else {
                            for to in to_lo..to_hi {
                                out_row[to] += w * in_row[(to as isize * stride_t + shift_t) as usize];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(y)
}

/// Applies inference-mode batch norm channelwise.
pub fn batch_norm(x: &TensorChw, bn: &BatchNormParams) -> Result<TensorChw> {
    if x.channels() != bn.channels() {
        return Err(Error::Config(format!(
            "batch norm expects {} channels, got {}",
            bn.channels(),
            x.channels()
        )));
    }
    let mut y = x.clone();
    for c in 0..x.channels() {
        let scale = bn.gamma[c] / (bn.var[c] + bn.eps).sqrt();
        let offset = bn.beta[c] - bn.mean[c] * scale;
        for f in 0..x.freq() {
            for v in y.row_mut(c, f) {
                *v = *v * scale + offset;
            }
        }
    }
    Ok(y)
}

/// 3x3/stride-2/pad-1 style average pooling over valid taps
/// (padding cells are not counted in the divisor).
pub fn avg_pool2d(x: &TensorChw, kernel: usize, stride: usize, pad: usize) -> Result<TensorChw> {
    let out_f = conv_out_extent(x.freq(), kernel, pad, stride)?;
    let out_t = conv_out_extent(x.time(), kernel, pad, stride)?;
    let mut y = TensorChw::zeros(x.channels(), out_f, out_t);
    for c in 0..x.channels() {
        for fo in 0..out_f {
            for to in 0..out_t {
                let mut acc = 0.0;
                let mut n = 0usize;
                for kf in 0..kernel {
                    let fi = (fo * stride + kf) as isize - pad as isize;
                    if fi < 0 || fi >= x.freq() as isize {
                        continue;
                    }
                    for kt in 0..kernel {
                        let ti = (to * stride + kt) as isize - pad as isize;
                        if ti < 0 || ti >= x.time() as isize {
                            continue;
                        }
                        acc += x.get(c, fi as usize, ti as usize);
                        n += 1;
                    }
                }
                y.set(c, fo, to, acc / n as f64);
            }
        }
    }
    Ok(y)
}

/// Mean over the frequency axis, collapsing to shape (C, 1, T).
pub fn mean_over_freq(x: &TensorChw) -> TensorChw {
    let mut y = TensorChw::zeros(x.channels(), 1, x.time());
    let inv = 1.0 / x.freq() as f64;
    for c in 0..x.channels() {
        for f in 0..x.freq() {
            let src = x.row(c, f);
            let dst = y.row_mut(c, 0);
            for (d, s) in dst.iter_mut().zip(src) {
                *d += *s;
            }
        }
        for d in y.row_mut(c, 0) {
            *d *= inv;
        }
    }
    y
}
