//! Straight-line reference implementations used as oracles: plain nested
//! Vec tensors and longhand loops, sharing no forward-path code with the
//! library.

#![allow(dead_code)]

use svcal::features::FeatureMatrix;
use svcal::model::{AspParams, BatchNormParams, BlockParams, Conv2dParams, DenseParams, ParameterSet};
use svcal::tensor::TensorChw;

/// `[channel][freq][time]` nested tensor.
pub type T3 = Vec<Vec<Vec<f64>>>;

pub fn t3_zeros(c: usize, f: usize, t: usize) -> T3 {
    vec![vec![vec![0.0; t]; f]; c]
}

pub fn t3_from_tensor(x: &TensorChw) -> T3 {
    let (c, f, t) = x.shape();
    let mut out = t3_zeros(c, f, t);
    for ci in 0..c {
        for fi in 0..f {
            for ti in 0..t {
                out[ci][fi][ti] = x.get(ci, fi, ti);
            }
        }
    }
    out
}

pub fn t3_max_abs_diff(a: &T3, b: &TensorChw) -> f64 {
    let mut worst: f64 = 0.0;
    for (c, plane) in a.iter().enumerate() {
        for (f, row) in plane.iter().enumerate() {
            for (t, &v) in row.iter().enumerate() {
                worst = worst.max((v - b.get(c, f, t)).abs());
            }
        }
    }
    worst
}

pub fn naive_conv(x: &T3, p: &Conv2dParams) -> T3 {
    let in_f = x[0].len() as isize;
    let in_t = x[0][0].len() as isize;
    let out_f = ((in_f + 2 * p.pad_f as isize - p.kernel_f as isize) / p.stride_f as isize + 1) as usize;
    let out_t = ((in_t + 2 * p.pad_t as isize - p.kernel_t as isize) / p.stride_t as isize + 1) as usize;
    let mut y = t3_zeros(p.out_channels, out_f, out_t);
    for co in 0..p.out_channels {
        for ci in 0..p.in_channels {
            for kf in 0..p.kernel_f {
                for kt in 0..p.kernel_t {
                    let w = p.weight_at(co, ci, kf, kt);
                    for fo in 0..out_f {
                        let fi = (fo * p.stride_f + kf) as isize - p.pad_f as isize;
                        if fi < 0 || fi >= in_f {
                            continue;
                        }
                        for to in 0..out_t {
                            let ti = (to * p.stride_t + kt) as isize - p.pad_t as isize;
                            if ti < 0 || ti >= in_t {
                                continue;
                            }
                            y[co][fo][to] += w * x[ci][fi as usize][ti as usize];
                        }
                    }
                }
            }
        }
    }
    y
}

pub fn naive_bn(x: &T3, bn: &BatchNormParams) -> T3 {
    let mut y = x.clone();
    for (c, plane) in y.iter_mut().enumerate() {
        let scale = bn.gamma[c] / (bn.var[c] + bn.eps).sqrt();
        for row in plane {
            for v in row.iter_mut() {
                *v = (*v - bn.mean[c]) * scale + bn.beta[c];
            }
        }
    }
    y
}

pub fn naive_relu(x: &T3) -> T3 {
    let mut y = x.clone();
    for plane in &mut y {
        for row in plane {
            for v in row.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
    }
    y
}

pub fn naive_avg_pool(x: &T3, kernel: usize, stride: usize, pad: usize) -> T3 {
    let in_f = x[0].len() as isize;
    let in_t = x[0][0].len() as isize;
    let out_f = ((in_f + 2 * pad as isize - kernel as isize) / stride as isize + 1) as usize;
    let out_t = ((in_t + 2 * pad as isize - kernel as isize) / stride as isize + 1) as usize;
    let mut y = t3_zeros(x.len(), out_f, out_t);
    for (c, plane) in x.iter().enumerate() {
        for fo in 0..out_f {
            for to in 0..out_t {
                let mut acc = 0.0;
                let mut n = 0;
                for kf in 0..kernel {
                    let fi = (fo * stride + kf) as isize - pad as isize;
                    if fi < 0 || fi >= in_f {
                        continue;
                    }
                    for kt in 0..kernel {
                        let ti = (to * stride + kt) as isize - pad as isize;
                        if ti < 0 || ti >= in_t {
                            continue;
                        }
                        acc += plane[fi as usize][ti as usize];
                        n += 1;
                    }
                }
                y[c][fo][to] = acc / n as f64;
            }
        }
    }
    y
}

fn slice_channels(x: &T3, from: usize, to: usize) -> T3 {
    x[from..to].to_vec()
}

fn add_t3(a: &T3, b: &T3) -> T3 {
    let mut y = a.clone();
    for (c, plane) in y.iter_mut().enumerate() {
        for (f, row) in plane.iter_mut().enumerate() {
            for (t, v) in row.iter_mut().enumerate() {
                *v += b[c][f][t];
            }
        }
    }
    y
}

fn concat_channels(parts: Vec<T3>) -> T3 {
    let mut out = Vec::new();
    for p in parts {
        out.extend(p);
    }
    out
}

pub fn naive_block(x: &T3, b: &BlockParams) -> T3 {
    let reduced = naive_relu(&naive_bn(&naive_conv(x, &b.reduce), &b.reduce_bn));
    let chunk = reduced.len() / b.scale;

    let staged = if b.stride == 1 {
        // y_1 = x_1; y_2 = K_2(x_2); y_i = K_i(x_i + y_{i-1}).
        let mut outputs: Vec<T3> = vec![slice_channels(&reduced, 0, chunk)];
        for i in 2..=b.scale {
            let subset = slice_channels(&reduced, (i - 1) * chunk, i * chunk);
            let input = if i == 2 {
                subset
            } else {
                add_t3(&subset, outputs.last().unwrap())
            };
            outputs.push(naive_relu(&naive_bn(
                &naive_conv(&input, &b.subset_convs[i - 2]),
                &b.subset_bns[i - 2],
            )));
        }
        concat_channels(outputs)
    } else {
        let mut outputs: Vec<T3> = vec![naive_avg_pool(
            &slice_channels(&reduced, 0, chunk),
            3,
            b.stride,
            1,
        )];
        for i in 2..=b.scale {
            let subset = slice_channels(&reduced, (i - 1) * chunk, i * chunk);
            outputs.push(naive_relu(&naive_bn(
                &naive_conv(&subset, &b.subset_convs[i - 2]),
                &b.subset_bns[i - 2],
            )));
        }
        concat_channels(outputs)
    };

    let expanded = naive_bn(&naive_conv(&staged, &b.expand), &b.expand_bn);
    let shortcut = match &b.projection {
        Some((conv, bn)) => naive_bn(&naive_conv(x, conv), bn),
        None => x.clone(),
    };
    naive_relu(&add_t3(&expanded, &shortcut))
}

pub fn naive_mean_over_freq(x: &T3) -> T3 {
    let freq = x[0].len();
    let time = x[0][0].len();
    let mut y = t3_zeros(x.len(), 1, time);
    for (c, plane) in x.iter().enumerate() {
        for t in 0..time {
            let mut acc = 0.0;
            for row in plane {
                acc += row[t];
            }
            y[c][0][t] = acc / freq as f64;
        }
    }
    y
}

pub fn naive_dense(input: &[f64], d: &DenseParams) -> Vec<f64> {
    (0..d.out_dim)
        .map(|o| {
            let mut acc = d.bias[o];
            for i in 0..d.in_dim {
                acc += d.weight[o * d.in_dim + i] * input[i];
            }
            acc
        })
        .collect()
}

pub fn naive_asp(frames: &T3, p: &AspParams) -> Vec<f64> {
    let channels = frames.len();
    let time = frames[0][0].len();
    let mut scores = Vec::with_capacity(time);
    for t in 0..time {
        let column: Vec<f64> = (0..channels).map(|c| frames[c][0][t]).collect();
        let hidden: Vec<f64> = naive_dense(&column, &p.hidden).iter().map(|z| z.tanh()).collect();
        scores.push(naive_dense(&hidden, &p.score)[0]);
    }
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    let alphas: Vec<f64> = exps.iter().map(|e| e / total).collect();

    let mut out = vec![0.0; 2 * channels];
    for c in 0..channels {
        let mut mean = 0.0;
        for t in 0..time {
            mean += alphas[t] * frames[c][0][t];
        }
        let mut var = 0.0;
        for t in 0..time {
            let d = frames[c][0][t] - mean;
            var += alphas[t] * d * d;
        }
        out[c] = mean;
        out[channels + c] = (var.max(0.0) + p.eps).sqrt();
    }
    out
}

/// Full straight-line forward pass from features to the embedding vector.
pub fn naive_embed(features: &FeatureMatrix, params: &ParameterSet) -> Vec<f64> {
    let time = features.n_frames();
    let freq = features.n_mels();
    let mut x = t3_zeros(1, freq, time);
    for t in 0..time {
        for (f, &v) in features.frame(t).iter().enumerate() {
            x[0][f][t] = v;
        }
    }
    let mut h = naive_relu(&naive_bn(&naive_conv(&x, &params.stem), &params.stem_bn));
    for stack in &params.stacks {
        for block in stack {
            h = naive_block(&h, block);
        }
    }
    let pooled = naive_mean_over_freq(&h);
    let stats = naive_asp(&pooled, &params.asp);
    naive_dense(&stats, &params.embedding)
}

/// Largest elementwise relative error with an absolute floor in the
/// denominator; the standard gradient-check metric.
pub fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-8))
        .fold(0.0, f64::max)
}
