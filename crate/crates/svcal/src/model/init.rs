//! Seed-deterministic parameter initialization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

use super::asp::AspParams;
use super::ops::{BatchNormParams, Conv2dParams, DenseParams};
use super::res2net::BlockParams;
use super::{ModelConfig, ParameterSet};

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// He-uniform fill: U(-b, b) with b = sqrt(6 / fan_in).
fn he_uniform(weights: &mut [f64], fan_in: usize, rng: &mut ChaCha8Rng) {
    let bound = (6.0 / fan_in as f64).sqrt();
    for w in weights {
        *w = rng.gen_range(-bound..bound);
    }
}

fn init_conv(
    out_ch: usize,
    in_ch: usize,
    kernel: (usize, usize),
    stride: (usize, usize),
    pad: (usize, usize),
    rng: &mut ChaCha8Rng,
) -> Conv2dParams {
    let mut conv = Conv2dParams::zeros(out_ch, in_ch, kernel, stride, pad);
    he_uniform(&mut conv.weight, in_ch * kernel.0 * kernel.1, rng);
    conv
}

fn init_dense(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> DenseParams {
    let mut dense = DenseParams::zeros(in_dim, out_dim);
    he_uniform(&mut dense.weight, in_dim, rng);
    dense
}

fn init_block(
    config: &ModelConfig,
    in_channels: usize,
    mid: usize,
    out_channels: usize,
    stride: usize,
    rng: &mut ChaCha8Rng,
) -> BlockParams {
    let chunk = mid / config.scale;
    let projection = if stride != 1 || in_channels != out_channels {
        Some((
            init_conv(out_channels, in_channels, (1, 1), (stride, stride), (0, 0), rng),
            BatchNormParams::identity(out_channels),
        ))
    } else {
        None
    };
    BlockParams {
        scale: config.scale,
        stride,
        reduce: init_conv(mid, in_channels, (1, 1), (1, 1), (0, 0), rng),
        reduce_bn: BatchNormParams::identity(mid),
        subset_convs: (0..config.scale - 1)
            .map(|_| init_conv(chunk, chunk, (3, 3), (stride, stride), (1, 1), rng))
            .collect(),
        subset_bns: (0..config.scale - 1)
            .map(|_| BatchNormParams::identity(chunk))
            .collect(),
        expand: init_conv(out_channels, mid, (1, 1), (1, 1), (0, 0), rng),
        expand_bn: BatchNormParams::identity(out_channels),
        projection,
    }
}

/// Builds a full parameter set for `config`, deterministic in `seed`.
///
/// Convs and dense layers get He-uniform weights, batch norms start as
/// identity, and the classification rows are unit-normalized Gaussians.
pub fn init_params(config: &ModelConfig, seed: u64) -> Result<ParameterSet> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let stem = init_conv(config.stem_channels, 1, (7, 7), (2, 1), (3, 3), &mut rng);
    let stem_bn = BatchNormParams::identity(config.stem_channels);

    let mut stacks = Vec::with_capacity(config.block_specs.len());
    let mut in_channels = config.stem_channels;
    for spec in &config.block_specs {
        let mid = config.mid_channels(spec);
        let mut stack = Vec::with_capacity(spec.repeats);
        for r in 0..spec.repeats {
            let stride = if r == 0 { spec.stride } else { 1 };
            stack.push(init_block(config, in_channels, mid, spec.out_channels, stride, &mut rng));
            in_channels = spec.out_channels;
        }
        stacks.push(stack);
    }

    let pooled_channels = config.backbone_out_channels();
    let asp = AspParams {
        hidden: init_dense(pooled_channels, config.asp_hidden, &mut rng),
        score: init_dense(config.asp_hidden, 1, &mut rng),
        eps: config.asp_eps,
    };
    let embedding = init_dense(2 * pooled_channels, config.embedding_dim, &mut rng);

    let mut class_weights = vec![0.0; config.n_classes * config.embedding_dim];
    for row in class_weights.chunks_mut(config.embedding_dim) {
        loop {
            for v in row.iter_mut() {
                *v = gauss(&mut rng);
            }
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-12 {
                for v in row.iter_mut() {
                    *v /= norm;
                }
                break;
            }
        }
    }

    Ok(ParameterSet {
        stem,
        stem_bn,
        stacks,
        asp,
        embedding,
        class_weights,
        n_classes: config.n_classes,
        embedding_dim: config.embedding_dim,
    })
}
