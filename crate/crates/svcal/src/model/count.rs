//! Analytic parameter and multiply-accumulate counting.

use crate::error::Result;

use super::ModelConfig;

fn bn_params(channels: usize) -> u64 {
    2 * channels as u64
}

/// Trainable scalars in the embedding network: conv weights, batch-norm
/// gamma/beta, attention and projection dense layers. The classification
/// head is training-only and counted separately by
/// [`class_head_params`].
pub fn count_params(config: &ModelConfig) -> Result<u64> {
    config.validate()?;
    let mut total = 0u64;

    // Stem: 7x7 over one input channel.
    total += (config.stem_channels * 49) as u64 + bn_params(config.stem_channels);

    let mut in_channels = config.stem_channels;
    for spec in &config.block_specs {
        let width = config.subset_width(spec);
        let mid = config.mid_channels(spec);
        for r in 0..spec.repeats {
            let stride = if r == 0 { spec.stride } else { 1 };
            total += (in_channels * mid) as u64 + bn_params(mid);
            total += ((config.scale - 1) * width * width * 9) as u64;
            total += (config.scale - 1) as u64 * bn_params(width);
            total += (mid * spec.out_channels) as u64 + bn_params(spec.out_channels);
            if stride != 1 || in_channels != spec.out_channels {
                total += (in_channels * spec.out_channels) as u64 + bn_params(spec.out_channels);
            }
            in_channels = spec.out_channels;
        }
    }

    let channels = config.backbone_out_channels();
    total += (channels * config.asp_hidden + config.asp_hidden) as u64; // attention hidden
    total += (config.asp_hidden + 1) as u64; // attention score
    total += (2 * channels * config.embedding_dim + config.embedding_dim) as u64;
    Ok(total)
}

/// Scalars in the classification head (`n_classes x embedding_dim`).
pub fn class_head_params(config: &ModelConfig) -> u64 {
    (config.n_classes * config.embedding_dim) as u64
}

fn conv_extent(input: usize, kernel: usize, pad: usize, stride: usize) -> usize {
    (input + 2 * pad - kernel) / stride + 1
}

/// Multiply-accumulates for one forward pass over `time_frames` frames,
/// counting convolutions and dense layers.
///
/// The reference tables report MACs without stating the input duration, so
/// the duration is an explicit argument here.
pub fn count_macs(config: &ModelConfig, time_frames: usize) -> Result<u64> {
    config.validate()?;
    let mut total = 0u64;

    let mut freq = conv_extent(config.input_mels, 7, 3, 2);
    let mut time = conv_extent(time_frames, 7, 3, 1);
    total += (config.stem_channels * freq * time * 49) as u64;

    let mut in_channels = config.stem_channels;
    for spec in &config.block_specs {
        let width = config.subset_width(spec);
        let mid = config.mid_channels(spec);
        for r in 0..spec.repeats {
            let stride = if r == 0 { spec.stride } else { 1 };
            let out_f = conv_extent(freq, 3, 1, stride);
            let out_t = conv_extent(time, 3, 1, stride);
            // 1x1 reduce at input resolution.
            total += (mid * freq * time * in_channels) as u64;
            // (scale-1) 3x3 subset convs at output resolution.
            total += ((config.scale - 1) * width * width * 9 * out_f * out_t) as u64;
            // 1x1 expand.
            total += (spec.out_channels * out_f * out_t * mid) as u64;
            if stride != 1 || in_channels != spec.out_channels {
                total += (spec.out_channels * out_f * out_t * in_channels) as u64;
            }
            freq = out_f;
            time = out_t;
            in_channels = spec.out_channels;
        }
    }

    let channels = config.backbone_out_channels();
    // Attention network per frame, then the embedding projection.
    total += (time * (channels * config.asp_hidden + config.asp_hidden)) as u64;
    total += (2 * channels * config.embedding_dim) as u64;
    Ok(total)
}
