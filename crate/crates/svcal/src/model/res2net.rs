//! Multi-scale residual unit: channel slicing with a hierarchical
//! conv cascade, and the bottleneck block built around it.

use crate::error::{Error, Result};
use crate::tensor::TensorChw;

use super::ops::{avg_pool2d, batch_norm, conv2d, BatchNormParams, Conv2dParams};

/// Splits `x` into `scale` channel subsets and chains them:
/// the first subset passes through, subset 2 goes through its conv, and
/// every later subset is summed with the previous output before its conv.
/// `apply` receives the subset index (2-based) and the conv input.
fn cascade<F>(x: &TensorChw, scale: usize, mut apply: F) -> Result<TensorChw>
where
    F: FnMut(usize, &TensorChw) -> Result<TensorChw>,
{
    let chunk = x.channels() / scale;
    let mut outputs: Vec<TensorChw> = Vec::with_capacity(scale);
    outputs.push(x.slice_channels(0, chunk));
    for i in 2..=scale {
        let subset = x.slice_channels((i - 1) * chunk, i * chunk);
        let input = if i == 2 {
            subset
        } else {
            subset.add(outputs.last().unwrap())
        };
        outputs.push(apply(i, &input)?);
    }
    Ok(TensorChw::concat_channels(&outputs))
}

fn check_subset_convs(chunk: usize, scale: usize, subset_convs: &[Conv2dParams]) -> Result<()> {
    if subset_convs.len() != scale - 1 {
        return Err(Error::Config(format!(
            "expected {} subset convs for scale {}, got {}",
            scale - 1,
            scale,
            subset_convs.len()
        )));
    }
    for (i, conv) in subset_convs.iter().enumerate() {
        if conv.in_channels != chunk || conv.out_channels != chunk {
            return Err(Error::Config(format!(
                "subset conv {} maps {}->{} channels, expected {}->{}",
                i + 2,
                conv.in_channels,
                conv.out_channels,
                chunk,
                chunk
            )));
        }
    }
    Ok(())
}

/// Forward pass of the multi-scale unit at stride 1.
///
/// `subset_convs` holds the 3x3 convs for subsets `2..=scale` (pad 1,
/// stride 1), so output shape equals input shape.
pub fn res2net_module_forward(
    x: &TensorChw,
    subset_convs: &[Conv2dParams],
    scale: usize,
) -> Result<TensorChw> {
    if scale < 2 {
        return Err(Error::Config("scale must be at least 2".into()));
    }
    if x.channels() % scale != 0 {
        return Err(Error::Config(format!(
            "channel count {} is not divisible by scale {}",
            x.channels(),
            scale
        )));
    }
    check_subset_convs(x.channels() / scale, scale, subset_convs)?;
    cascade(x, scale, |i, input| conv2d(input, &subset_convs[i - 2]))
}

/// One bottleneck block: 1x1 reduce, multi-scale 3x3 stage, 1x1 expand,
/// residual connection.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams {
    pub scale: usize,
    /// 1 or 2. A stride-2 block downsamples inside the 3x3 stage and uses a
    /// strided 1x1 projection on the residual path.
    pub stride: usize,
    pub reduce: Conv2dParams,
    pub reduce_bn: BatchNormParams,
    /// 3x3 convs for subsets 2..=scale.
    pub subset_convs: Vec<Conv2dParams>,
    pub subset_bns: Vec<BatchNormParams>,
    pub expand: Conv2dParams,
    pub expand_bn: BatchNormParams,
    /// Present when stride != 1 or the channel count changes.
    pub projection: Option<(Conv2dParams, BatchNormParams)>,
}

fn conv_bn_relu(x: &TensorChw, conv: &Conv2dParams, bn: &BatchNormParams) -> Result<TensorChw> {
    let mut y = batch_norm(&conv2d(x, conv)?, bn)?;
    y.relu_inplace();
    Ok(y)
}

/// Forward pass of one block. Each conv is followed by batch norm; ReLU is
/// applied after every stage except the final 1x1, which is normalized,
/// summed with the residual, then rectified.
pub fn res2net_block_forward(x: &TensorChw, block: &BlockParams) -> Result<TensorChw> {
    let h = conv_bn_relu(x, &block.reduce, &block.reduce_bn)?;
    if h.channels() % block.scale != 0 {
        return Err(Error::Config(format!(
            "reduced channel count {} is not divisible by scale {}",
            h.channels(),
            block.scale
        )));
    }
    check_subset_convs(h.channels() / block.scale, block.scale, &block.subset_convs)?;

    let staged = if block.stride == 1 {
        cascade(&h, block.scale, |i, input| {
            conv_bn_relu(input, &block.subset_convs[i - 2], &block.subset_bns[i - 2])
        })?
    } else {
        // Downsampling stage: the cross-subset sums are dropped (operands
        // would differ in extent) and the pass-through subset is average
        // pooled to the strided shape.
        let chunk = h.channels() / block.scale;
        let mut outputs = vec![avg_pool2d(&h.slice_channels(0, chunk), 3, block.stride, 1)?];
        for i in 2..=block.scale {
            let subset = h.slice_channels((i - 1) * chunk, i * chunk);
            outputs.push(conv_bn_relu(
                &subset,
                &block.subset_convs[i - 2],
                &block.subset_bns[i - 2],
            )?);
        }
        TensorChw::concat_channels(&outputs)
    };

    let expanded = batch_norm(&conv2d(&staged, &block.expand)?, &block.expand_bn)?;
    let shortcut = match &block.projection {
        Some((conv, bn)) => batch_norm(&conv2d(x, conv)?, bn)?,
        None => x.clone(),
    };
    if expanded.shape() != shortcut.shape() {
        return Err(Error::Config(format!(
            "residual shape mismatch: main path {:?} vs shortcut {:?}",
            expanded.shape(),
            shortcut.shape()
        )));
    }
    let mut out = expanded.add(&shortcut);
    out.relu_inplace();
    Ok(out)
}
