//! The speaker embedding network: multi-scale residual backbone over
//! (freq, time) feature maps, frequency pooling, attentive statistics
//! pooling, and a dense projection to the embedding space.

pub mod amsoftmax;
pub mod asp;
pub mod count;
pub mod init;
pub mod ops;
pub mod res2net;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::tensor::TensorChw;

pub use amsoftmax::{am_softmax_loss, AmSoftmaxOutput};
pub use asp::{asp_pool, attention_weights, AspParams};
pub use count::{class_head_params, count_macs, count_params};
pub use init::init_params;
pub use ops::{BatchNormParams, Conv2dParams, DenseParams};
pub use res2net::{res2net_block_forward, res2net_module_forward, BlockParams};

/// Channel notation base: a stage printed with bottleneck 64 runs subsets of
/// `basewidth` channels, and wider stages scale proportionally.
const NOTATION_BASE: usize = 64;

/// One residual stack: bottleneck/output channels in table notation, the
/// number of repeated blocks, and the stack stride (applied in block 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub bottleneck: usize,
    pub out_channels: usize,
    pub repeats: usize,
    pub stride: usize,
}

/// All architecture hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Channels per 3x3 subset at a bottleneck-64 stage.
    pub basewidth: usize,
    /// Number of channel subsets in the multi-scale stage.
    pub scale: usize,
    pub stem_channels: usize,
    pub block_specs: Vec<BlockSpec>,
    pub embedding_dim: usize,
    /// Training-speaker count for the classification head.
    pub n_classes: usize,
    pub margin: f64,
    pub loss_scale: f64,
    pub asp_eps: f64,
    pub asp_hidden: usize,
    /// Frequency bins the front end produces.
    pub input_mels: usize,
}

impl ModelConfig {
    /// Reference configuration: basewidth 26, scale 8, stacks repeated
    /// 3/4/6/3, embedding size 256, margin 0.2, scale 30.
    pub fn paper() -> Self {
        Self {
            basewidth: 26,
            scale: 8,
            stem_channels: 64,
            block_specs: vec![
                BlockSpec { bottleneck: 64, out_channels: 256, repeats: 3, stride: 1 },
                BlockSpec { bottleneck: 64, out_channels: 256, repeats: 4, stride: 2 },
                BlockSpec { bottleneck: 128, out_channels: 512, repeats: 6, stride: 2 },
                BlockSpec { bottleneck: 128, out_channels: 512, repeats: 3, stride: 1 },
            ],
            embedding_dim: 256,
            n_classes: 7315,
            margin: 0.2,
            loss_scale: 30.0,
            asp_eps: 1e-5,
            asp_hidden: 128,
            input_mels: 80,
        }
    }

    /// Small configuration for tests and demos: basewidth 8, scale 2, one
    /// block per stack, 16-dimensional embeddings.
    pub fn reduced() -> Self {
        Self {
            basewidth: 8,
            scale: 2,
            stem_channels: 16,
            block_specs: vec![
                BlockSpec { bottleneck: 64, out_channels: 256, repeats: 1, stride: 1 },
                BlockSpec { bottleneck: 64, out_channels: 256, repeats: 1, stride: 2 },
                BlockSpec { bottleneck: 128, out_channels: 512, repeats: 1, stride: 2 },
                BlockSpec { bottleneck: 128, out_channels: 512, repeats: 1, stride: 1 },
            ],
            embedding_dim: 16,
            n_classes: 4,
            margin: 0.2,
            loss_scale: 30.0,
            asp_eps: 1e-5,
            asp_hidden: 128,
            input_mels: 80,
        }
    }

    /// Channels per subset for one stack.
    pub fn subset_width(&self, spec: &BlockSpec) -> usize {
        self.basewidth * spec.bottleneck / NOTATION_BASE
    }

    /// Width of the multi-scale stage for one stack.
    pub fn mid_channels(&self, spec: &BlockSpec) -> usize {
        self.subset_width(spec) * self.scale
    }

    /// Channel count entering the pooling layers.
    pub fn backbone_out_channels(&self) -> usize {
        self.block_specs
            .last()
            .map(|s| s.out_channels)
            .unwrap_or(self.stem_channels)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scale < 2 {
            return Err(Error::Config("scale must be at least 2".into()));
        }
        if self.basewidth == 0 || self.stem_channels == 0 {
            return Err(Error::Config("basewidth and stem_channels must be positive".into()));
        }
        if self.embedding_dim == 0 || self.n_classes == 0 {
            return Err(Error::Config("embedding_dim and n_classes must be positive".into()));
        }
        if self.block_specs.is_empty() {
            return Err(Error::Config("at least one block spec is required".into()));
        }
        for spec in &self.block_specs {
            if spec.bottleneck % self.scale != 0 {
                return Err(Error::Config(format!(
                    "bottleneck {} not divisible by scale {}",
                    spec.bottleneck, self.scale
                )));
            }
            if (self.basewidth * spec.bottleneck) % NOTATION_BASE != 0 {
                return Err(Error::Config(format!(
                    "basewidth {} at bottleneck {} leaves a fractional subset width",
                    self.basewidth, spec.bottleneck
                )));
            }
            if spec.repeats == 0 || spec.out_channels == 0 {
                return Err(Error::Config("repeats and out_channels must be positive".into()));
            }
            if !(spec.stride == 1 || spec.stride == 2) {
                return Err(Error::Config(format!("unsupported stack stride {}", spec.stride)));
            }
        }
        if self.margin < 0.0 || self.loss_scale <= 0.0 {
            return Err(Error::Config("need margin >= 0 and loss_scale > 0".into()));
        }
        if self.asp_eps <= 0.0 || self.asp_hidden == 0 {
            return Err(Error::Config("need asp_eps > 0 and asp_hidden >= 1".into()));
        }
        if self.input_mels == 0 {
            return Err(Error::Config("input_mels must be positive".into()));
        }
        Ok(())
    }
}

/// Fixed-length speaker embedding tagged with its utterance id.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub utterance_id: String,
    pub values: Vec<f64>,
}

impl Embedding {
    pub fn new(utterance_id: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Data("embedding must be non-empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("embedding contains non-finite values".into()));
        }
        Ok(Self {
            utterance_id: utterance_id.into(),
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Every weight array of the network, immutable during inference.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    pub stem: Conv2dParams,
    pub stem_bn: BatchNormParams,
    pub stacks: Vec<Vec<BlockParams>>,
    pub asp: AspParams,
    pub embedding: DenseParams,
    /// Flat `[n_classes][embedding_dim]` matrix with unit-normalized rows.
    pub class_weights: Vec<f64>,
    pub n_classes: usize,
    pub embedding_dim: usize,
}

impl ParameterSet {
    /// Trainable scalars in the embedding network (batch-norm running
    /// statistics and the classification head are not counted).
    pub fn trainable_scalars(&self) -> u64 {
        let mut total = self.stem.weight_count() + self.stem_bn.param_count();
        for stack in &self.stacks {
            for block in stack {
                total += block.reduce.weight_count() + block.reduce_bn.param_count();
                for conv in &block.subset_convs {
                    total += conv.weight_count();
                }
                for bn in &block.subset_bns {
                    total += bn.param_count();
                }
                total += block.expand.weight_count() + block.expand_bn.param_count();
                if let Some((conv, bn)) = &block.projection {
                    total += conv.weight_count() + bn.param_count();
                }
            }
        }
        total += self.asp.param_count();
        total += self.embedding.param_count();
        total as u64
    }

    /// Scalars in the classification head.
    pub fn class_weight_scalars(&self) -> u64 {
        self.class_weights.len() as u64
    }

    /// Named weight arrays for the binary container, in a stable order.
    pub fn to_named_arrays(&self) -> Vec<(String, Vec<usize>, Vec<f64>)> {
        let mut out = Vec::new();
        let conv = |name: &str, c: &Conv2dParams, out_vec: &mut Vec<(String, Vec<usize>, Vec<f64>)>| {
            out_vec.push((
                name.to_string(),
                vec![c.out_channels, c.in_channels, c.kernel_f, c.kernel_t],
                c.weight.clone(),
            ));
        };
        let bn = |name: &str, b: &BatchNormParams, out_vec: &mut Vec<(String, Vec<usize>, Vec<f64>)>| {
            let n = b.channels();
            out_vec.push((format!("{name}.gamma"), vec![n], b.gamma.clone()));
            out_vec.push((format!("{name}.beta"), vec![n], b.beta.clone()));
            out_vec.push((format!("{name}.mean"), vec![n], b.mean.clone()));
            out_vec.push((format!("{name}.var"), vec![n], b.var.clone()));
        };
        let dense = |name: &str, d: &DenseParams, out_vec: &mut Vec<(String, Vec<usize>, Vec<f64>)>| {
            out_vec.push((format!("{name}.weight"), vec![d.out_dim, d.in_dim], d.weight.clone()));
            out_vec.push((format!("{name}.bias"), vec![d.out_dim], d.bias.clone()));
        };

        conv("stem.weight", &self.stem, &mut out);
        bn("stem.bn", &self.stem_bn, &mut out);
        for (i, stack) in self.stacks.iter().enumerate() {
            for (j, block) in stack.iter().enumerate() {
                let p = format!("stack{i}.block{j}");
                conv(&format!("{p}.reduce.weight"), &block.reduce, &mut out);
                bn(&format!("{p}.reduce.bn"), &block.reduce_bn, &mut out);
                for (k, c) in block.subset_convs.iter().enumerate() {
                    conv(&format!("{p}.subset{k}.weight"), c, &mut out);
                }
                for (k, b) in block.subset_bns.iter().enumerate() {
                    bn(&format!("{p}.subset{k}.bn"), b, &mut out);
                }
                conv(&format!("{p}.expand.weight"), &block.expand, &mut out);
                bn(&format!("{p}.expand.bn"), &block.expand_bn, &mut out);
                if let Some((c, b)) = &block.projection {
                    conv(&format!("{p}.proj.weight"), c, &mut out);
                    bn(&format!("{p}.proj.bn"), b, &mut out);
                }
            }
        }
        dense("asp.hidden", &self.asp.hidden, &mut out);
        dense("asp.score", &self.asp.score, &mut out);
        dense("embedding", &self.embedding, &mut out);
        out.push((
            "class_weights".to_string(),
            vec![self.n_classes, self.embedding_dim],
            self.class_weights.clone(),
        ));
        out
    }

    /// Rebuilds a parameter set from named arrays, using `config` for the
    /// geometry. Every array must be present with a matching shape.
    pub fn from_named_arrays(
        config: &ModelConfig,
        arrays: &[(String, Vec<usize>, Vec<f64>)],
    ) -> Result<Self> {
        let mut skeleton = init::init_params(config, 0)?;
        let lookup: std::collections::HashMap<&str, (&Vec<usize>, &Vec<f64>)> = arrays
            .iter()
            .map(|(name, shape, data)| (name.as_str(), (shape, data)))
            .collect();
        let expected = skeleton.to_named_arrays();
        if lookup.len() != expected.len() {
            return Err(Error::Parse(format!(
                "parameter container holds {} arrays, expected {}",
                lookup.len(),
                expected.len()
            )));
        }

        let mut values: Vec<(String, Vec<f64>)> = Vec::with_capacity(expected.len());
        for (name, shape, _) in &expected {
            let (got_shape, data) = lookup.get(name.as_str()).ok_or_else(|| {
                Error::Parse(format!("parameter container is missing array '{name}'"))
            })?;
            if *got_shape != shape {
                return Err(Error::Parse(format!(
                    "array '{name}' has shape {got_shape:?}, expected {shape:?}"
                )));
            }
            values.push((name.clone(), (*data).clone()));
        }

        // Write the payloads back in the canonical order.
        let mut iter = values.into_iter();
        let mut next = || iter.next().expect("array list length checked above").1;
        skeleton.stem.weight = next();
        skeleton.stem_bn.gamma = next();
        skeleton.stem_bn.beta = next();
        skeleton.stem_bn.mean = next();
        skeleton.stem_bn.var = next();
        for stack in &mut skeleton.stacks {
            for block in stack.iter_mut() {
                block.reduce.weight = next();
                block.reduce_bn.gamma = next();
                block.reduce_bn.beta = next();
                block.reduce_bn.mean = next();
                block.reduce_bn.var = next();
                for conv in &mut block.subset_convs {
                    conv.weight = next();
                }
                for bn in &mut block.subset_bns {
                    bn.gamma = next();
                    bn.beta = next();
                    bn.mean = next();
                    bn.var = next();
                }
                block.expand.weight = next();
                block.expand_bn.gamma = next();
                block.expand_bn.beta = next();
                block.expand_bn.mean = next();
                block.expand_bn.var = next();
                if let Some((conv, bn)) = &mut block.projection {
                    conv.weight = next();
                    bn.gamma = next();
                    bn.beta = next();
                    bn.mean = next();
                    bn.var = next();
                }
            }
        }
        skeleton.asp.hidden.weight = next();
        skeleton.asp.hidden.bias = next();
        skeleton.asp.score.weight = next();
        skeleton.asp.score.bias = next();
        skeleton.embedding.weight = next();
        skeleton.embedding.bias = next();
        skeleton.class_weights = next();
        Ok(skeleton)
    }
}

/// Runs the full forward pass from features to a fixed-length embedding.
pub fn embed(features: &FeatureMatrix, params: &ParameterSet, config: &ModelConfig) -> Result<Embedding> {
    if features.n_frames() == 0 {
        return Err(Error::Data("utterance too short for model: no feature frames".into()));
    }
    if features.n_mels() != config.input_mels {
        return Err(Error::Config(format!(
            "features have {} mel bins but the model expects {}",
            features.n_mels(),
            config.input_mels
        )));
    }
    let time = features.n_frames();
    let freq = features.n_mels();
    let mut x = TensorChw::zeros(1, freq, time);
    for t in 0..time {
        let frame = features.frame(t);
        for (f, &v) in frame.iter().enumerate() {
            x.set(0, f, t, v);
        }
    }

    let mut h = ops::batch_norm(&ops::conv2d(&x, &params.stem)?, &params.stem_bn)?;
    h.relu_inplace();
    for stack in &params.stacks {
        for block in stack {
            h = res2net_block_forward(&h, block)?;
        }
    }
    let pooled = ops::mean_over_freq(&h);
    let stats = asp_pool(&pooled, &params.asp)?;
    let values = params.embedding.apply(&stats)?;
    Embedding::new(features.utterance_id(), values)
}
