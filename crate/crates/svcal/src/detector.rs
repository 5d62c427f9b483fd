//! Group-context detector: a small fully connected classifier trained on
//! speaker embeddings to infer gender (or any group label), with mini-batch
//! SGD training and precision-recall evaluation.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calibration::GroupKey;
use crate::error::{Error, Result};
use crate::model::ops::DenseParams;
use crate::model::Embedding;

/// Hidden-layer nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply(&self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }
}

/// Detector architecture and training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub n_classes: usize,
    pub activation: Activation,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Weight classes by inverse frequency in the loss.
    pub balance_classes: bool,
    /// Group dimension the detector predicts, e.g. "gender".
    pub dimension: String,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            input_dim: 256,
            hidden: vec![128, 256],
            n_classes: 2,
            activation: Activation::Relu,
            learning_rate: 0.05,
            batch_size: 32,
            epochs: 20,
            seed: 0,
            balance_classes: false,
            dimension: "gender".into(),
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.n_classes < 2 {
            return Err(Error::Config("need input_dim >= 1 and n_classes >= 2".into()));
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::Config("hidden widths must be positive".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("batch_size and epochs must be positive".into()));
        }
        if self.dimension.is_empty() {
            return Err(Error::Config("dimension must be nonempty".into()));
        }
        Ok(())
    }

    /// Layer widths from input to logits.
    fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim];
        dims.extend(&self.hidden);
        dims.push(self.n_classes);
        dims
    }
}

/// Trained detector weights plus the label names the classes map to.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorParams {
    pub layers: Vec<DenseParams>,
    pub activation: Activation,
    pub dimension: String,
    /// Class index -> tag, in the (sorted) order derived from training data.
    pub class_tags: Vec<String>,
}

impl DetectorParams {
    pub fn input_dim(&self) -> usize {
        self.layers.first().map(|l| l.in_dim).unwrap_or(0)
    }

    pub fn n_classes(&self) -> usize {
        self.layers.last().map(|l| l.out_dim).unwrap_or(0)
    }

    pub fn param_count(&self) -> u64 {
        self.layers.iter().map(|l| l.param_count() as u64).sum()
    }
}

/// Embeddings with group labels and a split tag.
#[derive(Debug, Clone)]
pub struct LabeledEmbeddingSet {
    embeddings: Vec<Embedding>,
    labels: Vec<String>,
    pub split: String,
}

impl LabeledEmbeddingSet {
    pub fn new(embeddings: Vec<Embedding>, labels: Vec<String>, split: impl Into<String>) -> Result<Self> {
        if embeddings.len() != labels.len() {
            return Err(Error::Data(format!(
                "{} embeddings but {} labels",
                embeddings.len(),
                labels.len()
            )));
        }
        if let Some(first) = embeddings.first() {
            let dim = first.dim();
            if embeddings.iter().any(|e| e.dim() != dim) {
                return Err(Error::Data("labeled set has mixed embedding dimensions".into()));
            }
        }
        Ok(Self {
            embeddings,
            labels,
            split: split.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.embeddings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.embeddings.is_empty()
    }

    pub fn embeddings(&self) -> &[Embedding] {
        &self.embeddings
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Distinct labels, sorted; the class-index order used in training.
    pub fn distinct_labels(&self) -> Vec<String> {
        let mut tags: Vec<String> = self.labels.clone();
        tags.sort();
        tags.dedup();
        tags
    }
}

/// Class probabilities for one embedding.
pub fn detector_forward(embedding: &Embedding, params: &DetectorParams) -> Result<Vec<f64>> {
    if embedding.dim() != params.input_dim() {
        return Err(Error::Data(format!(
            "embedding dim {} does not match detector input {}",
            embedding.dim(),
            params.input_dim()
        )));
    }
    let (_, probs) = forward_full(&embedding.values, params)?;
    Ok(probs)
}

/// Forward pass keeping pre-activations for backprop. Returns the layer
/// inputs (activations) and the softmax output.
fn forward_full(input: &[f64], params: &DetectorParams) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let mut activations: Vec<Vec<f64>> = vec![input.to_vec()];
    for (li, layer) in params.layers.iter().enumerate() {
        let mut z = layer.apply(activations.last().unwrap())?;
        if li + 1 < params.layers.len() {
            for v in &mut z {
                *v = params.activation.apply(*v);
            }
        }
        activations.push(z);
    }
    let logits = activations.last().unwrap();
    let max = logits.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let mut probs: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= sum;
    }
    Ok((activations, probs))
}

/// Per-layer weight and bias gradients.
#[derive(Debug, Clone)]
pub struct DetectorGrads {
    pub layers: Vec<DenseParams>,
}

/// Mean weighted cross-entropy and its gradients on one batch.
///
/// `class_weights` scales each sample's loss by its class weight,
/// normalized by the batch's total weight (all ones when `None`).
pub fn detector_loss_and_grads(
    params: &DetectorParams,
    inputs: &[&[f64]],
    labels: &[usize],
    class_weights: Option<&[f64]>,
) -> Result<(f64, DetectorGrads)> {
    if inputs.is_empty() || inputs.len() != labels.len() {
        return Err(Error::Data("loss needs a nonempty batch with matching labels".into()));
    }
    let n_classes = params.n_classes();
    let mut grads: Vec<DenseParams> = params
        .layers
        .iter()
        .map(|l| DenseParams::zeros(l.in_dim, l.out_dim))
        .collect();

    let weight_of = |label: usize| class_weights.map_or(1.0, |w| w[label]);
    let total_weight: f64 = labels.iter().map(|&y| weight_of(y)).sum();

    let mut total_loss = 0.0;
    for (&input, &label) in inputs.iter().zip(labels) {
        if label >= n_classes {
            return Err(Error::Data(format!(
                "label {label} out of range for {n_classes} classes"
            )));
        }
        let (activations, probs) = forward_full(input, params)?;
        let w = weight_of(label) / total_weight;
        total_loss += -w * probs[label].max(f64::MIN_POSITIVE).ln();

        // delta at the logits: softmax - onehot, scaled by the sample weight.
        let mut delta: Vec<f64> = probs
            .iter()
            .enumerate()
            .map(|(j, p)| w * (p - if j == label { 1.0 } else { 0.0 }))
            .collect();

        for li in (0..params.layers.len()).rev() {
            let layer = &params.layers[li];
            let a_in = &activations[li];
            let grad = &mut grads[li];
            for o in 0..layer.out_dim {
                grad.bias[o] += delta[o];
                let row = &mut grad.weight[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (g, &a) in row.iter_mut().zip(a_in) {
                    *g += delta[o] * a;
                }
            }
            if li == 0 {
                break;
            }
            // Propagate through the previous activation. activations[li]
            // holds act(z), so relu' can be read off its sign; tanh' from
            // the activation value directly.
            let mut prev = vec![0.0; layer.in_dim];
            for o in 0..layer.out_dim {
                let row = &layer.weight[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (p, &wv) in prev.iter_mut().zip(row) {
                    *p += delta[o] * wv;
                }
            }
            for (p, &a) in prev.iter_mut().zip(&activations[li]) {
                let d = match params.activation {
                    Activation::Relu => {
                        if a > 0.0 {
                            1.0
                        } else {
                            0.0
                        }
                    }
                    Activation::Tanh => 1.0 - a * a,
                };
                *p *= d;
            }
            delta = prev;
        }
    }
    Ok((total_loss, DetectorGrads { layers: grads }))
}

fn he_uniform_layer(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> DenseParams {
    let mut layer = DenseParams::zeros(in_dim, out_dim);
    let bound = (6.0 / in_dim as f64).sqrt();
    for w in &mut layer.weight {
        *w = rng.gen_range(-bound..bound);
    }
    layer
}

/// Trains the detector with mini-batch SGD and returns the parameters plus
/// the epoch-mean loss history.
pub fn train_detector(
    data: &LabeledEmbeddingSet,
    config: &DetectorConfig,
) -> Result<(DetectorParams, Vec<f64>)> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    let tags = data.distinct_labels();
    if tags.len() < 2 {
        return Err(Error::Data("training set contains a single class".into()));
    }
    if tags.len() != config.n_classes {
        return Err(Error::Data(format!(
            "training set has {} classes but the config expects {}",
            tags.len(),
            config.n_classes
        )));
    }
    if data.embeddings()[0].dim() != config.input_dim {
        return Err(Error::Data(format!(
            "training embeddings have dim {}, config expects {}",
            data.embeddings()[0].dim(),
            config.input_dim
        )));
    }

    let class_index = |label: &str| tags.iter().position(|t| t == label).unwrap();
    let labels: Vec<usize> = data.labels().iter().map(|l| class_index(l)).collect();

    let class_weights: Option<Vec<f64>> = if config.balance_classes {
        let mut counts = vec![0usize; config.n_classes];
        for &y in &labels {
            counts[y] += 1;
        }
        let n = labels.len() as f64;
        Some(
            counts
                .iter()
                .map(|&c| n / (config.n_classes as f64 * c as f64))
                .collect(),
        )
    } else {
        None
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let dims = config.layer_dims();
    let layers = dims
        .windows(2)
        .map(|w| he_uniform_layer(w[0], w[1], &mut rng))
        .collect();
    let mut params = DetectorParams {
        layers,
        activation: config.activation,
        dimension: config.dimension.clone(),
        class_tags: tags,
    };

    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let inputs: Vec<&[f64]> = chunk
                .iter()
                .map(|&i| data.embeddings()[i].values.as_slice())
                .collect();
            let batch_labels: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let (loss, grads) = detector_loss_and_grads(
                &params,
                &inputs,
                &batch_labels,
                class_weights.as_deref(),
            )?;
            epoch_loss += loss * chunk.len() as f64;
            for (layer, grad) in params.layers.iter_mut().zip(&grads.layers) {
                for (w, g) in layer.weight.iter_mut().zip(&grad.weight) {
                    *w -= config.learning_rate * g;
                }
                for (b, g) in layer.bias.iter_mut().zip(&grad.bias) {
                    *b -= config.learning_rate * g;
                }
            }
        }
        history.push(epoch_loss / data.len() as f64);
    }
    Ok((params, history))
}

/// One precision-recall operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrPoint {
    pub precision: f64,
    pub recall: f64,
    pub threshold: f64,
}

/// Precision and recall at every distinct probability threshold, ascending
/// by threshold (predict positive iff probability >= threshold).
///
/// The sweep stops once full recall is reached: thresholds below that point
/// only add false positives at the same recall.
pub fn precision_recall_curve(probabilities: &[f64], labels: &[bool]) -> Result<Vec<PrPoint>> {
    if probabilities.is_empty() || probabilities.len() != labels.len() {
        return Err(Error::Data("precision-recall needs matching nonempty inputs".into()));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::Data("precision-recall needs both classes present".into()));
    }

    let mut pairs: Vec<(f64, bool)> = probabilities.iter().copied().zip(labels.iter().copied()).collect();
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());

    // Walk thresholds from the highest probability down, accumulating
    // predicted positives; emit one point per distinct threshold.
    let mut points = Vec::new();
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < pairs.len() && tp < positives {
        let threshold = pairs[i].0;
        while i < pairs.len() && pairs[i].0 == threshold {
            if pairs[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(PrPoint {
            precision: tp as f64 / (tp + fp) as f64,
            recall: tp as f64 / positives as f64,
            threshold,
        });
    }
    points.reverse();
    Ok(points)
}

/// Maps the argmax class to its group tag (ties resolve to the lowest
/// class index).
pub fn detect(embedding: &Embedding, params: &DetectorParams) -> Result<GroupKey> {
    let probs = detector_forward(embedding, params)?;
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    GroupKey::new(&params.dimension, &params.class_tags[best])
}
