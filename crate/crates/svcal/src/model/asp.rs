//! Attention-weighted statistics pooling over time.

use crate::error::{Error, Result};
use crate::tensor::TensorChw;

use super::ops::DenseParams;

/// Frame-attention network plus the variance floor.
///
/// The attention scores come from one hidden tanh layer and a scalar output
/// per frame; softmax over frames yields the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct AspParams {
    pub hidden: DenseParams,
    pub score: DenseParams,
    pub eps: f64,
}

impl AspParams {
    pub fn param_count(&self) -> usize {
        self.hidden.param_count() + self.score.param_count()
    }
}

/// Softmax attention weights for each frame of a (C, 1, T) tensor.
pub fn attention_weights(frames: &TensorChw, params: &AspParams) -> Result<Vec<f64>> {
    if frames.freq() != 1 {
        return Err(Error::Data(format!(
            "asp expects frequency-pooled input (freq=1), got freq={}",
            frames.freq()
        )));
    }
    let channels = frames.channels();
    let time = frames.time();
    if time == 0 {
        return Err(Error::Data("asp: no frames to pool".into()));
    }
    if params.hidden.in_dim != channels {
        return Err(Error::Data(format!(
            "asp attention expects {} channels, got {}",
            params.hidden.in_dim, channels
        )));
    }

    let mut scores = Vec::with_capacity(time);
    let mut frame = vec![0.0; channels];
    for t in 0..time {
        for c in 0..channels {
            frame[c] = frames.get(c, 0, t);
        }
        let mut hidden = params.hidden.apply(&frame)?;
        for h in &mut hidden {
            *h = h.tanh();
        }
        scores.push(params.score.apply(&hidden)?[0]);
    }

    let max = scores.iter().fold(f64::NEG_INFINITY, |m, &s| m.max(s));
    let mut weights: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= sum;
    }
    Ok(weights)
}

/// Attention-weighted mean and standard deviation, concatenated to a
/// 2C vector: `[mu_1..mu_C, sigma_1..sigma_C]`.
///
/// The variance is accumulated in centered form and floored at zero before
/// adding `eps`, so constant input yields exactly `sqrt(eps)`.
pub fn asp_pool(frames: &TensorChw, params: &AspParams) -> Result<Vec<f64>> {
    let weights = attention_weights(frames, params)?;
    let channels = frames.channels();
    let time = frames.time();

    let mut out = vec![0.0; 2 * channels];
    for c in 0..channels {
        let row = frames.row(c, 0);
        let mut mean = 0.0;
        for t in 0..time {
            mean += weights[t] * row[t];
        }
        let mut var = 0.0;
        for t in 0..time {
            let d = row[t] - mean;
            var += weights[t] * d * d;
        }
        out[c] = mean;
        out[channels + c] = (var.max(0.0) + params.eps).sqrt();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_params(channels: usize, hidden: usize, eps: f64) -> AspParams {
        AspParams {
            hidden: DenseParams::zeros(channels, hidden),
            score: DenseParams::zeros(hidden, 1),
            eps,
        }
    }

    fn frames_from(columns: &[&[f64]]) -> TensorChw {
        let channels = columns[0].len();
        let time = columns.len();
        let mut t = TensorChw::zeros(channels, 1, time);
        for (ti, col) in columns.iter().enumerate() {
            for (c, &v) in col.iter().enumerate() {
                t.set(c, 0, ti, v);
            }
        }
        t
    }

    #[test]
    fn identical_frames_floor_the_deviation() {
        let eps = 1e-5;
        let frames = frames_from(&[&[1.0, -2.0], &[1.0, -2.0], &[1.0, -2.0]]);
        let out = asp_pool(&frames, &toy_params(2, 4, eps)).unwrap();
        assert!((out[0] - 1.0).abs() < 1e-12);
        assert!((out[1] + 2.0).abs() < 1e-12);
        assert_eq!(out[2], eps.sqrt());
        assert_eq!(out[3], eps.sqrt());
    }

    #[test]
    fn single_frame_is_its_own_mean() {
        let eps = 1e-5;
        let frames = frames_from(&[&[0.7, 0.3]]);
        let weights = attention_weights(&frames, &toy_params(2, 4, eps)).unwrap();
        assert_eq!(weights, vec![1.0]);
        let out = asp_pool(&frames, &toy_params(2, 4, eps)).unwrap();
        assert_eq!(&out[..2], &[0.7, 0.3]);
        assert_eq!(out[2], eps.sqrt());
        assert_eq!(out[3], eps.sqrt());
    }

    #[test]
    fn two_frames_match_closed_form() {
        // One hidden unit wired to channel 0 makes the attention scores
        // hand-computable: e_t = tanh(h[0, t]).
        let eps = 1e-5;
        let mut params = toy_params(2, 1, eps);
        params.hidden.weight = vec![1.0, 0.0];
        params.score.weight = vec![1.0];
        let (h1, h2) = ([1.0, 0.5], [-1.0, 2.0]);
        let frames = frames_from(&[&h1, &h2]);

        let (e1, e2) = (1.0f64.tanh(), (-1.0f64).tanh());
        let max = e1.max(e2);
        let (w1, w2) = ((e1 - max).exp(), (e2 - max).exp());
        let (a1, a2) = (w1 / (w1 + w2), w2 / (w1 + w2));

        let out = asp_pool(&frames, &params).unwrap();
        for c in 0..2 {
            let mu = a1 * h1[c] + a2 * h2[c];
            let var = a1 * (h1[c] - mu).powi(2) + a2 * (h2[c] - mu).powi(2);
            assert!((out[c] - mu).abs() < 1e-12);
            assert!((out[2 + c] - (var + eps).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn weights_form_a_distribution() {
        let mut params = toy_params(3, 5, 1e-5);
        for (i, w) in params.hidden.weight.iter_mut().enumerate() {
            *w = ((i * 13 % 7) as f64 - 3.0) / 5.0;
        }
        for (i, w) in params.score.weight.iter_mut().enumerate() {
            *w = (i as f64 + 1.0) / 3.0;
        }
        let data: Vec<f64> = (0..3 * 9).map(|i| ((i * 29) % 13) as f64 - 6.0).collect();
        let frames = TensorChw::from_vec(3, 1, 9, data).unwrap();
        let weights = attention_weights(&frames, &params).unwrap();
        assert!(weights.iter().all(|&w| w >= 0.0));
        let total: f64 = weights.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn deviation_never_below_floor() {
        let eps = 1e-5;
        let data: Vec<f64> = (0..2 * 50).map(|i| ((i * 7) % 23) as f64 / 23.0).collect();
        let frames = TensorChw::from_vec(2, 1, 50, data).unwrap();
        let out = asp_pool(&frames, &toy_params(2, 4, eps)).unwrap();
        for &sigma in &out[2..] {
            assert!(sigma >= eps.sqrt());
        }
    }
}
