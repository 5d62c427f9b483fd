//! Additive-margin softmax loss with analytic gradients.

use crate::error::{Error, Result};

/// Loss value plus gradients with respect to the raw (unnormalized)
/// embeddings and the class-weight matrix.
#[derive(Debug, Clone)]
pub struct AmSoftmaxOutput {
    pub loss: f64,
    /// One gradient row per input embedding.
    pub grad_embeddings: Vec<Vec<f64>>,
    /// Gradient for the flat `[n_classes][dim]` weight matrix.
    pub grad_class_weights: Vec<f64>,
}

/// Mean additive-margin softmax loss over a batch.
///
/// Embeddings are length-normalized internally; `class_weights` rows are
/// used as given (callers keep them unit-normalized). The margin is
/// subtracted from the true-class cosine before scaling, and the softmax is
/// stabilized by max subtraction.
pub fn am_softmax_loss(
    embeddings: &[Vec<f64>],
    labels: &[usize],
    class_weights: &[f64],
    n_classes: usize,
    dim: usize,
    margin: f64,
    scale: f64,
) -> Result<AmSoftmaxOutput> {
    if embeddings.is_empty() {
        return Err(Error::Data("am-softmax: empty batch".into()));
    }
    if embeddings.len() != labels.len() {
        return Err(Error::Data(format!(
            "am-softmax: {} embeddings but {} labels",
            embeddings.len(),
            labels.len()
        )));
    }
    if class_weights.len() != n_classes * dim {
        return Err(Error::Data(format!(
            "am-softmax: weight matrix has {} entries, expected {}x{}",
            class_weights.len(),
            n_classes,
            dim
        )));
    }
    for (i, label) in labels.iter().enumerate() {
        if *label >= n_classes {
            return Err(Error::Data(format!(
                "am-softmax: label {label} out of range for {n_classes} classes (sample {i})"
            )));
        }
    }

    let batch = embeddings.len() as f64;
    let mut total_loss = 0.0;
    let mut grad_embeddings = Vec::with_capacity(embeddings.len());
    let mut grad_class_weights = vec![0.0; class_weights.len()];

    for (emb, &label) in embeddings.iter().zip(labels) {
        if emb.len() != dim {
            return Err(Error::Data(format!(
                "am-softmax: embedding dim {} does not match {}",
                emb.len(),
                dim
            )));
        }
        let norm = emb.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Data("am-softmax: zero-norm embedding".into()));
        }
        let unit: Vec<f64> = emb.iter().map(|v| v / norm).collect();

        // Scaled margin logits.
        let mut logits: Vec<f64> = (0..n_classes)
            .map(|j| {
                let row = &class_weights[j * dim..(j + 1) * dim];
                scale * row.iter().zip(&unit).map(|(w, e)| w * e).sum::<f64>()
            })
            .collect();
        logits[label] -= scale * margin;

        let max = logits.iter().fold(f64::NEG_INFINITY, |m, &z| m.max(z));
        let sum_exp: f64 = logits.iter().map(|z| (z - max).exp()).sum();
        total_loss += max + sum_exp.ln() - logits[label];

        // dL/dz = softmax(z) - onehot(label), then back through the cosine.
        let mut grad_unit = vec![0.0; dim];
        for j in 0..n_classes {
            let p = (logits[j] - max).exp() / sum_exp;
            let coeff = scale * (p - if j == label { 1.0 } else { 0.0 }) / batch;
            let row = &class_weights[j * dim..(j + 1) * dim];
            for d in 0..dim {
                grad_class_weights[j * dim + d] += coeff * unit[d];
                grad_unit[d] += coeff * row[d];
            }
        }
        // Through the normalization: (I - u u^T)/||e|| applied to grad_unit.
        let dot: f64 = grad_unit.iter().zip(&unit).map(|(g, u)| g * u).sum();
        grad_embeddings.push(
            (0..dim)
                .map(|d| (grad_unit[d] - dot * unit[d]) / norm)
                .collect(),
        );
    }

    Ok(AmSoftmaxOutput {
        loss: total_loss / batch,
        grad_embeddings,
        grad_class_weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_rows(n_classes: usize, dim: usize, seed: u64) -> Vec<f64> {
        let mut state = seed;
        let mut rows = vec![0.0; n_classes * dim];
        for row in rows.chunks_mut(dim) {
            for v in row.iter_mut() {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                *v = ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5;
            }
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            for v in row.iter_mut() {
                *v /= norm;
            }
        }
        rows
    }

    #[test]
    fn single_class_zero_margin_is_zero_loss() {
        let out = am_softmax_loss(&[vec![0.3, 0.4]], &[0], &[0.6, 0.8], 1, 2, 0.0, 30.0).unwrap();
        assert_eq!(out.loss, 0.0);
    }

    #[test]
    fn aligned_two_class_loss_is_softplus_of_margin_gap() {
        // Embedding on its class axis, orthogonal to the other: the loss
        // collapses to softplus(-scale * (1 - margin)).
        let weights = vec![1.0, 0.0, 0.0, 1.0];
        let out = am_softmax_loss(&[vec![2.0, 0.0]], &[0], &weights, 2, 2, 0.2, 30.0).unwrap();
        let want = (-24.0f64).exp().ln_1p();
        assert!((out.loss - want).abs() < 1e-15 * want.max(1.0), "{} vs {want}", out.loss);
        assert!((out.loss - 3.78e-11).abs() < 1e-12);
    }

    #[test]
    fn rejects_out_of_range_label() {
        let weights = unit_rows(2, 3, 5);
        let err = am_softmax_loss(&[vec![1.0, 0.0, 0.0]], &[2], &weights, 2, 3, 0.2, 30.0);
        assert!(err.unwrap_err().to_string().contains("out of range"));
    }

    #[test]
    fn loss_decreases_as_alignment_improves() {
        let weights = vec![1.0, 0.0, 0.0, 1.0];
        let mut last = f64::INFINITY;
        for cos in [-0.5, 0.0, 0.4, 0.8, 0.99] {
            let angle = (cos as f64).acos();
            let emb = vec![angle.cos(), angle.sin()];
            let out = am_softmax_loss(&[emb], &[0], &weights, 2, 2, 0.2, 30.0).unwrap();
            assert!(out.loss < last, "loss should fall as cos rises");
            last = out.loss;
        }
    }

    #[test]
    fn larger_margin_never_lowers_loss() {
        let weights = unit_rows(4, 6, 11);
        let emb = vec![vec![0.3, -0.2, 0.5, 0.1, -0.4, 0.2]];
        let mut last = -1.0;
        for m in [0.0, 0.1, 0.2, 0.35, 0.5] {
            let out = am_softmax_loss(&emb, &[1], &weights, 4, 6, m, 30.0).unwrap();
            assert!(out.loss >= last);
            last = out.loss;
        }
    }

    /// Central finite differences against the analytic gradients.
    #[test]
    fn gradients_match_finite_differences() {
        let (n_classes, dim, h) = (5, 8, 1e-5);
        let weights = unit_rows(n_classes, dim, 17);
        let mut embeddings = Vec::new();
        let mut state = 99u64;
        for _ in 0..4 {
            let mut e = vec![0.0; dim];
            for v in &mut e {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                *v = ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5;
            }
            embeddings.push(e);
        }
        let labels = vec![0, 2, 4, 1];
        let loss_at = |emb: &[Vec<f64>], w: &[f64]| {
            am_softmax_loss(emb, &labels, w, n_classes, dim, 0.2, 30.0)
                .unwrap()
                .loss
        };
        let out = am_softmax_loss(&embeddings, &labels, &weights, n_classes, dim, 0.2, 30.0).unwrap();

        for i in 0..embeddings.len() {
            for d in 0..dim {
                let mut plus = embeddings.clone();
                plus[i][d] += h;
                let mut minus = embeddings.clone();
                minus[i][d] -= h;
                let fd = (loss_at(&plus, &weights) - loss_at(&minus, &weights)) / (2.0 * h);
                let a = out.grad_embeddings[i][d];
                let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-8);
                assert!(rel < 1e-4, "embedding grad [{i}][{d}]: analytic {a}, fd {fd}");
            }
        }
        for j in 0..n_classes * dim {
            let mut plus = weights.clone();
            plus[j] += h;
            let mut minus = weights.clone();
            minus[j] -= h;
            let fd = (loss_at(&embeddings, &plus) - loss_at(&embeddings, &minus)) / (2.0 * h);
            let a = out.grad_class_weights[j];
            let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-8);
            assert!(rel < 1e-4, "weight grad [{j}]: analytic {a}, fd {fd}");
        }
    }
}
