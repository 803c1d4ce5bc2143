//! Cosine classifier logits and the angular-margin (CosFace-style) loss.
//!
//! The classifier has no bias: every logit is the cosine between the feature
//! and a weight row. The margin is subtracted from the target cosine only, and
//! all logits are multiplied by the scale before the softmax.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{cosine_similarity, norm, softmax, ZERO_NORM};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossConfig {
    pub scale: f64,
    pub margin: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            scale: 30.0,
            margin: 0.4,
        }
    }
}

impl LossConfig {
    /// Plain cosine cross-entropy: unit scale, no margin.
    pub fn cross_entropy() -> Self {
        Self {
            scale: 1.0,
            margin: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0) || !self.scale.is_finite() {
            return Err(Error::InvalidLossConfig(format!(
                "scale must be positive, got {}",
                self.scale
            )));
        }
        if !(0.0..1.0).contains(&self.margin) {
            return Err(Error::InvalidLossConfig(format!(
                "margin must lie in [0, 1), got {}",
                self.margin
            )));
        }
        Ok(())
    }
}

/// Per-class cosines between one feature and every classifier row.
#[derive(Debug, Clone, PartialEq)]
pub struct CosineLogits(pub Vec<f64>);

impl CosineLogits {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

pub fn cosine_logits(f: &[f64], weights: &[Vec<f64>]) -> Result<CosineLogits> {
    weights
        .iter()
        .map(|w| cosine_similarity(f, w))
        .collect::<Result<Vec<_>>>()
        .map(CosineLogits)
}

fn check_target(logits: &CosineLogits, target: usize) -> Result<()> {
    if target >= logits.len() {
        return Err(Error::BadTarget {
            target,
            classes: logits.len(),
        });
    }
    Ok(())
}

/// `-log softmax(z)[target]` arranged so that small losses keep full relative
/// precision: when the target dominates, this is `ln1p(sum e^(z_i - z_t))`.
fn neg_log_softmax_at(z: &[f64], target: usize) -> f64 {
    let zt = z[target];
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if zt >= max {
        let rest: f64 = z
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != target)
            .map(|(_, v)| (v - zt).exp())
            .sum();
        rest.ln_1p()
    } else {
        let sum: f64 = z.iter().map(|v| (v - max).exp()).sum();
        (max - zt) + sum.ln()
    }
}

fn margin_logits(logits: &CosineLogits, target: usize, cfg: &LossConfig) -> Vec<f64> {
    logits
        .0
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            if i == target {
                cfg.scale * (c - cfg.margin)
            } else {
                cfg.scale * c
            }
        })
        .collect()
}

/// Softmax cross-entropy directly on the cosines.
pub fn ce_cosine_loss(logits: &CosineLogits, target: usize) -> Result<f64> {
    check_target(logits, target)?;
    Ok(neg_log_softmax_at(&logits.0, target))
}

pub fn angular_penalty_loss(logits: &CosineLogits, target: usize, cfg: &LossConfig) -> Result<f64> {
    check_target(logits, target)?;
    cfg.validate()?;
    Ok(neg_log_softmax_at(&margin_logits(logits, target, cfg), target))
}

/// Gradient of [`angular_penalty_loss`] with respect to each cosine:
/// `s * (p_i - [i == target])`.
pub fn angular_penalty_grad(
    logits: &CosineLogits,
    target: usize,
    cfg: &LossConfig,
) -> Result<Vec<f64>> {
    check_target(logits, target)?;
    cfg.validate()?;
    let mut p = softmax(&margin_logits(logits, target, cfg))?;
    p[target] -= 1.0;
    for g in &mut p {
        *g *= cfg.scale;
    }
    Ok(p)
}

/// Mean angular penalty loss over a batch of raw (unnormalized) features.
pub fn batch_loss(
    features: &[Vec<f64>],
    targets: &[usize],
    weights: &[Vec<f64>],
    cfg: &LossConfig,
) -> Result<f64> {
    check_batch(features, targets)?;
    let mut total = 0.0;
    for (f, &t) in features.iter().zip(targets) {
        let logits = cosine_logits(f, weights)?;
        total += angular_penalty_loss(&logits, t, cfg)?;
    }
    Ok(total / features.len() as f64)
}

fn check_batch(features: &[Vec<f64>], targets: &[usize]) -> Result<()> {
    if features.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if features.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: features.len(),
            got: targets.len(),
        });
    }
    Ok(())
}

/// Loss and gradients of [`batch_loss`] with respect to the raw features and
/// the raw classifier rows, chained through both normalizations.
#[derive(Debug, Clone)]
pub struct BatchLossGrad {
    pub loss: f64,
    pub d_features: Vec<Vec<f64>>,
    pub d_weights: Vec<Vec<f64>>,
}

pub fn batch_loss_grad(
    features: &[Vec<f64>],
    targets: &[usize],
    weights: &[Vec<f64>],
    cfg: &LossConfig,
) -> Result<BatchLossGrad> {
    check_batch(features, targets)?;
    let dim = features[0].len();
    let w_norms: Vec<f64> = weights.iter().map(|w| norm(w)).collect();
    if w_norms.iter().any(|&n| !(n >= ZERO_NORM)) {
        return Err(Error::ZeroVector);
    }
    let w_hat: Vec<Vec<f64>> = weights
        .iter()
        .zip(&w_norms)
        .map(|(w, n)| w.iter().map(|x| x / n).collect())
        .collect();

    let inv_n = 1.0 / features.len() as f64;
    let mut loss = 0.0;
    let mut d_features = Vec::with_capacity(features.len());
    let mut d_weights = vec![vec![0.0; dim]; weights.len()];

    for (f, &t) in features.iter().zip(targets) {
        if f.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: f.len(),
            });
        }
        let logits = cosine_logits(f, weights)?;
        loss += angular_penalty_loss(&logits, t, cfg)?;
        let d_cos = angular_penalty_grad(&logits, t, cfg)?;

        let f_norm = norm(f);
        let f_hat: Vec<f64> = f.iter().map(|x| x / f_norm).collect();
        let mut d_f = vec![0.0; dim];
        for (i, (&g, &c)) in d_cos.iter().zip(&logits.0).enumerate() {
            let g = g * inv_n;
            if g == 0.0 {
                continue;
            }
            // d cos / d f   = (w_hat - cos * f_hat) / |f|
            // d cos / d w_i = (f_hat - cos * w_hat) / |w_i|
            let wh = &w_hat[i];
            let gf = g / f_norm;
            let gw = g / w_norms[i];
            for k in 0..dim {
                d_f[k] += gf * (wh[k] - c * f_hat[k]);
                d_weights[i][k] += gw * (f_hat[k] - c * wh[k]);
            }
        }
        d_features.push(d_f);
    }

    Ok(BatchLossGrad {
        loss: loss * inv_n,
        d_features,
        d_weights,
    })
}
