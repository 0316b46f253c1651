//! Contrastive objectives over paired node embeddings: the exponential
//! score, the softmax (InfoNCE) loss, its NCE approximation against a
//! memory bank, negative sampling, and sampling-risk diagnostics.

mod bank;
mod loss;
mod negatives;
mod risk;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bank::EmbeddingBank;
pub use loss::{
    nce_loss, nce_loss_on_tape, softmax_contrastive_loss, softmax_contrastive_loss_on_tape, softmax_loss_from_logits,
    DirectionTerms, LossParts, NceTerms,
};
pub use negatives::{sample_negative_table, sample_negatives, NegativeSample, NegativeTable};
pub use risk::{estimate_similar_set, sampling_risk, RiskReport, SimilarityCriterion};

/// Norm floor used whenever embedding rows are L2-normalized.
pub const NORM_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContrastiveConfig {
    /// Temperature τ of the score `exp(zᵀz'/τ)`.
    pub tau: f64,
    /// Negatives per anchor.
    pub k: usize,
    /// Edge drop ratio used to build the two views.
    pub rho: f64,
}

impl Default for ContrastiveConfig {
    fn default() -> Self {
        Self {
            tau: 0.1,
            k: 1024,
            rho: 0.3,
        }
    }
}

impl ContrastiveConfig {
    pub fn validate(&self, num_nodes: usize) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::arg(format!("temperature must be positive, got {}", self.tau)));
        }
        if self.k == 0 || self.k >= num_nodes {
            return Err(Error::arg(format!(
                "sampling size K={} must satisfy 1 <= K <= N-1 (N={num_nodes})",
                self.k
            )));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::arg(format!("drop ratio {} outside [0, 1)", self.rho)));
        }
        Ok(())
    }
}

/// `exp(z_aᵀ z_b / τ)` for unit vectors.
pub fn score(z_a: &[f32], z_b: &[f32], tau: f64) -> Result<f64> {
    if tau <= 0.0 {
        return Err(Error::arg(format!("temperature must be positive, got {tau}")));
    }
    if z_a.len() != z_b.len() {
        return Err(Error::shape("score", format!("{} vs {}", z_a.len(), z_b.len())));
    }
    let dot: f64 = z_a.iter().zip(z_b).map(|(&a, &b)| a as f64 * b as f64).sum();
    Ok((dot / tau).exp())
}

/// Probability that a pair with score `h` is the data pair rather than one
/// of `k` uniform noise draws over `n` nodes: `h / (h + k/n)`.
pub fn nce_posterior(h: f64, k: usize, n: usize) -> f64 {
    h / (h + k as f64 / n as f64)
}

/// Mutual-information lower bound `ln K − L` implied by a contrastive loss.
pub fn mi_lower_bound(loss: f64, k: usize) -> f64 {
    (k as f64).ln() - loss
}

#[cfg(test)]
mod tests;
