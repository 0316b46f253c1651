use std::collections::BTreeSet;

use serde::Serialize;

use crate::autodiff::Matrix;
use crate::error::{Error, Result};

/// Fraction of a negative sample that falls inside the anchor's similar set.
pub fn sampling_risk(sampled: &BTreeSet<usize>, similar: &BTreeSet<usize>) -> Result<f64> {
    if sampled.is_empty() {
        return Err(Error::arg("sampling risk of an empty sample is undefined"));
    }
    let overlap = sampled.intersection(similar).count();
    Ok(overlap as f64 / sampled.len() as f64)
}

/// How to decide which nodes count as similar to an anchor.
#[derive(Debug, Clone, Copy)]
pub enum SimilarityCriterion<'a> {
    /// Nodes whose embedding cosine with the anchor reaches `threshold`.
    Cosine {
        embeddings: &'a Matrix<f32>,
        threshold: f64,
    },
    /// Nodes sharing the anchor's label. Unlabeled (`-1`) nodes match nothing.
    Labels(&'a [i64]),
}

pub fn estimate_similar_set(anchor: usize, criterion: SimilarityCriterion<'_>) -> Result<BTreeSet<usize>> {
    match criterion {
        SimilarityCriterion::Cosine { embeddings, threshold } => {
            let n = embeddings.rows();
            if anchor >= n {
                return Err(Error::Range {
                    what: "anchor",
                    index: anchor,
                    limit: n,
                });
            }
            let a = embeddings.row(anchor);
            let na = norm(a);
            Ok((0..n)
                .filter(|&j| j != anchor)
                .filter(|&j| {
                    let b = embeddings.row(j);
                    cosine(a, na, b) >= threshold
                })
                .collect())
        }
        SimilarityCriterion::Labels(labels) => {
            let label = *labels.get(anchor).ok_or(Error::Range {
                what: "anchor",
                index: anchor,
                limit: labels.len(),
            })?;
            if label < 0 {
                return Ok(BTreeSet::new());
            }
            Ok(labels
                .iter()
                .enumerate()
                .filter(|&(j, &l)| j != anchor && l == label)
                .map(|(j, _)| j)
                .collect())
        }
    }
}

fn norm(v: &[f32]) -> f64 {
    v.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt()
}

fn cosine(a: &[f32], na: f64, b: &[f32]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum();
    let denom = na * norm(b);
    if denom == 0.0 {
        0.0
    } else {
        dot / denom
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskReport {
    pub anchor: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub overlap: usize,
    pub risk: f64,
}

impl RiskReport {
    pub fn new(anchor: usize, sampled: &BTreeSet<usize>, similar: &BTreeSet<usize>) -> Result<Self> {
        Ok(Self {
            anchor,
            k: sampled.len(),
            overlap: sampled.intersection(similar).count(),
            risk: sampling_risk(sampled, similar)?,
        })
    }
}
