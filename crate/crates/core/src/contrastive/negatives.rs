use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

/// `K` distinct non-anchor node ids drawn uniformly without replacement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NegativeSample {
    pub anchor: usize,
    pub indices: Vec<usize>,
}

pub fn sample_negatives<R: Rng + ?Sized>(
    anchor: usize,
    n: usize,
    k: usize,
    rng: &mut R,
) -> Result<NegativeSample> {
    if anchor >= n {
        return Err(Error::Range {
            what: "anchor",
            index: anchor,
            limit: n,
        });
    }
    if k > n - 1 {
        return Err(Error::arg(format!("cannot draw {k} negatives from {} non-anchor nodes", n - 1)));
    }
    let indices = rand::seq::index::sample(rng, n - 1, k)
        .into_iter()
        .map(|i| if i >= anchor { i + 1 } else { i })
        .collect();
    Ok(NegativeSample { anchor, indices })
}

/// Negatives for anchors `0..n`, stored row-major as an `n × k` index table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NegativeTable {
    k: usize,
    indices: Arc<[usize]>,
}

impl NegativeTable {
    pub fn from_samples(samples: &[NegativeSample]) -> Result<Self> {
        let k = samples.first().map_or(0, |s| s.indices.len());
        let mut flat = Vec::with_capacity(samples.len() * k);
        for (i, s) in samples.iter().enumerate() {
            if s.anchor != i || s.indices.len() != k {
                return Err(Error::arg(format!(
                    "sample {i} has anchor {} and {} negatives; expected anchor {i} with {k}",
                    s.anchor,
                    s.indices.len()
                )));
            }
            flat.extend_from_slice(&s.indices);
        }
        Ok(Self {
            k,
            indices: flat.into(),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn num_anchors(&self) -> usize {
        if self.k == 0 {
            0
        } else {
            self.indices.len() / self.k
        }
    }

    pub fn row(&self, anchor: usize) -> &[usize] {
        &self.indices[anchor * self.k..(anchor + 1) * self.k]
    }

    pub fn flat(&self) -> Arc<[usize]> {
        self.indices.clone()
    }

    /// Rows prefixed with the anchor itself: `[i, neg_1, …, neg_K]`.
    pub(crate) fn with_positive_first(&self) -> Arc<[usize]> {
        let n = self.num_anchors();
        let mut out = Vec::with_capacity(n * (self.k + 1));
        for i in 0..n {
            out.push(i);
            out.extend_from_slice(self.row(i));
        }
        out.into()
    }
}

/// Per-anchor negatives, anchor `i` drawing from its own stream keyed by
/// `(seed, step, i)` so the table does not depend on iteration order.
pub fn sample_negative_table(n: usize, k: usize, seed: u64, step: u64) -> Result<NegativeTable> {
    let samples = (0..n)
        .map(|anchor| {
            let mut rng = stream_rng(seed, Stream::Negatives, &[step, anchor as u64]);
            sample_negatives(anchor, n, k, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    NegativeTable::from_samples(&samples)
}
