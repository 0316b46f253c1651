use std::fs;
use std::path::Path;

use serde::Serialize;

use super::cosine;
use crate::autodiff::Matrix;
use crate::dataset::Dataset;
use crate::encoder::{encode, EncoderParams};
use crate::error::{Error, Result};
use crate::graph::drop_edges;
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub node: usize,
    /// T×T cosine similarities between the node's embeddings across trials.
    pub similarity_matrix: Matrix<f64>,
    /// Mean of the strict upper triangle of the raw matrix.
    pub mean_similarity: f64,
    /// Min-max scaled copy; all ones when the raw matrix is constant.
    pub normalized_matrix: Matrix<f64>,
}

impl StabilityReport {
    fn from_embeddings(node: usize, rows: &[&[f32]]) -> Self {
        let t = rows.len();
        let mut s = Matrix::<f64>::identity(t);
        let mut upper = 0.0;
        for i in 0..t {
            for j in i + 1..t {
                let c = cosine(rows[i], rows[j]);
                s.set(i, j, c);
                s.set(j, i, c);
                upper += c;
            }
        }
        let (lo, hi) = s
            .as_slice()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let normalized = if hi - lo < 1e-12 {
            Matrix::filled(t, t, 1.0)
        } else {
            s.map(|v| (v - lo) / (hi - lo))
        };
        Self {
            node,
            mean_similarity: upper / (t * (t - 1) / 2) as f64,
            similarity_matrix: s,
            normalized_matrix: normalized,
        }
    }

    /// T rows of T comma-separated raw similarities.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let m = &self.similarity_matrix;
        let mut out = String::new();
        for i in 0..m.rows() {
            let row: Vec<String> = m.row(i).iter().map(|v| v.to_string()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
    }
}

/// Stability reports for several nodes. Trial `t` draws its view from a
/// stream keyed by `(seed, t)`, so every node sees the same perturbations.
pub fn stability_matrices(
    params: &EncoderParams,
    dataset: &Dataset,
    nodes: &[usize],
    rho: f64,
    trials: usize,
    seed: u64,
) -> Result<Vec<StabilityReport>> {
    if trials < 2 {
        return Err(Error::arg(format!("stability needs at least 2 trials, got {trials}")));
    }
    let n = dataset.num_nodes();
    if let Some(&bad) = nodes.iter().find(|&&v| v >= n) {
        return Err(Error::arg(format!("node {bad} out of range for {n} nodes")));
    }
    let embeddings = (0..trials)
        .map(|t| {
            let view = drop_edges(&dataset.graph, rho, &mut stream_rng(seed, Stream::Stability, &[t as u64]))?;
            encode(params, &view, &dataset.features)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(nodes
        .iter()
        .map(|&v| {
            let rows: Vec<&[f32]> = embeddings.iter().map(|z| z.row(v)).collect();
            StabilityReport::from_embeddings(v, &rows)
        })
        .collect())
}

pub fn stability_matrix(
    params: &EncoderParams,
    dataset: &Dataset,
    node: usize,
    rho: f64,
    trials: usize,
    seed: u64,
) -> Result<StabilityReport> {
    Ok(stability_matrices(params, dataset, &[node], rho, trials, seed)?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_sbm, SbmConfig};
    use crate::encoder::{Arch, Dims};
    use proptest::prelude::*;

    fn setup() -> (EncoderParams, Dataset) {
        let d = generate_sbm(&SbmConfig { nodes_per_block: 15, ..SbmConfig::default() }).unwrap();
        (EncoderParams::init(Arch::Gcn, Dims::new(16, 8, 8), 2).unwrap(), d)
    }

    #[test]
    fn rho_zero_is_all_ones() {
        let (p, d) = setup();
        let r = stability_matrix(&p, &d, 4, 0.0, 10, 1).unwrap();
        assert_eq!(r.similarity_matrix.shape(), (10, 10));
        assert!(r.similarity_matrix.as_slice().iter().all(|&v| (v - 1.0).abs() < 1e-12));
        assert!((r.mean_similarity - 1.0).abs() < 1e-12);
        assert!(r.normalized_matrix.as_slice().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn errors() {
        let (p, d) = setup();
        assert!(stability_matrix(&p, &d, 45, 0.3, 10, 1).is_err());
        assert!(stability_matrix(&p, &d, 0, 0.3, 1, 1).is_err());
    }

    #[test]
    fn csv_has_t_rows() {
        let (p, d) = setup();
        let r = stability_matrix(&p, &d, 0, 0.3, 4, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        r.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.lines().all(|l| l.split(',').count() == 4));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn prop_matrix_shape_invariants(seed in any::<u64>(), node in 0usize..45, rho in 0.05f64..0.9, trials in 2usize..6) {
            let (p, d) = setup();
            let r = stability_matrix(&p, &d, node, rho, trials, seed).unwrap();
            let s = &r.similarity_matrix;
            for i in 0..trials {
                prop_assert_eq!(s.get(i, i), 1.0);
                for j in 0..trials {
                    prop_assert_eq!(s.get(i, j), s.get(j, i));
                    prop_assert!((-1.0..=1.0).contains(&s.get(i, j)));
                }
            }
            let norm = r.normalized_matrix.as_slice();
            prop_assert!(norm.iter().all(|v| (0.0..=1.0).contains(v)));
            let constant = s.as_slice().iter().all(|&v| (v - 1.0).abs() < 1e-12);
            if !constant {
                prop_assert!(norm.contains(&0.0));
                prop_assert!(norm.contains(&1.0));
            }
        }
    }
}
