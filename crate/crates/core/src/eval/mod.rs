//! Downstream and diagnostic measurements on trained encoders.

mod mi_toy;
mod probe;
mod silhouette;
mod stability;

use crate::autodiff::Matrix;
use crate::contrastive::NORM_EPS;
use crate::dataset::Dataset;
use crate::encoder::{encode, EncoderParams};
use crate::error::Result;
use crate::graph::full_view;

pub use mi_toy::{mi_toy_validate, MiToyConfig, MiToyReport};
pub use probe::{linear_probe, ProbeConfig, ProbeReport};
pub use silhouette::silhouette;
pub use stability::{stability_matrices, stability_matrix, StabilityReport};

/// Embeddings of every node on the undropped graph, rows L2-normalized.
pub fn embed_full(params: &EncoderParams, dataset: &Dataset) -> Result<Matrix<f32>> {
    let z = encode(params, &full_view(&dataset.graph), &dataset.features)?;
    Ok(z.l2_normalized_rows(NORM_EPS as f32))
}

pub(crate) fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x as f64, y as f64);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    let denom = (na * nb).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        (dot / denom).clamp(-1.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_sbm, SbmConfig};
    use crate::encoder::{Arch, Dims};
    use crate::graph::drop_edges;
    use rand::SeedableRng;

    #[test]
    fn embed_full_is_normalized_undropped_encoding() {
        let d = generate_sbm(&SbmConfig { nodes_per_block: 10, ..SbmConfig::default() }).unwrap();
        let p = EncoderParams::init(Arch::Gcn, Dims::new(16, 8, 8), 1).unwrap();
        let z = embed_full(&p, &d).unwrap();
        assert_eq!(z, embed_full(&p, &d).unwrap());
        for i in 0..z.rows() {
            let n: f32 = z.row(i).iter().map(|v| v * v).sum::<f32>().sqrt();
            assert!((n - 1.0).abs() < 1e-5);
        }
        let view = drop_edges(&d.graph, 0.0, &mut rand_chacha::ChaCha8Rng::seed_from_u64(3)).unwrap();
        let direct = encode(&p, &view, &d.features).unwrap().l2_normalized_rows(NORM_EPS as f32);
        assert_eq!(z, direct);
    }
}
