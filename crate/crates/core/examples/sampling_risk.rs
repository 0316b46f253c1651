//! Risk of drawing same-class nodes as negatives shrinks as the graph grows.

use std::collections::BTreeSet;

use cgnn::contrastive::{estimate_similar_set, sample_negatives, sampling_risk, SimilarityCriterion};
use cgnn::rng::{stream_rng, Stream};

fn main() -> cgnn::Result<()> {
    let similar = 99;
    for (n, k) in [(300usize, 64usize), (1000, 256), (10000, 1024)] {
        // Node 0 plus `similar` others share label 0.
        let labels: Vec<i64> = (0..n).map(|i| if i <= similar { 0 } else { 1 + (i % 5) as i64 }).collect();
        let m = estimate_similar_set(0, SimilarityCriterion::Labels(&labels))?;
        let mut rng = stream_rng(3, Stream::Risk, &[n as u64]);
        let trials = 2000;
        let mut total = 0.0;
        for _ in 0..trials {
            let s: BTreeSet<usize> = sample_negatives(0, n, k, &mut rng)?.indices.into_iter().collect();
            total += sampling_risk(&s, &m)?;
        }
        println!(
            "N {n:6} K {k:5}: mean risk {:.4}, |M|/(N-1) = {:.4}",
            total / trials as f64,
            m.len() as f64 / (n - 1) as f64
        );
    }
    Ok(())
}
