use rayon::prelude::*;

use crate::autodiff::Matrix;
use crate::dataset::num_classes;
use crate::error::{Error, Result};

fn distance(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Mean silhouette coefficient under Euclidean distance over nodes with a
/// label `>= 0`. Members of singleton classes score 0.
pub fn silhouette(embeddings: &Matrix<f32>, labels: &[i64]) -> Result<f64> {
    if labels.len() != embeddings.rows() {
        return Err(Error::shape(
            "silhouette",
            format!("{} embeddings, {} labels", embeddings.rows(), labels.len()),
        ));
    }
    let scored: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] >= 0).collect();
    let c = num_classes(labels);
    let mut sizes = vec![0usize; c];
    for &i in &scored {
        sizes[labels[i] as usize] += 1;
    }
    let present = sizes.iter().filter(|&&s| s > 0).count();
    if present < 2 {
        return Err(Error::arg(format!("silhouette needs at least 2 classes, found {present}")));
    }
    for (k, &s) in sizes.iter().enumerate() {
        if s == 1 {
            log::warn!("class {k} has a single member; its silhouette is taken as 0");
        }
    }

    let per_node: Vec<f64> = scored
        .par_iter()
        .map(|&i| {
            let own = labels[i] as usize;
            if sizes[own] == 1 {
                return 0.0;
            }
            let mut sums = vec![0.0f64; c];
            for &j in &scored {
                if j != i {
                    sums[labels[j] as usize] += distance(embeddings.row(i), embeddings.row(j));
                }
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..c)
                .filter(|&k| k != own && sizes[k] > 0)
                .map(|k| sums[k] / sizes[k] as f64)
                .fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            if denom == 0.0 {
                0.0
            } else {
                (b - a) / denom
            }
        })
        .collect();
    Ok(per_node.iter().sum::<f64>() / per_node.len() as f64)
}
