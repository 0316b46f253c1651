use serde::{Deserialize, Serialize};

use crate::autodiff::Matrix;
use crate::dataset::{num_classes, Splits};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub lr: f64,
    pub epochs: usize,
    pub weight_decay: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            epochs: 300,
            weight_decay: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    /// Test accuracy of the epoch with the best validation accuracy.
    pub accuracy: f64,
    pub val_accuracy: f64,
    pub best_epoch: usize,
    /// Test accuracy per class; `None` for classes absent from the test split.
    pub per_class_accuracy: Vec<Option<f64>>,
    /// C×d.
    pub probe_weights: Matrix<f64>,
    pub probe_bias: Vec<f64>,
}

struct Softmax {
    w: Vec<f64>,
    b: Vec<f64>,
    c: usize,
    d: usize,
}

impl Softmax {
    fn logits(&self, x: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            let w = &self.w[k * self.d..(k + 1) * self.d];
            *o = self.b[k] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    /// Argmax with ties going to the smallest class index.
    fn predict(&self, x: &[f64], buf: &mut [f64]) -> usize {
        self.logits(x, buf);
        let mut best = 0;
        for k in 1..self.c {
            if buf[k] > buf[best] {
                best = k;
            }
        }
        best
    }

    fn accuracy(&self, x: &[Vec<f64>], labels: &[i64], nodes: &[usize]) -> f64 {
        if nodes.is_empty() {
            return 0.0;
        }
        let mut buf = vec![0.0; self.c];
        let hits = nodes
            .iter()
            .filter(|&&i| self.predict(&x[i], &mut buf) as i64 == labels[i])
            .count();
        hits as f64 / nodes.len() as f64
    }
}

/// Softmax regression on frozen embeddings, trained by full-batch gradient
/// descent on the train split and selected by validation accuracy.
pub fn linear_probe(
    embeddings: &Matrix<f32>,
    labels: &[i64],
    splits: &Splits,
    cfg: &ProbeConfig,
) -> Result<ProbeReport> {
    let n = embeddings.rows();
    if labels.len() != n {
        return Err(Error::shape("linear_probe", format!("{n} embeddings, {} labels", labels.len())));
    }
    for &i in splits.train.iter().chain(&splits.val).chain(&splits.test) {
        if i >= n {
            return Err(Error::Range { what: "split node", index: i, limit: n });
        }
        if labels[i] < 0 {
            return Err(Error::arg(format!("split node {i} is unlabeled")));
        }
    }
    if splits.train.is_empty() {
        return Err(Error::arg("empty train split"));
    }
    let c = num_classes(labels);
    let d = embeddings.cols();
    let mut in_train = vec![false; c];
    for &i in &splits.train {
        in_train[labels[i] as usize] = true;
    }
    for (k, present) in in_train.iter().enumerate() {
        if !present {
            log::warn!("class {k} has no training nodes; the probe cannot learn it");
        }
    }

    let x: Vec<Vec<f64>> = (0..n).map(|i| embeddings.row(i).iter().map(|&v| v as f64).collect()).collect();
    let mut model = Softmax { w: vec![0.0; c * d], b: vec![0.0; c], c, d };
    let mut best = (f64::NEG_INFINITY, 0usize, model.w.clone(), model.b.clone());
    let mut logits = vec![0.0; c];
    let mut gw = vec![0.0; c * d];
    let mut gb = vec![0.0; c];
    let scale = 1.0 / splits.train.len() as f64;

    for epoch in 1..=cfg.epochs {
        gw.iter_mut().for_each(|g| *g = 0.0);
        gb.iter_mut().for_each(|g| *g = 0.0);
        for &i in &splits.train {
            model.logits(&x[i], &mut logits);
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = logits.iter().map(|l| (l - max).exp()).sum();
            for k in 0..c {
                let p = (logits[k] - max).exp() / z;
                let delta = (p - if labels[i] as usize == k { 1.0 } else { 0.0 }) * scale;
                gb[k] += delta;
                for (g, &xv) in gw[k * d..(k + 1) * d].iter_mut().zip(&x[i]) {
                    *g += delta * xv;
                }
            }
        }
        for (w, g) in model.w.iter_mut().zip(&gw) {
            *w -= cfg.lr * (g + cfg.weight_decay * *w);
        }
        for (b, g) in model.b.iter_mut().zip(&gb) {
            *b -= cfg.lr * g;
        }
        let val = if splits.val.is_empty() {
            model.accuracy(&x, labels, &splits.train)
        } else {
            model.accuracy(&x, labels, &splits.val)
        };
        if val > best.0 {
            best = (val, epoch, model.w.clone(), model.b.clone());
        }
    }

    let (val_accuracy, best_epoch, w, b) = best;
    let model = Softmax { w, b, c, d };
    let mut per_class = vec![(0usize, 0usize); c];
    let mut buf = vec![0.0; c];
    for &i in &splits.test {
        let k = labels[i] as usize;
        per_class[k].1 += 1;
        if model.predict(&x[i], &mut buf) == k {
            per_class[k].0 += 1;
        }
    }
    Ok(ProbeReport {
        accuracy: model.accuracy(&x, labels, &splits.test),
        val_accuracy,
        best_epoch,
        per_class_accuracy: per_class
            .iter()
            .map(|&(hit, total)| (total > 0).then(|| hit as f64 / total as f64))
            .collect(),
        probe_weights: Matrix::from_vec(c, d, model.w)?,
        probe_bias: model.b,
    })
}
