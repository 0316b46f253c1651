//! Discrete two-view source with perfectly correlated views, used to check
//! that `ln K − L₁` never exceeds the true mutual information.
//!
//! Both views are the one-hot code of a uniform symbol among `M`; a shared
//! linear map embeds them and the embeddings are L2-normalized. The K
//! negatives are iid draws from the marginal, and the loss is the exact
//! expectation over them, computed by enumerating negative count vectors.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Matrix, Tape};
use crate::contrastive::{mi_lower_bound, NORM_EPS};
use crate::error::{Error, Result};
use crate::optim::Adam;
use crate::rng::{stream_rng, Stream};

const MAX_COMPOSITIONS: u64 = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiToyConfig {
    pub num_symbols: usize,
    pub k: usize,
    pub tau: f64,
    pub steps: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for MiToyConfig {
    fn default() -> Self {
        Self {
            num_symbols: 8,
            k: 7,
            tau: 0.1,
            steps: 300,
            lr: 0.05,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MiToyReport {
    /// `ln K − L₁` after optimization.
    pub bound: f64,
    /// Bound at the initial (untrained) map.
    pub initial_bound: f64,
    /// Mutual information of the source, by enumeration of the joint.
    pub true_mi: f64,
    pub loss: f64,
}

/// Negative count vectors `n ∈ ℕ^M` with `Σ n = K`, each with its
/// multinomial probability under uniform iid draws.
fn compositions(m: usize, k: usize) -> Vec<(Vec<u32>, f64)> {
    let ln_fact = |x: usize| (1..=x).map(|i| (i as f64).ln()).sum::<f64>();
    let base = ln_fact(k) - k as f64 * (m as f64).ln();
    let mut out = Vec::new();
    let mut counts = vec![0u32; m];
    fn rec(pos: usize, left: usize, counts: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if pos + 1 == counts.len() {
            counts[pos] = left as u32;
            out.push(counts.clone());
            return;
        }
        for c in 0..=left {
            counts[pos] = c as u32;
            rec(pos + 1, left - c, counts, out);
        }
    }
    let mut all = Vec::new();
    rec(0, k, &mut counts, &mut all);
    for c in all {
        let ln_p = base - c.iter().map(|&x| ln_fact(x as usize)).sum::<f64>();
        out.push((c, ln_p.exp()));
    }
    out
}

/// Expected L₁ and its gradient with respect to the logit matrix `S`.
fn expected_loss(s: &Matrix<f64>, comps: &[(Vec<u32>, f64)]) -> (f64, Matrix<f64>) {
    let m = s.rows();
    let mut loss = 0.0;
    let mut grad = Matrix::zeros(m, m);
    for a in 0..m {
        let row = s.row(a);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
        let mut g = vec![0.0; m];
        for (counts, p) in comps {
            let d: f64 = e[a] + counts.iter().zip(&e).map(|(&n, &x)| n as f64 * x).sum::<f64>();
            loss += p * (max + d.ln() - row[a]);
            for t in 0..m {
                let mult = counts[t] as f64 + if t == a { 1.0 } else { 0.0 };
                g[t] += p * mult * e[t] / d;
            }
        }
        g[a] -= 1.0;
        for (t, v) in g.into_iter().enumerate() {
            grad.set(a, t, v / m as f64);
        }
    }
    (loss / m as f64, grad)
}

/// `I(S₁; S₂)` for the perfectly correlated uniform source, summed over the
/// joint table.
fn enumerated_mi(m: usize) -> f64 {
    let joint = |a: usize, b: usize| if a == b { 1.0 / m as f64 } else { 0.0 };
    let mut mi = 0.0;
    for a in 0..m {
        for b in 0..m {
            let p = joint(a, b);
            if p > 0.0 {
                let pa: f64 = (0..m).map(|j| joint(a, j)).sum();
                let pb: f64 = (0..m).map(|i| joint(i, b)).sum();
                mi += p * (p / (pa * pb)).ln();
            }
        }
    }
    mi
}

/// Expected loss at map `w` and its gradient with respect to `w`.
fn evaluate(w: &Matrix<f64>, pairs: &Arc<[usize]>, comps: &[(Vec<u32>, f64)], tau: f64) -> Result<(f64, Matrix<f64>)> {
    let m = w.rows();
    let mut tape = Tape::<f64>::new();
    let wv = tape.param(w.clone());
    let z = tape.l2_normalize_rows(wv, NORM_EPS);
    let dots = tape.gather_dot(z, z, pairs.clone(), m)?;
    let s = tape.scale(dots, 1.0 / tau);
    let (loss, upstream) = expected_loss(tape.value(s), comps);
    // Linear surrogate whose gradient in S is the exact upstream gradient.
    let g = tape.constant(upstream);
    let prod = tape.mul(s, g)?;
    let surrogate = tape.sum(prod);
    let mut grads = tape.backward(surrogate)?;
    let gw = grads.take(wv).ok_or_else(|| Error::State("toy map received no gradient".into()))?;
    Ok((loss, gw))
}

pub fn mi_toy_validate(cfg: &MiToyConfig) -> Result<MiToyReport> {
    let m = cfg.num_symbols;
    if m < 2 {
        return Err(Error::arg(format!("need at least 2 symbols, got {m}")));
    }
    if cfg.k == 0 {
        return Err(Error::arg("K must be at least 1"));
    }
    if !(cfg.tau > 0.0) {
        return Err(Error::arg(format!("temperature must be positive, got {}", cfg.tau)));
    }
    let count = binomial(cfg.k + m - 1, m - 1);
    if count > MAX_COMPOSITIONS {
        return Err(Error::arg(format!("{count} negative configurations is too many to enumerate")));
    }
    let comps = compositions(m, cfg.k);

    let mut rng = stream_rng(cfg.seed, Stream::Toy, &[]);
    let limit = (3.0 / m as f64).sqrt();
    let mut w = Matrix::from_vec(m, m, (0..m * m).map(|_| rng.random_range(-limit..limit)).collect())?;
    let mut adam = Adam::new(cfg.lr, [&w]);
    let pairs: Arc<[usize]> = (0..m).flat_map(|_| 0..m).collect::<Vec<_>>().into();

    let (initial, _) = evaluate(&w, &pairs, &comps, cfg.tau)?;
    for _ in 0..cfg.steps {
        let (_, g) = evaluate(&w, &pairs, &comps, cfg.tau)?;
        adam.step([&mut w], &[g])?;
    }
    let (loss, _) = evaluate(&w, &pairs, &comps, cfg.tau)?;
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("toy loss became {loss}")));
    }
    Ok(MiToyReport {
        bound: mi_lower_bound(loss, cfg.k),
        initial_bound: mi_lower_bound(initial, cfg.k),
        true_mi: enumerated_mi(m),
        loss,
    })
}

fn binomial(n: usize, k: usize) -> u64 {
    let mut r: u64 = 1;
    for i in 0..k.min(n - k) {
        r = r.saturating_mul((n - i) as u64) / (i as u64 + 1);
    }
    r
}
