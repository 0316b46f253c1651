use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::autodiff::Matrix;

fn unit_rows(rows: usize, cols: usize, seed: u64) -> Matrix<f32> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0f32..1.0)).collect()).unwrap();
    m.l2_normalized_rows(1e-12)
}

fn table(rows: Vec<Vec<usize>>) -> NegativeTable {
    let samples: Vec<_> = rows
        .into_iter()
        .enumerate()
        .map(|(anchor, indices)| NegativeSample { anchor, indices })
        .collect();
    NegativeTable::from_samples(&samples).unwrap()
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

// Direct transcription of the softmax objective, one anchor at a time.
fn brute_softmax(z1: &Matrix<f32>, z2: &Matrix<f32>, t: &NegativeTable, tau: f64) -> (f64, f64) {
    let n = z1.rows();
    let dir = |a: &Matrix<f32>, b: &Matrix<f32>| {
        let mut total = 0.0;
        for i in 0..n {
            let h = |j: usize| (dot(a.row(i), b.row(j)) / tau).exp();
            let num = h(i);
            let den: f64 = num + t.row(i).iter().map(|&j| h(j)).sum::<f64>();
            total += -(num / den).ln();
        }
        total / n as f64
    };
    (dir(z1, z2), dir(z2, z1))
}

fn brute_nce(z1: &Matrix<f32>, z2: &Matrix<f32>, m1: &Matrix<f32>, m2: &Matrix<f32>, t: &NegativeTable, tau: f64) -> f64 {
    let n = z1.rows();
    let k = t.k();
    let dir = |a: &Matrix<f32>, b: &Matrix<f32>, bank: &Matrix<f32>| {
        let mut total = 0.0;
        for i in 0..n {
            let p = |h: f64| h / (h + k as f64 / bank.rows() as f64);
            let mut s = p((dot(a.row(i), b.row(i)) / tau).exp()).ln();
            for &j in t.row(i) {
                s += (1.0 - p((dot(a.row(i), bank.row(j)) / tau).exp())).ln();
            }
            total -= s;
        }
        total / n as f64
    };
    dir(z1, z2, m2) + dir(z2, z1, m1)
}

#[test]
fn score_closed_forms() {
    assert!((score(&[1.0, 0.0], &[1.0, 0.0], 0.1).unwrap() - 22026.465794806718).abs() < 1e-6);
    assert_eq!(score(&[1.0, 0.0], &[0.0, 1.0], 0.37).unwrap(), 1.0);
    assert!((score(&[1.0, 0.0], &[-1.0, 0.0], 1.0).unwrap() - (-1.0f64).exp()).abs() < 1e-12);
    assert!(score(&[1.0], &[1.0], 0.0).is_err());
    assert!(score(&[1.0], &[1.0], -1.0).is_err());
}

#[test]
fn posterior_closed_forms() {
    assert!((nce_posterior(0.5, 5, 10) - 0.5).abs() < 1e-15);
    assert!((nce_posterior(1.0, 7, 7) - 0.5).abs() < 1e-15);
    let p = nce_posterior(10f64.exp(), 1024, 2048);
    assert!((p - 0.99998).abs() < 1e-5, "{p}");
}

#[test]
fn mi_bound_closed_forms() {
    assert_eq!(mi_lower_bound(0.0, 1), 0.0);
    assert!(mi_lower_bound(64f64.ln(), 64).abs() < 1e-15);
}

#[test]
fn softmax_single_anchor_closed_form() {
    // Anchor 0 with identical positive, negatives 1..3 orthogonal to it.
    let z = Matrix::from_rows(&[
        vec![1.0f32, 0.0, 0.0, 0.0],
        vec![0.0, 1.0, 0.0, 0.0],
        vec![0.0, 0.0, 1.0, 0.0],
        vec![0.0, 0.0, 0.0, 1.0],
    ]);
    let t = table(vec![vec![1, 2, 3], vec![0, 2, 3], vec![0, 1, 3], vec![0, 1, 2]]);
    let parts = softmax_contrastive_loss(&z, &z, &t, 1.0).unwrap();
    let want = (1.0 + 3.0 * (-1.0f64).exp()).ln();
    assert!((want - 0.7437).abs() < 1e-4);
    assert!((parts.l1 - want).abs() < 1e-12);
    assert!((parts.total() - 2.0 * want).abs() < 1e-12);
}

#[test]
fn softmax_identical_embeddings_is_uniform() {
    let row = vec![0.6f32, 0.8];
    let z = Matrix::from_rows(&vec![row; 5]);
    let t = table((0..5).map(|i| (0..5).filter(|&j| j != i).take(3).collect()).collect());
    let parts = softmax_contrastive_loss(&z, &z, &t, 0.1).unwrap();
    assert!((parts.l1 - 4f64.ln()).abs() < 1e-9);
    assert!((parts.l2 - 4f64.ln()).abs() < 1e-9);
}

#[test]
fn softmax_matches_brute_force() {
    let z1 = unit_rows(5, 4, 1);
    let z2 = unit_rows(5, 4, 2);
    let t = sample_negative_table(5, 2, 3, 0).unwrap();
    let parts = softmax_contrastive_loss(&z1, &z2, &t, 0.5).unwrap();
    let (l1, l2) = brute_softmax(&z1, &z2, &t, 0.5);
    assert!((parts.l1 - l1).abs() < 1e-5);
    assert!((parts.l2 - l2).abs() < 1e-5);
}

#[test]
fn softmax_rejects_k_at_least_n() {
    let z = unit_rows(3, 2, 0);
    let t = table(vec![vec![1, 2, 0], vec![0, 2, 1], vec![0, 1, 2]]);
    assert!(matches!(softmax_contrastive_loss(&z, &z, &t, 0.1), Err(Error::InvalidArgument(_))));
}

#[test]
fn nce_single_anchor_closed_form() {
    let mut rows = vec![vec![0.0f32, 0.0, 1.0]; 10];
    rows[0] = vec![1.0, 0.0, 0.0];
    rows[1] = vec![0.0, 1.0, 0.0];
    let mut bank = EmbeddingBank::new(10, 3);
    let all = Matrix::from_rows(&rows);
    bank.update(&all, &all).unwrap();
    let anchor = Matrix::from_rows(&[vec![1.0f32, 0.0, 0.0]]);
    let t = table(vec![vec![1]]);
    let parts = nce_loss(&anchor, &anchor, &bank, &t, 1.0).unwrap();
    let e = 1f64.exp();
    let want = -((e / (e + 0.1)).ln() + (1.0f64 - 1.0 / 1.1).ln());
    assert!((want - 2.4340).abs() < 1e-4);
    assert!((parts.l1 - want).abs() < 1e-12);
    assert!((parts.l2 - want).abs() < 1e-12);
}

#[test]
fn nce_matches_brute_force() {
    let z1 = unit_rows(8, 4, 10);
    let z2 = unit_rows(8, 4, 11);
    let m1 = unit_rows(8, 4, 12);
    let m2 = unit_rows(8, 4, 13);
    let mut bank = EmbeddingBank::new(8, 4);
    bank.update(&m1, &m2).unwrap();
    let t = sample_negative_table(8, 3, 5, 1).unwrap();
    let parts = nce_loss(&z1, &z2, &bank, &t, 0.3).unwrap();
    let want = brute_nce(&z1, &z2, &m1, &m2, &t, 0.3);
    assert!((parts.total() - want).abs() < 1e-5, "{} vs {want}", parts.total());
}

#[test]
fn nce_requires_initialized_bank() {
    let z = unit_rows(4, 2, 0);
    let bank = EmbeddingBank::new(4, 2);
    let t = sample_negative_table(4, 2, 0, 0).unwrap();
    assert!(matches!(nce_loss(&z, &z, &bank, &t, 0.1), Err(Error::State(_))));
}

#[test]
fn nce_bank_gets_no_gradient() {
    let z1 = unit_rows(6, 3, 20);
    let z2 = unit_rows(6, 3, 21);
    let t = sample_negative_table(6, 2, 0, 0).unwrap();
    let mut tape = crate::autodiff::Tape::<f64>::new();
    let a = tape.param(z1.cast());
    let b = tape.param(z2.cast());
    let m1 = tape.constant(z1.cast());
    let m2 = tape.constant(z2.cast());
    let terms = nce_loss_on_tape(&mut tape, a, b, m1, m2, &t, 0.1, 6).unwrap();
    let g = tape.backward(terms.total).unwrap();
    assert!(g.get(a).is_some());
    assert!(g.get(b).is_some());
    assert!(g.get(m1).is_none());
    assert!(g.get(m2).is_none());
}

#[test]
fn sample_negatives_forced_and_exhaustive() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let s = sample_negatives(0, 3, 2, &mut rng).unwrap();
    assert_eq!(s.indices.iter().copied().collect::<BTreeSet<_>>(), BTreeSet::from([1, 2]));
    let s = sample_negatives(17, 1000, 999, &mut rng).unwrap();
    let set: BTreeSet<_> = s.indices.iter().copied().collect();
    assert_eq!(set.len(), 999);
    assert!(!set.contains(&17));
    assert!(sample_negatives(0, 3, 3, &mut rng).is_err());
}

#[test]
fn sample_negatives_uniform() {
    // 10^5 draws of K=3 from N=11 around anchor 4: each of the 10 ids has
    // inclusion probability 3/10.
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (n, k, anchor, trials) = (11usize, 3usize, 4usize, 100_000usize);
    let mut counts = vec![0usize; n];
    for _ in 0..trials {
        for j in sample_negatives(anchor, n, k, &mut rng).unwrap().indices {
            counts[j] += 1;
        }
    }
    assert_eq!(counts[anchor], 0);
    let p = k as f64 / (n - 1) as f64;
    let mean = trials as f64 * p;
    let sd = (trials as f64 * p * (1.0 - p)).sqrt();
    for (j, &c) in counts.iter().enumerate().filter(|&(j, _)| j != anchor) {
        assert!((c as f64 - mean).abs() < 5.0 * sd, "id {j}: {c} vs {mean}");
    }
}

#[test]
fn negative_table_is_order_independent() {
    let t = sample_negative_table(50, 5, 42, 3).unwrap();
    let mut rng = crate::rng::stream_rng(42, crate::rng::Stream::Negatives, &[3, 31]);
    assert_eq!(t.row(31), sample_negatives(31, 50, 5, &mut rng).unwrap().indices.as_slice());
    assert_eq!(t, sample_negative_table(50, 5, 42, 3).unwrap());
    assert_ne!(t, sample_negative_table(50, 5, 42, 4).unwrap());
}

#[test]
fn bank_update_replaces() {
    let mut bank = EmbeddingBank::new(4, 3);
    assert!(!bank.is_initialized());
    let a = unit_rows(4, 3, 1);
    let b = unit_rows(4, 3, 2);
    bank.update(&a, &b).unwrap();
    assert!(bank.is_initialized());
    assert_eq!(bank.view1(), &a);
    bank.update(&b, &a).unwrap();
    assert_eq!(bank.view1(), &b);
    assert_eq!(bank.view2(), &a);
    for i in 0..4 {
        let norm = dot(bank.view1().row(i), bank.view1().row(i)).sqrt();
        assert!((norm - 1.0).abs() < 1e-4);
    }
    assert!(bank.update(&unit_rows(3, 3, 0), &b).is_err());
}

#[test]
fn risk_examples() {
    let k = BTreeSet::from([1, 2, 3, 4]);
    assert_eq!(sampling_risk(&k, &BTreeSet::from([2, 9])).unwrap(), 0.25);
    assert_eq!(sampling_risk(&k, &BTreeSet::from([7])).unwrap(), 0.0);
    assert_eq!(sampling_risk(&k, &BTreeSet::from([0, 1, 2, 3, 4, 5])).unwrap(), 1.0);
    assert!(sampling_risk(&BTreeSet::new(), &k).is_err());
    let report = RiskReport::new(0, &k, &BTreeSet::from([2, 9])).unwrap();
    let json = serde_json::to_value(&report).unwrap();
    assert_eq!(json["K"], 4);
    assert_eq!(json["overlap"], 1);
}

#[test]
fn similar_set_modes() {
    let e = Matrix::from_rows(&[
        vec![1.0f32, 0.0, 0.0],
        vec![0.0, 1.0, 0.0],
        vec![1.0, 0.0, 0.0],
        vec![0.0, 0.0, 1.0],
        vec![1.0, 0.0, 0.0],
    ]);
    let set = estimate_similar_set(0, SimilarityCriterion::Cosine { embeddings: &e, threshold: 0.5 }).unwrap();
    assert_eq!(set, BTreeSet::from([2, 4]));

    let labels = [0i64, 1, 0, -1, 0];
    let set = estimate_similar_set(2, SimilarityCriterion::Labels(&labels)).unwrap();
    assert_eq!(set, BTreeSet::from([0, 4]));
    assert!(estimate_similar_set(3, SimilarityCriterion::Labels(&labels)).unwrap().is_empty());
    assert!(estimate_similar_set(9, SimilarityCriterion::Labels(&labels)).is_err());
}

#[test]
fn config_validation() {
    let cfg = ContrastiveConfig::default();
    assert_eq!((cfg.tau, cfg.k, cfg.rho), (0.1, 1024, 0.3));
    assert!(cfg.validate(2000).is_ok());
    assert!(cfg.validate(1024).is_err());
    assert!(ContrastiveConfig { tau: 0.0, ..cfg }.validate(2000).is_err());
    assert!(ContrastiveConfig { rho: 1.0, ..cfg }.validate(2000).is_err());
    assert!(ContrastiveConfig { k: 0, ..cfg }.validate(2000).is_err());
}

fn instance() -> impl Strategy<Value = (u64, usize, usize, f64)> {
    (any::<u64>(), 3usize..9, 1usize..3, 0.05f64..2.0).prop_filter("k < n", |(_, n, k, _)| k < n)
}

proptest! {
    #[test]
    fn prop_losses_symmetric((seed, n, k, tau) in instance()) {
        let z1 = unit_rows(n, 3, seed);
        let z2 = unit_rows(n, 3, seed ^ 1);
        let m1 = unit_rows(n, 3, seed ^ 2);
        let m2 = unit_rows(n, 3, seed ^ 3);
        let t = sample_negative_table(n, k, seed, 0).unwrap();
        let a = softmax_contrastive_loss(&z1, &z2, &t, tau).unwrap();
        let b = softmax_contrastive_loss(&z2, &z1, &t, tau).unwrap();
        prop_assert!((a.total() - b.total()).abs() < 1e-9);
        prop_assert!(a.total() > 0.0);

        let mut bank = EmbeddingBank::new(n, 3);
        bank.update(&m1, &m2).unwrap();
        let mut swapped = EmbeddingBank::new(n, 3);
        swapped.update(&m2, &m1).unwrap();
        let x = nce_loss(&z1, &z2, &bank, &t, tau).unwrap();
        let y = nce_loss(&z2, &z1, &swapped, &t, tau).unwrap();
        prop_assert!((x.total() - y.total()).abs() < 1e-9);
    }

    #[test]
    fn prop_positive_dot_monotone((seed, n, k, tau) in instance(), lift in 0.05f32..0.5) {
        // Move anchor 0's positive toward the anchor and check L1 drops.
        let z1 = unit_rows(n, 3, seed);
        let z2 = unit_rows(n, 3, seed ^ 7);
        let a0 = z1.row(0).to_vec();
        let p0 = z2.row(0).to_vec();
        prop_assume!(dot(&a0, &p0) < 0.95);
        let mut z2b = z2.clone();
        let moved: Vec<f32> = p0.iter().zip(&a0).map(|(&p, &a)| p + lift * (a - p)).collect();
        let norm = dot(&moved, &moved).sqrt() as f32;
        z2b.row_mut(0).iter_mut().zip(&moved).for_each(|(d, &v)| *d = v / norm);
        prop_assume!(dot(&a0, z2b.row(0)) > dot(&a0, &p0) + 1e-4);

        // Negatives never point at the positive being moved.
        let rows: Vec<Vec<usize>> = (0..n).map(|i| (0..n).filter(|&j| j != i && j != 0).take(k).collect()).collect();
        prop_assume!(rows.iter().all(|r| r.len() == k));
        let t = table(rows);
        let before = softmax_contrastive_loss(&z1, &z2, &t, tau).unwrap();
        let after = softmax_contrastive_loss(&z1, &z2b, &t, tau).unwrap();
        prop_assert!(after.l1 < before.l1);

        let mut bank = EmbeddingBank::new(n, 3);
        bank.update(&z1, &z2).unwrap();
        let before = nce_loss(&z1, &z2, &bank, &t, tau).unwrap();
        let after = nce_loss(&z1, &z2b, &bank, &t, tau).unwrap();
        prop_assert!(after.l1 < before.l1);
    }

    #[test]
    fn prop_posterior_in_unit_interval(s in -20f64..20.0, k in 1usize..5000, n in 2usize..10000) {
        let p = nce_posterior(s.exp(), k, n);
        prop_assert!(p > 0.0 && p < 1.0);
    }

    #[test]
    fn prop_softmax_probabilities_sum_to_one(seed in any::<u64>(), tau in 0.05f64..2.0) {
        let z = unit_rows(6, 4, seed);
        let scores: Vec<f64> = (1..6).map(|j| score(z.row(0), z.row(j), tau).unwrap()).collect();
        let total: f64 = scores.iter().sum();
        let sum: f64 = scores.iter().map(|s| s / total).sum();
        prop_assert!((sum - 1.0).abs() < 1e-5);
    }

    #[test]
    fn prop_cosine_set_matches_scan(seed in any::<u64>(), th in -1.0f64..1.0, anchor in 0usize..12) {
        let e = unit_rows(12, 4, seed);
        let got = estimate_similar_set(anchor, SimilarityCriterion::Cosine { embeddings: &e, threshold: th }).unwrap();
        let mut want = BTreeSet::new();
        for j in 0..12 {
            if j == anchor { continue; }
            let (a, b) = (e.row(anchor), e.row(j));
            let c = dot(a, b) / (dot(a, a).sqrt() * dot(b, b).sqrt());
            if c >= th { want.insert(j); }
        }
        prop_assert_eq!(got, want);
    }

    #[test]
    fn prop_negative_sample_invariants(seed in any::<u64>(), n in 2usize..60, frac in 0.0f64..1.0, anchor_frac in 0.0f64..1.0) {
        let k = ((n - 1) as f64 * frac) as usize;
        let anchor = ((n as f64 * anchor_frac) as usize).min(n - 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = sample_negatives(anchor, n, k, &mut rng).unwrap();
        let set: BTreeSet<_> = s.indices.iter().copied().collect();
        prop_assert_eq!(set.len(), k);
        prop_assert!(!set.contains(&anchor));
        prop_assert!(set.iter().all(|&j| j < n));
    }

    #[test]
    fn prop_risk_is_exact_ratio(k in proptest::collection::btree_set(0usize..40, 1..20), m in proptest::collection::btree_set(0usize..40, 0..20)) {
        let r = sampling_risk(&k, &m).unwrap();
        let overlap = k.iter().filter(|x| m.contains(x)).count();
        prop_assert_eq!(r, overlap as f64 / k.len() as f64);
    }
}

#[test]
fn logits_rebuild_softmax_loss() {
    let z1 = unit_rows(7, 3, 30);
    let z2 = unit_rows(7, 3, 31);
    let t = sample_negative_table(7, 3, 1, 0).unwrap();
    let mut tape = crate::autodiff::Tape::<f64>::new();
    let a = tape.constant(z1.cast());
    let b = tape.constant(z2.cast());
    // An NCE pass against a bank equal to the live views yields the same
    // logits the softmax loss uses.
    let terms = nce_loss_on_tape(&mut tape, a, b, a, b, &t, 0.2, 7).unwrap();
    let rebuilt = softmax_loss_from_logits(
        tape.value(terms.first.positive_logits),
        tape.value(terms.first.negative_logits),
    )
    .unwrap();
    let direct = softmax_contrastive_loss(&z1, &z2, &t, 0.2).unwrap();
    assert!((rebuilt - direct.l1).abs() < 1e-12);
}
