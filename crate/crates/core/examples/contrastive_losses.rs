//! Score function, softmax loss and its NCE approximation on a handful of
//! random unit vectors.

use cgnn::autodiff::Matrix;
use cgnn::contrastive::{
    mi_lower_bound, nce_loss, nce_posterior, sample_negative_table, score, softmax_contrastive_loss, EmbeddingBank,
};
use rand::{Rng, SeedableRng};

fn unit_rows(n: usize, d: usize, seed: u64) -> Matrix<f32> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let m = Matrix::from_vec(n, d, (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    m.l2_normalized_rows(1e-12)
}

fn main() -> cgnn::Result<()> {
    let e = [1.0f32, 0.0];
    println!("h(z, z)  at tau 0.1 = {:.2}", score(&e, &e, 0.1)?);
    println!("h(z, z⊥) at tau 0.1 = {:.2}", score(&e, &[0.0, 1.0], 0.1)?);
    println!("posterior at h = K/N: {}", nce_posterior(0.5, 512, 1024));

    let (n, k, tau) = (32, 8, 0.2);
    let z1 = unit_rows(n, 16, 1);
    // Second view: a small perturbation of the first.
    let noise = unit_rows(n, 16, 2);
    let mut z2 = z1.clone();
    for (a, b) in z2.as_mut_slice().iter_mut().zip(noise.as_slice()) {
        *a += 0.3 * b;
    }
    let z2 = z2.l2_normalized_rows(1e-12);
    let negatives = sample_negative_table(n, k, 0, 0)?;

    let soft = softmax_contrastive_loss(&z1, &z2, &negatives, tau)?;
    println!("softmax: L1 {:.4} L2 {:.4} bound ln K - L1 = {:.4}", soft.l1, soft.l2, mi_lower_bound(soft.l1, k));

    let mut bank = EmbeddingBank::new(n, 16);
    bank.update(&z1, &z2)?;
    let nce = nce_loss(&z1, &z2, &bank, &negatives, tau)?;
    println!("nce:     L1 {:.4} L2 {:.4} total {:.4}", nce.l1, nce.l2, nce.total());
    Ok(())
}
