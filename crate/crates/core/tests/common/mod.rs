//! Helpers shared by the integration and acceptance targets.
#![allow(dead_code)]

use std::sync::Arc;

use cgnn::autodiff::{grad_check, GradCheckReport, Matrix, SparseMatrix, Tape, Var};
use cgnn::contrastive::{nce_loss_on_tape, sample_negative_table, EmbeddingBank, NegativeTable, NORM_EPS};
use cgnn::encoder::{encode_on_tape, Arch, Dims, EncoderParams, ParamVars, Propagation};
use cgnn::graph::{drop_edges, Graph};
use cgnn::rng::{stream_rng, Stream};
use cgnn::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_matrix(rng: &mut impl Rng, r: usize, c: usize) -> Matrix<f64> {
    Matrix::from_vec(r, c, (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

pub fn unit_rows(rows: usize, cols: usize, seed: u64) -> Matrix<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_matrix(&mut rng, rows, cols).cast::<f32>().l2_normalized_rows(1e-12)
}

pub fn bank_from(m1: &Matrix<f32>, m2: &Matrix<f32>) -> EmbeddingBank {
    let mut bank = EmbeddingBank::new(m1.rows(), m1.cols());
    bank.update(m1, m2).unwrap();
    bank
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

/// Softmax loss written out anchor by anchor: `(L1, L2)`.
pub fn brute_softmax(z1: &Matrix<f32>, z2: &Matrix<f32>, t: &NegativeTable, tau: f64) -> (f64, f64) {
    let n = z1.rows();
    let dir = |a: &Matrix<f32>, b: &Matrix<f32>| {
        let mut total = 0.0;
        for i in 0..n {
            let h = |j: usize| (dot(a.row(i), b.row(j)) / tau).exp();
            let den: f64 = h(i) + t.row(i).iter().map(|&j| h(j)).sum::<f64>();
            total -= (h(i) / den).ln();
        }
        total / n as f64
    };
    (dir(z1, z2), dir(z2, z1))
}

/// NCE loss written out anchor by anchor: `(L1, L2)`.
pub fn brute_nce(
    z1: &Matrix<f32>,
    z2: &Matrix<f32>,
    bank: &EmbeddingBank,
    t: &NegativeTable,
    tau: f64,
) -> (f64, f64) {
    let n = z1.rows();
    let noise = t.k() as f64 / bank.view1().rows() as f64;
    let p = |h: f64| h / (h + noise);
    let dir = |a: &Matrix<f32>, b: &Matrix<f32>, m: &Matrix<f32>| {
        let mut total = 0.0;
        for i in 0..n {
            total -= p((dot(a.row(i), b.row(i)) / tau).exp()).ln();
            for &j in t.row(i) {
                total -= (1.0 - p((dot(a.row(i), m.row(j)) / tau).exp())).ln();
            }
        }
        total / n as f64
    };
    (dir(z1, z2, bank.view2()), dir(z2, z1, bank.view1()))
}

/// Symmetric operator with self-loops and random positive weights.
pub fn random_operator(rng: &mut impl Rng, n: usize) -> SparseMatrix<f64> {
    let mut offsets = vec![0];
    let (mut cols, mut vals) = (vec![], vec![]);
    let mut dense = vec![vec![0.0; n]; n];
    for i in 0..n {
        dense[i][i] = rng.random_range(0.1..1.0);
        for j in i + 1..n {
            if rng.random_bool(0.4) {
                let w = rng.random_range(0.1..1.0);
                dense[i][j] = w;
                dense[j][i] = w;
            }
        }
    }
    for row in &dense {
        for (j, &v) in row.iter().enumerate() {
            if v != 0.0 {
                cols.push(j);
                vals.push(v);
            }
        }
        offsets.push(cols.len());
    }
    SparseMatrix::new(n, offsets, cols, vals).unwrap()
}

fn away_from_kink(m: Matrix<f64>) -> Matrix<f64> {
    m.map(|v| if v.abs() < 0.05 { v + v.signum() * 0.05 } else { v })
}

fn weighted(tape: &mut Tape<f64>, out: Var, w: &Matrix<f64>) -> Result<Var> {
    let wv = tape.constant(w.clone());
    let p = tape.mul(out, wv)?;
    Ok(tape.sum(p))
}

/// Gradient check of every tape primitive under a random weighted-sum loss.
pub fn primitive_checks(seed: u64, h: f64, tol: f64) -> Vec<(&'static str, GradCheckReport)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, d, k) = (5, 3, 2);
    let a = random_matrix(&mut rng, n, d);
    let b = random_matrix(&mut rng, n, d);
    let sq = random_matrix(&mut rng, d, d);
    let bias = random_matrix(&mut rng, 1, d);
    let pos = a.map(|v| v.abs() + 0.2);
    let kinked = away_from_kink(a.clone());
    let op = Arc::new(random_operator(&mut rng, n));
    let idx: Arc<[usize]> = (0..n * k).map(|_| rng.random_range(0..n)).collect();
    let c = rng.random_range(0.1..3.0);
    let w_nd = random_matrix(&mut rng, n, d);
    let w_nk = random_matrix(&mut rng, n * k, d);
    let w_dot = random_matrix(&mut rng, n, k);
    let w_col = random_matrix(&mut rng, n, 1);
    let w_one = random_matrix(&mut rng, 1, 1);

    type Case<'a> = (&'static str, Vec<Matrix<f64>>, Box<dyn Fn(&mut Tape<f64>, &[Var]) -> Result<Var> + 'a>);
    let cases: Vec<Case> = vec![
        ("matmul", vec![a.clone(), sq.clone()], Box::new(|t, v| { let o = t.matmul(v[0], v[1])?; weighted(t, o, &w_nd) })),
        ("spmm", vec![a.clone()], Box::new(|t, v| { let o = t.spmm(op.clone(), v[0])?; weighted(t, o, &w_nd) })),
        ("add_row_bias", vec![a.clone(), bias.clone()], Box::new(|t, v| { let o = t.add_row_bias(v[0], v[1])?; weighted(t, o, &w_nd) })),
        ("add", vec![a.clone(), b.clone()], Box::new(|t, v| { let o = t.add(v[0], v[1])?; weighted(t, o, &w_nd) })),
        ("sub", vec![a.clone(), b.clone()], Box::new(|t, v| { let o = t.sub(v[0], v[1])?; weighted(t, o, &w_nd) })),
        ("mul", vec![a.clone(), b.clone()], Box::new(|t, v| { let o = t.mul(v[0], v[1])?; weighted(t, o, &w_nd) })),
        ("add_scalar", vec![a.clone()], Box::new(|t, v| { let o = t.add_scalar(v[0], c); weighted(t, o, &w_nd) })),
        ("scale", vec![a.clone()], Box::new(|t, v| { let o = t.scale(v[0], c); weighted(t, o, &w_nd) })),
        ("relu", vec![kinked], Box::new(|t, v| { let o = t.relu(v[0]); weighted(t, o, &w_nd) })),
        ("exp", vec![a.clone()], Box::new(|t, v| { let o = t.exp(v[0]); weighted(t, o, &w_nd) })),
        ("ln", vec![pos], Box::new(|t, v| { let o = t.ln(v[0]); weighted(t, o, &w_nd) })),
        ("log_add_exp_const", vec![a.clone()], Box::new(|t, v| { let o = t.log_add_exp_const(v[0], c); weighted(t, o, &w_nd) })),
        ("l2_normalize_rows", vec![a.clone()], Box::new(|t, v| { let o = t.l2_normalize_rows(v[0], NORM_EPS); weighted(t, o, &w_nd) })),
        ("gather_rows", vec![a.clone()], Box::new(|t, v| { let o = t.gather_rows(v[0], idx.clone())?; weighted(t, o, &w_nk) })),
        ("row_dot", vec![a.clone(), b.clone()], Box::new(|t, v| { let o = t.row_dot(v[0], v[1])?; weighted(t, o, &w_col) })),
        ("gather_dot", vec![a.clone(), b.clone()], Box::new(|t, v| { let o = t.gather_dot(v[0], v[1], idx.clone(), k)?; weighted(t, o, &w_dot) })),
        ("sum", vec![a.clone()], Box::new(|t, v| { let o = t.sum(v[0]); weighted(t, o, &w_one) })),
        ("mean", vec![a.clone()], Box::new(|t, v| { let o = t.mean(v[0]); weighted(t, o, &w_one) })),
        ("sum_rows", vec![a.clone()], Box::new(|t, v| { let o = t.sum_rows(v[0]); weighted(t, o, &w_col) })),
        ("log_sum_exp_rows", vec![a.clone()], Box::new(|t, v| { let o = t.log_sum_exp_rows(v[0]); weighted(t, o, &w_col) })),
    ];
    cases
        .into_iter()
        .map(|(name, inputs, f)| (name, grad_check(|t: &mut Tape<f64>, v: &[Var]| f(t, v), &inputs, h, tol).unwrap()))
        .collect()
}

pub fn random_graph(rng: &mut impl Rng, n: usize, p: f64) -> Graph {
    let mut edges = vec![];
    for u in 0..n {
        for v in u + 1..n {
            if rng.random_bool(p) {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edges(n, edges).unwrap()
}

/// Encoder on two dropped views, row normalization and the NCE loss against
/// a fixed bank, checked end to end with respect to every encoder tensor.
pub fn composite_check(seed: u64, arch: Arch, h: f64, tol: f64) -> GradCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 8;
    let g = random_graph(&mut rng, n, 0.4);
    let x = random_matrix(&mut rng, n, 4);
    let params = EncoderParams::init(arch, Dims::new(4, 6, 3), seed).unwrap();
    let v1 = drop_edges(&g, 0.3, &mut stream_rng(seed, Stream::DropEdge, &[0, 0])).unwrap();
    let v2 = drop_edges(&g, 0.3, &mut stream_rng(seed, Stream::DropEdge, &[0, 1])).unwrap();
    let p1 = Propagation::<f64>::for_view(arch, &v1);
    let p2 = Propagation::<f64>::for_view(arch, &v2);
    let m1 = unit_rows(n, 3, seed ^ 1).cast::<f64>();
    let m2 = unit_rows(n, 3, seed ^ 2).cast::<f64>();
    let table = sample_negative_table(n, 3, seed, 0).unwrap();
    let f = |tape: &mut Tape<f64>, inputs: &[Var]| {
        let vars = ParamVars::from_slice(arch, inputs);
        let xv = tape.constant(x.clone());
        let z1 = encode_on_tape(tape, &vars, &p1, xv)?;
        let z2 = encode_on_tape(tape, &vars, &p2, xv)?;
        let z1 = tape.l2_normalize_rows(z1, NORM_EPS);
        let z2 = tape.l2_normalize_rows(z2, NORM_EPS);
        let b1 = tape.constant(m1.clone());
        let b2 = tape.constant(m2.clone());
        Ok(nce_loss_on_tape(tape, z1, z2, b1, b2, &table, 0.1, n)?.total)
    };
    // Random biases keep every output row away from the zero vector, where
    // row normalization is not differentiable.
    let nw = params.weights().len();
    let inputs: Vec<Matrix<f64>> = params
        .tensors()
        .enumerate()
        .map(|(i, t)| if i < nw { t.cast() } else { random_matrix(&mut rng, t.rows(), t.cols()) })
        .collect();
    grad_check(f, &inputs, h, tol).unwrap()
}
