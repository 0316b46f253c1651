//! Finite-difference check of a two-layer GCN followed by row normalization
//! and the NCE loss, all in f64.

use cgnn::autodiff::{grad_check, Matrix, Tape, Var};
use cgnn::contrastive::{nce_loss_on_tape, sample_negative_table};
use cgnn::encoder::{encode_on_tape, Arch, Dims, EncoderParams, ParamVars, Propagation};
use cgnn::graph::{drop_edges, Graph};
use cgnn::rng::{stream_rng, Stream};

fn main() -> cgnn::Result<()> {
    let g = Graph::from_edges(6, [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (2, 3)])?;
    let v1 = drop_edges(&g, 0.3, &mut stream_rng(0, Stream::DropEdge, &[0, 0]))?;
    let v2 = drop_edges(&g, 0.3, &mut stream_rng(0, Stream::DropEdge, &[0, 1]))?;
    let p1 = Propagation::<f64>::for_view(Arch::Gcn, &v1);
    let p2 = Propagation::<f64>::for_view(Arch::Gcn, &v2);

    let params = EncoderParams::init(Arch::Gcn, Dims::new(4, 5, 3), 9)?;
    let x: Matrix<f64> = Matrix::from_vec(6, 4, (0..24).map(|i| ((i * 7 % 11) as f64 - 5.0) / 5.0).collect())?;
    let bank = Matrix::<f64>::from_vec(6, 3, (0..18).map(|i| (i as f64).sin()).collect())?.l2_normalized_rows(1e-12);
    let negatives = sample_negative_table(6, 2, 0, 0)?;

    let loss = |tape: &mut Tape<f64>, inputs: &[Var]| {
        let vars = ParamVars::from_slice(Arch::Gcn, inputs);
        let xv = tape.constant(x.clone());
        let z1 = encode_on_tape(tape, &vars, &p1, xv)?;
        let z2 = encode_on_tape(tape, &vars, &p2, xv)?;
        let z1 = tape.l2_normalize_rows(z1, 1e-12);
        let z2 = tape.l2_normalize_rows(z2, 1e-12);
        let m = tape.constant(bank.clone());
        Ok(nce_loss_on_tape(tape, z1, z2, m, m, &negatives, 0.5, 6)?.total)
    };
    let inputs: Vec<Matrix<f64>> = params.tensors().map(|t| t.cast()).collect();
    let report = grad_check(loss, &inputs, 1e-5, 1e-3)?;
    println!(
        "checked {} coordinates ({} skipped at ReLU kinks), max rel error {:.2e}, passed {}",
        report.checked, report.skipped_kinks, report.max_rel_error, report.passed
    );
    Ok(())
}
