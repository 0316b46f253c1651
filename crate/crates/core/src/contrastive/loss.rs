use crate::autodiff::{Matrix, Scalar, Tape, Var};
use crate::error::{Error, Result};

use super::{EmbeddingBank, NegativeTable};

/// One direction of a symmetric contrastive loss.
#[derive(Debug, Clone, Copy)]
pub struct DirectionTerms {
    /// Scalar loss of this direction.
    pub loss: Var,
    /// Scalar contribution of the positive pairs alone.
    pub positive: Var,
    /// N×1 positive logits `z_iᵀz'_i / τ`.
    pub positive_logits: Var,
    /// N×K negative logits, row `i` aligned with the anchor's negative table.
    pub negative_logits: Var,
}

#[derive(Debug, Clone, Copy)]
pub struct NceTerms {
    pub total: Var,
    pub first: DirectionTerms,
    pub second: DirectionTerms,
}

/// Loss values pulled off the tape or computed directly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub l1: f64,
    pub l2: f64,
    pub positive1: f64,
    pub positive2: f64,
}

impl LossParts {
    pub fn total(&self) -> f64 {
        self.l1 + self.l2
    }

    /// Symmetric average `(L1 + L2) / 2`.
    pub fn mean(&self) -> f64 {
        0.5 * (self.l1 + self.l2)
    }
}

fn check_table(table: &NegativeTable, n: usize, op: &'static str) -> Result<()> {
    if table.num_anchors() != n {
        return Err(Error::shape(
            op,
            format!("negative table covers {} anchors, embeddings have {n}", table.num_anchors()),
        ));
    }
    if table.k() == 0 || table.k() >= n {
        return Err(Error::arg(format!("sampling size K={} must satisfy 1 <= K <= N-1 (N={n})", table.k())));
    }
    Ok(())
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::arg(format!("temperature must be positive, got {tau}")));
    }
    Ok(())
}

fn nce_direction<T: Scalar>(
    tape: &mut Tape<T>,
    anchor: Var,
    positive: Var,
    bank: Var,
    table: &NegativeTable,
    tau: f64,
    c: f64,
) -> Result<DirectionTerms> {
    let inv_tau = T::from_f64(1.0 / tau);
    let k = table.k();
    let n = tape.value(anchor).rows();

    let dot = tape.row_dot(anchor, positive)?;
    let s_pos = tape.scale(dot, inv_tau);
    let lae_pos = tape.log_add_exp_const(s_pos, T::from_f64(c));
    let log_p = tape.sub(s_pos, lae_pos)?;
    let mean_log_p = tape.mean(log_p);
    let positive_term = tape.scale(mean_log_p, T::from_f64(-1.0));

    // −log(1 − p_j) = ln(e^{s_j} + c) − ln c
    let neg_dot = tape.gather_dot(anchor, bank, table.flat(), k)?;
    let s_neg = tape.scale(neg_dot, inv_tau);
    let lae_neg = tape.log_add_exp_const(s_neg, T::from_f64(c));
    let neg_sum = tape.sum(lae_neg);
    let neg_mean = tape.scale(neg_sum, T::from_f64(1.0 / n as f64));
    let neg_term = tape.add_scalar(neg_mean, T::from_f64(-(k as f64) * c.ln()));

    let loss = tape.add(positive_term, neg_term)?;
    Ok(DirectionTerms {
        loss,
        positive: positive_term,
        positive_logits: s_pos,
        negative_logits: s_neg,
    })
}

/// NCE loss for both directions. Positives are the live paired rows,
/// negatives come from the (constant) bank of the opposite view, and the
/// noise ratio is `K / num_nodes`. Both directions share `table`.
#[allow(clippy::too_many_arguments)]
pub fn nce_loss_on_tape<T: Scalar>(
    tape: &mut Tape<T>,
    z1: Var,
    z2: Var,
    bank1: Var,
    bank2: Var,
    table: &NegativeTable,
    tau: f64,
    num_nodes: usize,
) -> Result<NceTerms> {
    check_tau(tau)?;
    let n = tape.value(z1).rows();
    if tape.value(z2).shape() != tape.value(z1).shape() {
        return Err(Error::shape(
            "nce_loss",
            format!("{:?} vs {:?}", tape.value(z1).shape(), tape.value(z2).shape()),
        ));
    }
    if table.num_anchors() != n {
        return Err(Error::shape(
            "nce_loss",
            format!("negative table covers {} anchors, embeddings have {n}", table.num_anchors()),
        ));
    }
    if table.k() == 0 || table.k() >= num_nodes {
        return Err(Error::arg(format!(
            "sampling size K={} must satisfy 1 <= K <= N-1 (N={num_nodes})",
            table.k()
        )));
    }
    let c = table.k() as f64 / num_nodes as f64;
    let first = nce_direction(tape, z1, z2, bank2, table, tau, c)?;
    let second = nce_direction(tape, z2, z1, bank1, table, tau, c)?;
    let total = tape.add(first.loss, second.loss)?;
    Ok(NceTerms { total, first, second })
}

fn softmax_direction<T: Scalar>(
    tape: &mut Tape<T>,
    anchor: Var,
    other: Var,
    idx: &std::sync::Arc<[usize]>,
    k: usize,
    tau: f64,
) -> Result<DirectionTerms> {
    let inv_tau = T::from_f64(1.0 / tau);
    let all = tape.gather_dot(anchor, other, idx.clone(), k + 1)?;
    let s_all = tape.scale(all, inv_tau);
    let lse = tape.log_sum_exp_rows(s_all);
    let lse_mean = tape.mean(lse);
    let dot = tape.row_dot(anchor, other)?;
    let s_pos = tape.scale(dot, inv_tau);
    let pos_mean = tape.mean(s_pos);
    let loss = tape.sub(lse_mean, pos_mean)?;
    let positive = tape.scale(pos_mean, T::from_f64(-1.0));
    Ok(DirectionTerms {
        loss,
        positive,
        positive_logits: s_pos,
        negative_logits: s_all,
    })
}

/// Symmetric softmax contrastive loss with `K` sampled negatives per anchor.
/// Returns `(L1 + L2, first, second)`.
pub fn softmax_contrastive_loss_on_tape<T: Scalar>(
    tape: &mut Tape<T>,
    z1: Var,
    z2: Var,
    table: &NegativeTable,
    tau: f64,
) -> Result<NceTerms> {
    check_tau(tau)?;
    let n = tape.value(z1).rows();
    if tape.value(z2).shape() != tape.value(z1).shape() {
        return Err(Error::shape(
            "softmax_contrastive_loss",
            format!("{:?} vs {:?}", tape.value(z1).shape(), tape.value(z2).shape()),
        ));
    }
    check_table(table, n, "softmax_contrastive_loss")?;
    let idx = table.with_positive_first();
    let first = softmax_direction(tape, z1, z2, &idx, table.k(), tau)?;
    let second = softmax_direction(tape, z2, z1, &idx, table.k(), tau)?;
    let total = tape.add(first.loss, second.loss)?;
    Ok(NceTerms { total, first, second })
}

fn parts(tape: &Tape<f64>, terms: &NceTerms) -> LossParts {
    LossParts {
        l1: tape.value(terms.first.loss).item(),
        l2: tape.value(terms.second.loss).item(),
        positive1: tape.value(terms.first.positive).item(),
        positive2: tape.value(terms.second.positive).item(),
    }
}

/// Softmax contrastive loss evaluated in f64 on unit-norm embeddings.
pub fn softmax_contrastive_loss(
    z1: &Matrix<f32>,
    z2: &Matrix<f32>,
    table: &NegativeTable,
    tau: f64,
) -> Result<LossParts> {
    let mut tape = Tape::<f64>::new();
    let a = tape.constant(z1.cast());
    let b = tape.constant(z2.cast());
    let terms = softmax_contrastive_loss_on_tape(&mut tape, a, b, table, tau)?;
    Ok(parts(&tape, &terms))
}

/// NCE loss evaluated in f64 against an initialized bank. The anchors are
/// the rows of `z1`/`z2`; the noise distribution is uniform over the bank rows.
pub fn nce_loss(
    z1: &Matrix<f32>,
    z2: &Matrix<f32>,
    bank: &EmbeddingBank,
    table: &NegativeTable,
    tau: f64,
) -> Result<LossParts> {
    if !bank.is_initialized() {
        return Err(Error::State("embedding bank used before initialization".into()));
    }
    if bank.view1().cols() != z1.cols() {
        return Err(Error::shape(
            "nce_loss",
            format!("bank {:?}, embeddings {:?}", bank.view1().shape(), z1.shape()),
        ));
    }
    let mut tape = Tape::<f64>::new();
    let a = tape.constant(z1.cast());
    let b = tape.constant(z2.cast());
    let m1 = tape.constant(bank.view1().cast());
    let m2 = tape.constant(bank.view2().cast());
    let terms = nce_loss_on_tape(&mut tape, a, b, m1, m2, table, tau, bank.view1().rows())?;
    Ok(parts(&tape, &terms))
}

/// Softmax loss of one direction rebuilt from already computed logits:
/// `mean_i [ LSE(s_i0, s_i1..s_iK) − s_i0 ]`, evaluated in f64.
pub fn softmax_loss_from_logits<T: Scalar>(positive: &Matrix<T>, negative: &Matrix<T>) -> Result<f64> {
    if positive.cols() != 1 || positive.rows() != negative.rows() {
        return Err(Error::shape(
            "softmax_loss_from_logits",
            format!("{:?} vs {:?}", positive.shape(), negative.shape()),
        ));
    }
    let n = positive.rows();
    if n == 0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for i in 0..n {
        let s0 = Scalar::to_f64(positive.get(i, 0));
        let row = negative.row(i);
        let max = row.iter().map(|&v| Scalar::to_f64(v)).fold(s0, f64::max);
        let sum: f64 = (s0 - max).exp() + row.iter().map(|&v| (Scalar::to_f64(v) - max).exp()).sum::<f64>();
        total += max + sum.ln() - s0;
    }
    Ok(total / n as f64)
}
