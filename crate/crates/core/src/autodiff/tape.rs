use std::sync::Arc;

use super::exec::Exec;
use super::matrix::{dot, matmul_nn, matmul_nt, matmul_tn, row_norm};
use super::{Matrix, Scalar, SparseMatrix};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    SpMM(Arc<SparseMatrix<T>>, Var),
    AddRowBias(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddScalar(Var),
    Scale(Var, T),
    Relu(Var),
    Exp(Var),
    Log(Var),
    LogAddExpConst(Var, T),
    L2NormalizeRows(Var, T),
    GatherRows(Var, Arc<[usize]>),
    RowDot(Var, Var),
    GatherDot {
        a: Var,
        b: Var,
        idx: Arc<[usize]>,
        k: usize,
    },
    Sum(Var),
    Mean(Var),
    SumRows(Var),
    LogSumExpRows(Var),
}

#[derive(Debug)]
struct Node<T> {
    value: Matrix<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Reverse-mode recording of one forward computation.
///
/// Nodes are appended in evaluation order, so the node list is always a
/// topological order and [`Tape::backward`] simply walks it in reverse.
#[derive(Debug, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    exec: Exec,
    kink_signs: Option<Vec<bool>>,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Matrix<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient of the loss with respect to `v`; `None` when `v` does not
    /// require gradients or does not influence the loss.
    pub fn get(&self, v: Var) -> Option<&Matrix<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Matrix<T>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

fn same_shape<T: Scalar>(op: &'static str, a: &Matrix<T>, b: &Matrix<T>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(op, format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

#[inline]
fn sigmoid<T: Scalar>(t: T) -> T {
    if t >= T::zero() {
        T::one() / (T::one() + (-t).exp())
    } else {
        let e = t.exp();
        e / (T::one() + e)
    }
}

#[inline]
fn log_add_exp_const<T: Scalar>(x: T, log_c: T) -> T {
    let m = x.max(log_c);
    m + ((x - m).exp() + (log_c - m).exp()).ln()
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self::with_exec(Exec::Sequential)
    }

    pub fn with_exec(exec: Exec) -> Self {
        Self {
            nodes: Vec::new(),
            exec,
            kink_signs: None,
        }
    }

    /// Records the sign of every ReLU input so callers can detect whether
    /// two evaluations crossed a kink.
    pub fn track_kinks(&mut self) {
        self.kink_signs = Some(Vec::new());
    }

    pub fn kink_signature(&self) -> Option<&[bool]> {
        self.kink_signs.as_deref()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix<T> {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Matrix<T>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Matrix<T>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Matrix<T>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.cols() != vb.rows() {
            return Err(Error::shape(
                "matmul",
                format!("{:?} x {:?}", va.shape(), vb.shape()),
            ));
        }
        let out = matmul_nn(va, vb, &self.exec);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::MatMul(a, b), rg))
    }

    pub fn spmm(&mut self, s: Arc<SparseMatrix<T>>, x: Var) -> Result<Var> {
        let vx = self.value(x);
        if s.dim() != vx.rows() {
            return Err(Error::shape(
                "spmm",
                format!("operator {0}x{0} vs input {1:?}", s.dim(), vx.shape()),
            ));
        }
        let out = s.mul_dense(vx, &self.exec);
        let rg = self.rg(x);
        Ok(self.push(out, Op::SpMM(s, x), rg))
    }

    /// `x + 1·b` with `b` a 1×d row.
    pub fn add_row_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let (vx, vb) = (self.value(x), self.value(b));
        if vb.rows() != 1 || vb.cols() != vx.cols() {
            return Err(Error::shape(
                "add_row_bias",
                format!("{:?} + {:?}", vx.shape(), vb.shape()),
            ));
        }
        let mut out = vx.clone();
        let bias = vb.row(0).to_vec();
        for r in 0..out.rows() {
            for (o, &bv) in out.row_mut(r).iter_mut().zip(&bias) {
                *o += bv;
            }
        }
        let rg = self.rg(x) || self.rg(b);
        Ok(self.push(out, Op::AddRowBias(x, b), rg))
    }

    fn zip_with(&mut self, op: &'static str, a: Var, b: Var, f: impl Fn(T, T) -> T) -> Result<Matrix<T>> {
        let (va, vb) = (self.value(a), self.value(b));
        same_shape(op, va, vb)?;
        let data = va
            .as_slice()
            .iter()
            .zip(vb.as_slice())
            .map(|(&x, &y)| f(x, y))
            .collect();
        Matrix::from_vec(va.rows(), va.cols(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_with("add", a, b, |x, y| x + y)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_with("sub", a, b, |x, y| x - y)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Sub(a, b), rg))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_with("mul", a, b, |x, y| x * y)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Mul(a, b), rg))
    }

    pub fn add_scalar(&mut self, x: Var, c: T) -> Var {
        let out = self.value(x).map(|v| v + c);
        let rg = self.rg(x);
        self.push(out, Op::AddScalar(x), rg)
    }

    pub fn scale(&mut self, x: Var, c: T) -> Var {
        let out = self.value(x).map(|v| v * c);
        let rg = self.rg(x);
        self.push(out, Op::Scale(x, c), rg)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let vx = self.value(x);
        let out = vx.map(|v| if v > T::zero() { v } else { T::zero() });
        if let Some(signs) = self.kink_signs.as_mut() {
            signs.extend(self.nodes[x.0].value.as_slice().iter().map(|&v| v > T::zero()));
        }
        let rg = self.rg(x);
        self.push(out, Op::Relu(x), rg)
    }

    pub fn exp(&mut self, x: Var) -> Var {
        let out = self.value(x).map(T::exp);
        let rg = self.rg(x);
        self.push(out, Op::Exp(x), rg)
    }

    pub fn ln(&mut self, x: Var) -> Var {
        let out = self.value(x).map(T::ln);
        let rg = self.rg(x);
        self.push(out, Op::Log(x), rg)
    }

    /// `ln(exp(x) + c)` elementwise, evaluated without overflow. Requires `c > 0`.
    pub fn log_add_exp_const(&mut self, x: Var, c: T) -> Var {
        let log_c = c.ln();
        let out = self.value(x).map(|v| log_add_exp_const(v, log_c));
        let rg = self.rg(x);
        self.push(out, Op::LogAddExpConst(x, log_c), rg)
    }

    /// Row `i` ↦ `x_i / max(‖x_i‖₂, eps)`.
    pub fn l2_normalize_rows(&mut self, x: Var, eps: T) -> Var {
        let out = self.value(x).l2_normalized_rows(eps);
        let rg = self.rg(x);
        self.push(out, Op::L2NormalizeRows(x, eps), rg)
    }

    pub fn gather_rows(&mut self, x: Var, idx: Arc<[usize]>) -> Result<Var> {
        let vx = self.value(x);
        if let Some(&bad) = idx.iter().find(|&&i| i >= vx.rows()) {
            return Err(Error::Range {
                what: "gather row",
                index: bad,
                limit: vx.rows(),
            });
        }
        let out = vx.select_rows(&idx);
        let rg = self.rg(x);
        Ok(self.push(out, Op::GatherRows(x, idx), rg))
    }

    /// `out[i] = a_i · b_i`, an N×1 column.
    pub fn row_dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        same_shape("row_dot", va, vb)?;
        let data = (0..va.rows()).map(|i| dot(va.row(i), vb.row(i))).collect();
        let out = Matrix::from_vec(va.rows(), 1, data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::RowDot(a, b), rg))
    }

    /// `out[i][c] = a_i · b_{idx[i·k + c]}`, an N×k matrix of scores between
    /// each row of `a` and `k` selected rows of `b`.
    pub fn gather_dot(&mut self, a: Var, b: Var, idx: Arc<[usize]>, k: usize) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.cols() != vb.cols() || idx.len() != va.rows() * k {
            return Err(Error::shape(
                "gather_dot",
                format!(
                    "{:?} against {:?} with {} indices for k={k}",
                    va.shape(),
                    vb.shape(),
                    idx.len()
                ),
            ));
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= vb.rows()) {
            return Err(Error::Range {
                what: "gather_dot row",
                index: bad,
                limit: vb.rows(),
            });
        }
        let mut out = Matrix::zeros(va.rows(), k);
        if k > 0 {
            self.exec.for_row_chunks(out.as_mut_slice(), k, |r0, chunk| {
                for (local, orow) in chunk.chunks_mut(k).enumerate() {
                    let i = r0 + local;
                    let arow = va.row(i);
                    for (c, o) in orow.iter_mut().enumerate() {
                        *o = dot(arow, vb.row(idx[i * k + c]));
                    }
                }
            });
        }
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::GatherDot { a, b, idx, k }, rg))
    }

    /// Sum of all entries, as a 1×1.
    pub fn sum(&mut self, x: Var) -> Var {
        let out = Matrix::scalar(self.value(x).sum());
        let rg = self.rg(x);
        self.push(out, Op::Sum(x), rg)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let vx = self.value(x);
        let n = T::from_f64(vx.len() as f64);
        let out = Matrix::scalar(vx.sum() / n);
        let rg = self.rg(x);
        self.push(out, Op::Mean(x), rg)
    }

    /// Per-row sums, as an N×1 column.
    pub fn sum_rows(&mut self, x: Var) -> Var {
        let vx = self.value(x);
        let data = (0..vx.rows()).map(|i| vx.row(i).iter().copied().sum()).collect();
        let out = Matrix::from_vec(vx.rows(), 1, data).expect("shape");
        let rg = self.rg(x);
        self.push(out, Op::SumRows(x), rg)
    }

    /// Per-row `ln Σ_j exp(x_ij)`, max-shifted.
    pub fn log_sum_exp_rows(&mut self, x: Var) -> Var {
        let vx = self.value(x);
        let data = (0..vx.rows())
            .map(|i| {
                let row = vx.row(i);
                let m = row.iter().copied().fold(T::neg_infinity(), T::max);
                let s: T = row.iter().map(|&v| (v - m).exp()).sum();
                m + s.ln()
            })
            .collect();
        let out = Matrix::from_vec(vx.rows(), 1, data).expect("shape");
        let rg = self.rg(x);
        self.push(out, Op::LogSumExpRows(x), rg)
    }

    /// Reverse pass from a 1×1 `loss`; visits nodes in exact reverse order.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        let lv = self.value(loss);
        if lv.shape() != (1, 1) {
            return Err(Error::shape("backward", format!("loss has shape {:?}", lv.shape())));
        }
        let mut grads: Vec<Option<Matrix<T>>> = Vec::with_capacity(loss.0 + 1);
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(Matrix::scalar(T::one()));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.backprop_node(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn backprop_node(&self, node: &Node<T>, g: &Matrix<T>, grads: &mut [Option<Matrix<T>>]) {
        let acc = |v: Var, delta: Matrix<T>, grads: &mut [Option<Matrix<T>>]| {
            if !self.rg(v) {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => {
                    for (e, d) in existing.as_mut_slice().iter_mut().zip(delta.as_slice()) {
                        *e += *d;
                    }
                }
                slot @ None => *slot = Some(delta),
            }
        };
        let val = |v: Var| &self.nodes[v.0].value;

        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.rg(*a) {
                    acc(*a, matmul_nt(g, val(*b), &self.exec), grads);
                }
                if self.rg(*b) {
                    acc(*b, matmul_tn(val(*a), g, &self.exec), grads);
                }
            }
            Op::SpMM(s, x) => acc(*x, s.mul_dense_transposed(g), grads),
            Op::AddRowBias(x, b) => {
                if self.rg(*b) {
                    let mut db = Matrix::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (o, &gv) in db.row_mut(0).iter_mut().zip(g.row(r)) {
                            *o += gv;
                        }
                    }
                    acc(*b, db, grads);
                }
                acc(*x, g.clone(), grads);
            }
            Op::Add(a, b) => {
                acc(*a, g.clone(), grads);
                acc(*b, g.clone(), grads);
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone(), grads);
                acc(*b, g.map(|v| -v), grads);
            }
            Op::Mul(a, b) => {
                let (va, vb) = (val(*a), val(*b));
                if self.rg(*a) {
                    acc(*a, zip(g, vb, |gv, y| gv * y), grads);
                }
                if self.rg(*b) {
                    acc(*b, zip(g, va, |gv, x| gv * x), grads);
                }
            }
            Op::AddScalar(x) => acc(*x, g.clone(), grads),
            Op::Scale(x, c) => {
                let c = *c;
                acc(*x, g.map(|v| v * c), grads)
            }
            Op::Relu(x) => acc(
                *x,
                zip(g, val(*x), |gv, xv| if xv > T::zero() { gv } else { T::zero() }),
                grads,
            ),
            Op::Exp(x) => acc(*x, zip(g, &node.value, |gv, y| gv * y), grads),
            Op::Log(x) => acc(*x, zip(g, val(*x), |gv, xv| gv / xv), grads),
            Op::LogAddExpConst(x, log_c) => {
                let log_c = *log_c;
                acc(*x, zip(g, val(*x), |gv, xv| gv * sigmoid(xv - log_c)), grads)
            }
            Op::L2NormalizeRows(x, eps) => {
                let vx = val(*x);
                let y = &node.value;
                let mut dx = Matrix::zeros(vx.rows(), vx.cols());
                for r in 0..vx.rows() {
                    let norm = row_norm(vx.row(r));
                    let grow = g.row(r);
                    let out = dx.row_mut(r);
                    if norm > *eps {
                        let yrow = y.row(r);
                        let proj = dot(yrow, grow);
                        for ((o, &gv), &yv) in out.iter_mut().zip(grow).zip(yrow) {
                            *o = (gv - yv * proj) / norm;
                        }
                    } else {
                        for (o, &gv) in out.iter_mut().zip(grow) {
                            *o = gv / *eps;
                        }
                    }
                }
                acc(*x, dx, grads)
            }
            Op::GatherRows(x, idx) => {
                let vx = val(*x);
                let mut dx = Matrix::zeros(vx.rows(), vx.cols());
                for (r, &src) in idx.iter().enumerate() {
                    for (o, &gv) in dx.row_mut(src).iter_mut().zip(g.row(r)) {
                        *o += gv;
                    }
                }
                acc(*x, dx, grads)
            }
            Op::RowDot(a, b) => {
                let (va, vb) = (val(*a), val(*b));
                let scale_rows = |m: &Matrix<T>| {
                    let mut out = m.clone();
                    for r in 0..out.rows() {
                        let gv = g.get(r, 0);
                        for o in out.row_mut(r) {
                            *o *= gv;
                        }
                    }
                    out
                };
                if self.rg(*a) {
                    acc(*a, scale_rows(vb), grads);
                }
                if self.rg(*b) {
                    acc(*b, scale_rows(va), grads);
                }
            }
            Op::GatherDot { a, b, idx, k } => {
                let (va, vb) = (val(*a), val(*b));
                let k = *k;
                if self.rg(*a) {
                    let mut da = Matrix::zeros(va.rows(), va.cols());
                    self.exec.for_row_chunks(da.as_mut_slice(), va.cols(), |r0, chunk| {
                        for (local, orow) in chunk.chunks_mut(va.cols().max(1)).enumerate() {
                            let i = r0 + local;
                            for c in 0..k {
                                let gv = g.get(i, c);
                                for (o, &bv) in orow.iter_mut().zip(vb.row(idx[i * k + c])) {
                                    *o += gv * bv;
                                }
                            }
                        }
                    });
                    acc(*a, da, grads);
                }
                if self.rg(*b) {
                    let mut db = Matrix::zeros(vb.rows(), vb.cols());
                    for i in 0..va.rows() {
                        let arow = va.row(i);
                        for c in 0..k {
                            let gv = g.get(i, c);
                            for (o, &av) in db.row_mut(idx[i * k + c]).iter_mut().zip(arow) {
                                *o += gv * av;
                            }
                        }
                    }
                    acc(*b, db, grads);
                }
            }
            Op::Sum(x) => {
                let vx = val(*x);
                acc(*x, Matrix::filled(vx.rows(), vx.cols(), g.item()), grads)
            }
            Op::Mean(x) => {
                let vx = val(*x);
                let n = T::from_f64(vx.len() as f64);
                acc(*x, Matrix::filled(vx.rows(), vx.cols(), g.item() / n), grads)
            }
            Op::SumRows(x) => {
                let vx = val(*x);
                let mut dx = Matrix::zeros(vx.rows(), vx.cols());
                for r in 0..vx.rows() {
                    let gv = g.get(r, 0);
                    dx.row_mut(r).iter_mut().for_each(|o| *o = gv);
                }
                acc(*x, dx, grads)
            }
            Op::LogSumExpRows(x) => {
                let vx = val(*x);
                let mut dx = Matrix::zeros(vx.rows(), vx.cols());
                for r in 0..vx.rows() {
                    let lse = node.value.get(r, 0);
                    let gv = g.get(r, 0);
                    for (o, &xv) in dx.row_mut(r).iter_mut().zip(vx.row(r)) {
                        *o = gv * (xv - lse).exp();
                    }
                }
                acc(*x, dx, grads)
            }
        }
    }
}

fn zip<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>, f: impl Fn(T, T) -> T) -> Matrix<T> {
    let data = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(&x, &y)| f(x, y))
        .collect();
    Matrix::from_vec(a.rows(), a.cols(), data).expect("shape")
}
