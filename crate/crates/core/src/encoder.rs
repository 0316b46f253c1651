//! Two-layer GNN encoders (GCN and mean-aggregating GraphSAGE).
//!
//! Layer 1 is followed by ReLU; layer 2 is linear. Outputs are not
//! normalized here; the contrastive losses normalize rows themselves.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Matrix, Scalar, SparseMatrix, Tape, Var};
use crate::error::{Error, Result};
use crate::graph::View;
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Gcn,
    Sage,
}

impl Arch {
    pub fn tag(self) -> u8 {
        match self {
            Arch::Gcn => 0,
            Arch::Sage => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Arch::Gcn),
            1 => Some(Arch::Sage),
            _ => None,
        }
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arch::Gcn => "gcn",
            Arch::Sage => "sage",
        })
    }
}

impl FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gcn" => Ok(Arch::Gcn),
            "sage" | "sage_mean" | "graphsage" => Ok(Arch::Sage),
            _ => Err(Error::arg(format!("unknown architecture {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
}

impl Dims {
    pub const DEFAULT_HIDDEN: usize = 128;

    pub fn new(input: usize, hidden: usize, output: usize) -> Self {
        Self {
            input,
            hidden,
            output,
        }
    }

    /// `input → 128 → 128`.
    pub fn with_input(input: usize) -> Self {
        Self::new(input, Self::DEFAULT_HIDDEN, Self::DEFAULT_HIDDEN)
    }
}

/// Expected `(rows, cols)` of every weight then every bias.
pub(crate) fn layout(arch: Arch, d: Dims) -> (Vec<(usize, usize)>, Vec<(usize, usize)>) {
    let weights = match arch {
        Arch::Gcn => vec![(d.input, d.hidden), (d.hidden, d.output)],
        Arch::Sage => vec![
            (d.input, d.hidden),
            (d.input, d.hidden),
            (d.hidden, d.output),
            (d.hidden, d.output),
        ],
    };
    (weights, vec![(1, d.hidden), (1, d.output)])
}

/// Encoder weights. For GCN the weights are `[W₁, W₂]`; for SAGE they are
/// `[W_self₁, W_neigh₁, W_self₂, W_neigh₂]`. Biases are `[b₁, b₂]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    arch: Arch,
    dims: Dims,
    weights: Vec<Matrix<f32>>,
    biases: Vec<Matrix<f32>>,
}

impl EncoderParams {
    /// Glorot-uniform weights, zero biases.
    pub fn init(arch: Arch, dims: Dims, seed: u64) -> Result<Self> {
        if dims.input == 0 || dims.hidden == 0 || dims.output == 0 {
            return Err(Error::arg(format!("encoder dims must be positive: {dims:?}")));
        }
        let (wl, bl) = layout(arch, dims);
        let weights = wl
            .iter()
            .enumerate()
            .map(|(i, &(r, c))| {
                let limit = (6.0 / (r + c) as f64).sqrt();
                let mut rng = stream_rng(seed, Stream::Init, &[i as u64]);
                let data = (0..r * c)
                    .map(|_| rng.random_range(-limit..limit) as f32)
                    .collect();
                Matrix::from_vec(r, c, data).expect("layout")
            })
            .collect();
        let biases = bl.iter().map(|&(r, c)| Matrix::zeros(r, c)).collect();
        Ok(Self {
            arch,
            dims,
            weights,
            biases,
        })
    }

    /// Assembles params from explicit tensors, checking the layout.
    pub fn from_parts(
        arch: Arch,
        dims: Dims,
        weights: Vec<Matrix<f32>>,
        biases: Vec<Matrix<f32>>,
    ) -> Result<Self> {
        let (wl, bl) = layout(arch, dims);
        let shapes_ok = weights.len() == wl.len()
            && biases.len() == bl.len()
            && weights.iter().zip(&wl).all(|(m, &s)| m.shape() == s)
            && biases.iter().zip(&bl).all(|(m, &s)| m.shape() == s);
        if !shapes_ok {
            return Err(Error::shape("encoder params", format!("tensors do not match {arch} {dims:?}")));
        }
        Ok(Self {
            arch,
            dims,
            weights,
            biases,
        })
    }

    pub fn arch(&self) -> Arch {
        self.arch
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn weights(&self) -> &[Matrix<f32>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Matrix<f32>] {
        &self.biases
    }

    /// Weights then biases.
    pub fn tensors(&self) -> impl Iterator<Item = &Matrix<f32>> {
        self.weights.iter().chain(&self.biases)
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Matrix<f32>> {
        self.weights.iter_mut().chain(&mut self.biases)
    }

    pub fn num_tensors(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    /// Records the parameters as tape leaves (trainable or constant).
    pub fn register<T: Scalar>(&self, tape: &mut Tape<T>, trainable: bool) -> ParamVars {
        let mut leaf = |m: &Matrix<f32>| {
            let m = m.cast::<T>();
            if trainable {
                tape.param(m)
            } else {
                tape.constant(m)
            }
        };
        ParamVars {
            weights: self.weights.iter().map(&mut leaf).collect(),
            biases: self.biases.iter().map(&mut leaf).collect(),
        }
    }
}

/// Tape handles of registered encoder parameters, in `tensors()` order.
#[derive(Debug, Clone)]
pub struct ParamVars {
    pub weights: Vec<Var>,
    pub biases: Vec<Var>,
}

impl ParamVars {
    pub fn all(&self) -> impl Iterator<Item = Var> + '_ {
        self.weights.iter().chain(&self.biases).copied()
    }

    /// Builds params of the same architecture from raw variables, as used by
    /// gradient checks that treat every tensor as an independent input.
    pub fn from_slice(arch: Arch, vars: &[Var]) -> Self {
        let nw = match arch {
            Arch::Gcn => 2,
            Arch::Sage => 4,
        };
        Self {
            weights: vars[..nw].to_vec(),
            biases: vars[nw..nw + 2].to_vec(),
        }
    }
}

/// Sparse propagation operator derived from one view.
#[derive(Debug, Clone)]
pub enum Propagation<T> {
    /// Symmetric-normalized adjacency with self-loops.
    Gcn(Arc<SparseMatrix<T>>),
    /// Mean over post-drop neighbours.
    Sage(Arc<SparseMatrix<T>>),
}

impl<T: Scalar> Propagation<T> {
    pub fn for_view(arch: Arch, view: &View) -> Self {
        match arch {
            Arch::Gcn => Propagation::Gcn(Arc::new(view.adjacency())),
            Arch::Sage => Propagation::Sage(Arc::new(view.mean_aggregator())),
        }
    }

    fn arch(&self) -> Arch {
        match self {
            Propagation::Gcn(_) => Arch::Gcn,
            Propagation::Sage(_) => Arch::Sage,
        }
    }
}

/// Records the encoder forward pass on `tape` and returns the N×out output.
pub fn encode_on_tape<T: Scalar>(
    tape: &mut Tape<T>,
    vars: &ParamVars,
    prop: &Propagation<T>,
    features: Var,
) -> Result<Var> {
    match prop {
        Propagation::Gcn(adj) => {
            let xw = tape.matmul(features, vars.weights[0])?;
            let h = tape.spmm(adj.clone(), xw)?;
            let h = tape.add_row_bias(h, vars.biases[0])?;
            let h = tape.relu(h);
            let hw = tape.matmul(h, vars.weights[1])?;
            let z = tape.spmm(adj.clone(), hw)?;
            tape.add_row_bias(z, vars.biases[1])
        }
        Propagation::Sage(agg) => {
            let layer = |tape: &mut Tape<T>, x: Var, w_self: Var, w_neigh: Var, b: Var| -> Result<Var> {
                let own = tape.matmul(x, w_self)?;
                let mean = tape.spmm(agg.clone(), x)?;
                let neigh = tape.matmul(mean, w_neigh)?;
                let sum = tape.add(own, neigh)?;
                tape.add_row_bias(sum, b)
            };
            let h = layer(tape, features, vars.weights[0], vars.weights[1], vars.biases[0])?;
            let h = tape.relu(h);
            layer(tape, h, vars.weights[2], vars.weights[3], vars.biases[1])
        }
    }
}

fn check_inputs(params: &EncoderParams, view: &View, features: &Matrix<f32>) -> Result<()> {
    if features.cols() != params.dims.input {
        return Err(Error::shape(
            "encode",
            format!("{} feature columns, encoder expects {}", features.cols(), params.dims.input),
        ));
    }
    if features.rows() != view.num_nodes() {
        return Err(Error::shape(
            "encode",
            format!("{} feature rows for {} nodes", features.rows(), view.num_nodes()),
        ));
    }
    Ok(())
}

/// Gradient-free forward pass: raw (unnormalized) N×out embeddings.
pub fn encode(params: &EncoderParams, view: &View, features: &Matrix<f32>) -> Result<Matrix<f32>> {
    check_inputs(params, view, features)?;
    let mut tape = Tape::<f32>::new();
    let vars = params.register(&mut tape, false);
    let x = tape.constant(features.clone());
    let prop = Propagation::for_view(params.arch, view);
    debug_assert_eq!(prop.arch(), params.arch);
    let z = encode_on_tape(&mut tape, &vars, &prop, x)?;
    Ok(tape.value(z).clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{drop_edges, full_view, Graph};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn init_is_deterministic_and_bounded() {
        let dims = Dims::new(500, 128, 128);
        let a = EncoderParams::init(Arch::Gcn, dims, 3).unwrap();
        assert_eq!(a, EncoderParams::init(Arch::Gcn, dims, 3).unwrap());
        assert_ne!(a, EncoderParams::init(Arch::Gcn, dims, 4).unwrap());
        let limit = (6.0f64 / 628.0).sqrt() as f32;
        assert!(a.weights()[0].as_slice().iter().all(|v| v.abs() <= limit));
        assert!(a.biases().iter().all(|b| b.as_slice().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn init_mean_within_uniform_band() {
        // Uniform(-a, a) has σ = a/√3; the sample mean of n entries has σ/√n.
        let dims = Dims::new(500, 128, 128);
        let p = EncoderParams::init(Arch::Gcn, dims, 11).unwrap();
        let w = &p.weights()[0];
        let n = w.len() as f64;
        let a = (6.0f64 / 628.0).sqrt();
        let sigma = a / 3f64.sqrt();
        let mean = w.as_slice().iter().map(|&v| v as f64).sum::<f64>() / n;
        assert!(mean.abs() < 3.0 * sigma / n.sqrt(), "mean {mean}");
    }

    #[test]
    fn sage_layout_has_four_weights() {
        let p = EncoderParams::init(Arch::Sage, Dims::new(5, 4, 3), 0).unwrap();
        let shapes: Vec<_> = p.weights().iter().map(Matrix::shape).collect();
        assert_eq!(shapes, vec![(5, 4), (5, 4), (4, 3), (4, 3)]);
    }

    /// One isolated node: Â = [1], so z = relu(x W₁ + b₁) W₂ + b₂.
    #[test]
    fn gcn_single_node_closed_form() {
        let dims = Dims::new(2, 2, 2);
        let w1 = Matrix::from_rows(&[vec![1.0f32, 0.0], vec![0.0, 1.0]]);
        let w2 = Matrix::from_rows(&[vec![2.0f32, -1.0], vec![0.5, 3.0]]);
        let b1 = Matrix::from_rows(&[vec![0.0f32, 0.0]]);
        let b2 = Matrix::from_rows(&[vec![0.0f32, 0.0]]);
        let p = EncoderParams::from_parts(Arch::Gcn, dims, vec![w1, w2], vec![b1, b2]).unwrap();
        let view = full_view(&Graph::from_edges(1, []).unwrap());
        let x = Matrix::from_rows(&[vec![1.5f32, -2.0]]);
        let z = encode(&p, &view, &x).unwrap();
        // relu([1.5, -2]) = [1.5, 0]; [1.5, 0]·W₂ = [3.0, -1.5]
        assert_eq!(z.as_slice(), &[3.0, -1.5]);
    }

    #[test]
    fn sage_isolated_node_uses_only_self_weights() {
        let dims = Dims::new(1, 1, 1);
        let one = || Matrix::from_rows(&[vec![1.0f32]]);
        let big = || Matrix::from_rows(&[vec![100.0f32]]);
        let zero = || Matrix::from_rows(&[vec![0.0f32]]);
        let p = EncoderParams::from_parts(
            Arch::Sage,
            dims,
            vec![one(), big(), one(), big()],
            vec![zero(), zero()],
        )
        .unwrap();
        let view = full_view(&Graph::from_edges(1, []).unwrap());
        let z = encode(&p, &view, &Matrix::from_rows(&[vec![2.0f32]])).unwrap();
        assert_eq!(z.as_slice(), &[2.0]);
    }

    #[test]
    fn feature_width_mismatch_is_error() {
        let p = EncoderParams::init(Arch::Gcn, Dims::new(3, 4, 4), 0).unwrap();
        let view = full_view(&Graph::from_edges(2, [(0, 1)]).unwrap());
        assert!(matches!(
            encode(&p, &view, &Matrix::zeros(2, 5)),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn twin_zero_ratio_views_encode_identically() {
        let g = Graph::from_edges(5, [(0, 1), (1, 2), (3, 4)]).unwrap();
        let p = EncoderParams::init(Arch::Gcn, Dims::new(3, 8, 8), 1).unwrap();
        let x = Matrix::from_vec(5, 3, (0..15).map(|v| v as f32 * 0.1).collect()).unwrap();
        let v1 = drop_edges(&g, 0.0, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let v2 = drop_edges(&g, 0.0, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(encode(&p, &v1, &x).unwrap(), encode(&p, &v2, &x).unwrap());
    }
}
