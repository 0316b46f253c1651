//! Undirected graphs in compressed-row form, edge-dropped views, and
//! symmetric adjacency normalization.

use rand::Rng;

use crate::autodiff::{Scalar, SparseMatrix};
use crate::error::{Error, Result};

/// Immutable undirected graph stored as sorted, symmetric adjacency rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    num_nodes: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    num_undirected_edges: usize,
}

impl Graph {
    /// Builds a graph from an edge list. Reverse directions are added,
    /// duplicates collapsed, and self-loops ignored.
    pub fn from_edges<I>(num_nodes: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); num_nodes];
        for (u, v) in edges {
            for x in [u, v] {
                if x >= num_nodes {
                    return Err(Error::Range {
                        what: "node",
                        index: x,
                        limit: num_nodes,
                    });
                }
            }
            if u != v {
                adj[u].push(v);
                adj[v].push(u);
            }
        }
        Ok(Self::from_adjacency(adj))
    }

    fn from_adjacency(mut adj: Vec<Vec<usize>>) -> Self {
        let num_nodes = adj.len();
        let mut row_offsets = Vec::with_capacity(num_nodes + 1);
        row_offsets.push(0);
        let mut col_indices = Vec::new();
        let mut undirected = 0;
        for (u, row) in adj.iter_mut().enumerate() {
            row.sort_unstable();
            row.dedup();
            undirected += row.iter().filter(|&&v| v > u).count();
            col_indices.extend_from_slice(row);
            row_offsets.push(col_indices.len());
        }
        Self {
            num_nodes,
            row_offsets,
            col_indices,
            num_undirected_edges: undirected,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Undirected edges between distinct nodes.
    pub fn num_undirected_edges(&self) -> usize {
        self.num_undirected_edges
    }

    /// Stored directed entries, self-loops included.
    pub fn num_directed_entries(&self) -> usize {
        self.col_indices.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.col_indices[self.row_offsets[u]..self.row_offsets[u + 1]]
    }

    /// Stored entries of row `u`, a self-loop counting once.
    pub fn row_len(&self, u: usize) -> usize {
        self.row_offsets[u + 1] - self.row_offsets[u]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Edges `(u, v)` with `u < v`, in row order.
    pub fn undirected_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_nodes).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .filter(move |&&v| v > u)
                .map(move |&v| (u, v))
        })
    }

    pub fn has_self_loops(&self) -> bool {
        (0..self.num_nodes).all(|u| self.has_edge(u, u))
    }

    /// Same graph with a self-loop on every node.
    pub fn with_self_loops(&self) -> Self {
        let adj = (0..self.num_nodes)
            .map(|u| {
                let mut row = self.neighbors(u).to_vec();
                if let Err(pos) = row.binary_search(&u) {
                    row.insert(pos, u);
                }
                row
            })
            .collect();
        Self::from_adjacency(adj)
    }

    /// Node `u` of `self` becomes node `perm[u]` of the result.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.num_nodes {
            return Err(Error::shape(
                "relabel",
                format!("{} labels for {} nodes", perm.len(), self.num_nodes),
            ));
        }
        let mut adj = vec![Vec::new(); self.num_nodes];
        for u in 0..self.num_nodes {
            adj[perm[u]] = self.neighbors(u).iter().map(|&v| perm[v]).collect();
        }
        Ok(Self::from_adjacency(adj))
    }
}

/// One edge-dropped perturbation of a graph, with self-loops and its
/// normalized propagation weights.
#[derive(Debug, Clone, PartialEq)]
pub struct View {
    graph: Graph,
    norm_values: Vec<f32>,
    drop_ratio: f64,
}

impl View {
    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    /// Normalized weights aligned with `graph().col_indices()`.
    pub fn norm_values(&self) -> &[f32] {
        &self.norm_values
    }

    pub fn drop_ratio(&self) -> f64 {
        self.drop_ratio
    }

    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes
    }

    /// Degree after dropping, self-loop excluded.
    pub fn degree(&self, u: usize) -> usize {
        self.graph.row_len(u) - 1
    }

    /// Normalized weight of entry `(u, v)`, if stored.
    pub fn value(&self, u: usize, v: usize) -> Option<f32> {
        let lo = self.graph.row_offsets[u];
        self.graph
            .neighbors(u)
            .binary_search(&v)
            .ok()
            .map(|p| self.norm_values[lo + p])
    }

    /// The normalized adjacency `D̃^{-1/2}(A+I)D̃^{-1/2}` as a sparse operator.
    pub fn adjacency<T: Scalar>(&self) -> SparseMatrix<T> {
        SparseMatrix::new(
            self.graph.num_nodes,
            self.graph.row_offsets.clone(),
            self.graph.col_indices.clone(),
            self.norm_values.iter().map(|&v| T::from_f64(v as f64)).collect(),
        )
        .expect("view structure is valid")
    }

    /// Mean over post-drop neighbours (self excluded); isolated nodes get an
    /// empty row and therefore aggregate to zero.
    pub fn mean_aggregator<T: Scalar>(&self) -> SparseMatrix<T> {
        let n = self.graph.num_nodes;
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        let mut cols = Vec::with_capacity(self.graph.col_indices.len());
        let mut vals = Vec::with_capacity(self.graph.col_indices.len());
        for u in 0..n {
            let deg = self.degree(u);
            if deg > 0 {
                let w = T::from_f64(1.0 / deg as f64);
                for &v in self.graph.neighbors(u).iter().filter(|&&v| v != u) {
                    cols.push(v);
                    vals.push(w);
                }
            }
            offsets.push(cols.len());
        }
        SparseMatrix::new(n, offsets, cols, vals).expect("aggregator structure is valid")
    }
}

/// Symmetric normalization of a graph that already carries self-loops:
/// entry `(i, j)` becomes `1/√(d̃_i d̃_j)` with `d̃` the row length.
pub fn normalize_adjacency(graph: &Graph) -> Vec<f32> {
    debug_assert!(graph.has_self_loops());
    let inv_sqrt: Vec<f64> = (0..graph.num_nodes)
        .map(|u| 1.0 / (graph.row_len(u) as f64).sqrt())
        .collect();
    let mut values = Vec::with_capacity(graph.col_indices.len());
    for u in 0..graph.num_nodes {
        for &v in graph.neighbors(u) {
            values.push((inv_sqrt[u] * inv_sqrt[v]) as f32);
        }
    }
    values
}

/// Removes each undirected edge independently with probability `rho` (both
/// directions together), then adds self-loops and renormalizes.
pub fn drop_edges<R: Rng + ?Sized>(graph: &Graph, rho: f64, rng: &mut R) -> Result<View> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::arg(format!("drop ratio {rho} outside [0, 1)")));
    }
    let mut adj: Vec<Vec<usize>> = (0..graph.num_nodes).map(|u| vec![u]).collect();
    for (u, v) in graph.undirected_edges() {
        let dropped = rng.random::<f64>() < rho;
        if !dropped {
            adj[u].push(v);
            adj[v].push(u);
        }
    }
    let kept = Graph::from_adjacency(adj);
    let norm_values = normalize_adjacency(&kept);
    Ok(View {
        graph: kept,
        norm_values,
        drop_ratio: rho,
    })
}

/// The undropped view (`rho = 0`), without consuming randomness.
pub fn full_view(graph: &Graph) -> View {
    let g = graph.with_self_loops();
    let norm_values = normalize_adjacency(&g);
    View {
        graph: g,
        norm_values,
        drop_ratio: 0.0,
    }
}
