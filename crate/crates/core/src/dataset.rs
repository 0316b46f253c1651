//! Node-classification datasets: file ingestion, synthetic stochastic block
//! models, and train/val/test splits.
//!
//! File formats:
//! - edges: UTF-8, one `u v` pair of 0-based ids per line, `#` comments;
//! - features: binary `CGF1` + N (u64 LE) + F (u64 LE) + N·F f32 LE row-major,
//!   or CSV with N rows of F comma-separated values;
//! - labels: one integer per line, `-1` for unlabeled;
//! - splits: `per-class:TRAIN,VAL`, `file:PATH` (lines `train|val|test ids...`),
//!   or `files:TRAIN,VAL,TEST` (one index list per file).

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::autodiff::Matrix;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::{stream_rng, Stream};

pub const FEATURE_MAGIC: &[u8; 4] = b"CGF1";

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub graph: Graph,
    pub features: Matrix<f32>,
    /// Class ids; `-1` marks an unlabeled node.
    pub labels: Vec<i64>,
    pub splits: Splits,
}

impl Dataset {
    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    pub fn num_classes(&self) -> usize {
        num_classes(&self.labels)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.graph.num_nodes();
        if self.features.rows() != n {
            return Err(Error::shape(
                "dataset",
                format!("{} feature rows for {n} nodes", self.features.rows()),
            ));
        }
        if self.labels.len() != n {
            return Err(Error::shape(
                "dataset",
                format!("{} labels for {n} nodes", self.labels.len()),
            ));
        }
        let mut seen = BTreeSet::new();
        for &i in self
            .splits
            .train
            .iter()
            .chain(&self.splits.val)
            .chain(&self.splits.test)
        {
            if i >= n {
                return Err(Error::Range {
                    what: "split",
                    index: i,
                    limit: n,
                });
            }
            if !seen.insert(i) {
                return Err(Error::arg(format!("node {i} appears in more than one split")));
            }
        }
        Ok(())
    }
}

pub fn num_classes(labels: &[i64]) -> usize {
    labels.iter().copied().max().map_or(0, |m| (m + 1).max(0) as usize)
}

/// How to partition labeled nodes into train/val/test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SplitSpec {
    /// Lowest-indexed `train` nodes of each class for training, the next
    /// `val` for validation, the rest for testing.
    PerClass { train: usize, val: usize },
    File(PathBuf),
    Files {
        train: PathBuf,
        val: PathBuf,
        test: PathBuf,
    },
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec::PerClass { train: 20, val: 30 }
    }
}

impl FromStr for SplitSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::arg(format!("unrecognized split spec {s:?}"));
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        match kind {
            "per-class" => {
                let (t, v) = rest.split_once(',').ok_or_else(bad)?;
                Ok(SplitSpec::PerClass {
                    train: t.trim().parse().map_err(|_| bad())?,
                    val: v.trim().parse().map_err(|_| bad())?,
                })
            }
            "file" => Ok(SplitSpec::File(rest.into())),
            "files" => {
                let parts: Vec<&str> = rest.split(',').collect();
                match parts.as_slice() {
                    [t, v, te] => Ok(SplitSpec::Files {
                        train: t.into(),
                        val: v.into(),
                        test: te.into(),
                    }),
                    _ => Err(bad()),
                }
            }
            _ => Err(bad()),
        }
    }
}

impl SplitSpec {
    pub fn resolve(&self, labels: &[i64]) -> Result<Splits> {
        match self {
            SplitSpec::PerClass { train, val } => Ok(per_class_split(labels, *train, *val)),
            SplitSpec::File(path) => read_split_file(path),
            SplitSpec::Files { train, val, test } => Ok(Splits {
                train: read_index_list(train)?,
                val: read_index_list(val)?,
                test: read_index_list(test)?,
            }),
        }
    }
}

pub fn per_class_split(labels: &[i64], train: usize, val: usize) -> Splits {
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes(labels)];
    for (i, &l) in labels.iter().enumerate() {
        if l >= 0 {
            per_class[l as usize].push(i);
        }
    }
    let mut splits = Splits::default();
    for members in per_class {
        let t = train.min(members.len());
        let v = val.min(members.len() - t);
        splits.train.extend_from_slice(&members[..t]);
        splits.val.extend_from_slice(&members[t..t + v]);
        splits.test.extend_from_slice(&members[t + v..]);
    }
    splits.train.sort_unstable();
    splits.val.sort_unstable();
    splits.test.sort_unstable();
    splits
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Content lines with their 1-based numbers, skipping blanks and `#` comments.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub fn read_edge_list(path: &Path) -> Result<Vec<(usize, usize)>> {
    let text = read_text(path)?;
    let mut edges = Vec::new();
    for (line, l) in content_lines(&text) {
        let mut it = l.split_whitespace();
        let parse = |tok: Option<&str>| -> Result<usize> {
            let tok = tok.ok_or_else(|| parse_err(path, line, "expected two node ids"))?;
            tok.parse()
                .map_err(|_| parse_err(path, line, format!("invalid node id {tok:?}")))
        };
        let u = parse(it.next())?;
        let v = parse(it.next())?;
        if it.next().is_some() {
            return Err(parse_err(path, line, "expected exactly two node ids"));
        }
        edges.push((u, v));
    }
    Ok(edges)
}

pub fn read_features(path: &Path) -> Result<Matrix<f32>> {
    let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    if bytes.starts_with(FEATURE_MAGIC) {
        decode_features_binary(&bytes)
    } else {
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::Format(format!("{} is neither CGF1 nor UTF-8 CSV", path.display())))?;
        parse_features_csv(path, &text)
    }
}

fn decode_features_binary(bytes: &[u8]) -> Result<Matrix<f32>> {
    let header = 4 + 16;
    if bytes.len() < header {
        return Err(Error::Format("truncated feature header".into()));
    }
    let word = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let (n, f) = (word(4) as usize, word(12) as usize);
    let expected = n
        .checked_mul(f)
        .and_then(|c| c.checked_mul(4))
        .and_then(|c| c.checked_add(header))
        .ok_or_else(|| Error::Format("feature dimensions overflow".into()))?;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "feature payload is {} bytes, expected {expected} for {n}x{f}",
            bytes.len()
        )));
    }
    let data = bytes[header..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Matrix::from_vec(n, f, data)
}

fn parse_features_csv(path: &Path, text: &str) -> Result<Matrix<f32>> {
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (line, l) in content_lines(text) {
        let before = data.len();
        for tok in l.split(',') {
            let tok = tok.trim();
            let v: f32 = tok
                .parse()
                .map_err(|_| parse_err(path, line, format!("invalid feature value {tok:?}")))?;
            data.push(v);
        }
        let width = data.len() - before;
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => {
                return Err(parse_err(path, line, format!("expected {c} columns, found {width}")))
            }
            _ => {}
        }
        rows += 1;
    }
    Matrix::from_vec(rows, cols.unwrap_or(0), data)
}

pub fn read_labels(path: &Path) -> Result<Vec<i64>> {
    let text = read_text(path)?;
    content_lines(&text)
        .map(|(line, l)| {
            l.parse::<i64>()
                .ok()
                .filter(|&v| v >= -1)
                .ok_or_else(|| parse_err(path, line, format!("invalid label {l:?}")))
        })
        .collect()
}

pub fn read_index_list(path: &Path) -> Result<Vec<usize>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (line, l) in content_lines(&text) {
        for tok in l.split_whitespace() {
            out.push(
                tok.parse()
                    .map_err(|_| parse_err(path, line, format!("invalid index {tok:?}")))?,
            );
        }
    }
    Ok(out)
}

pub fn read_split_file(path: &Path) -> Result<Splits> {
    let text = read_text(path)?;
    let mut splits = Splits::default();
    for (line, l) in content_lines(&text) {
        let mut it = l.split_whitespace();
        let target = match it.next() {
            Some("train") | Some("train:") => &mut splits.train,
            Some("val") | Some("val:") => &mut splits.val,
            Some("test") | Some("test:") => &mut splits.test,
            other => {
                return Err(parse_err(
                    path,
                    line,
                    format!("expected train/val/test, found {other:?}"),
                ))
            }
        };
        for tok in it {
            target.push(
                tok.parse()
                    .map_err(|_| parse_err(path, line, format!("invalid index {tok:?}")))?,
            );
        }
    }
    Ok(splits)
}

/// Reads and validates a dataset. The node count comes from the feature file.
pub fn load_dataset(
    edge_path: &Path,
    feature_path: &Path,
    label_path: &Path,
    split: &SplitSpec,
) -> Result<Dataset> {
    let features = read_features(feature_path)?;
    let labels = read_labels(label_path)?;
    if labels.len() != features.rows() {
        return Err(Error::shape(
            "load_dataset",
            format!("{} labels but {} feature rows", labels.len(), features.rows()),
        ));
    }
    let edges = read_edge_list(edge_path)?;
    let graph = Graph::from_edges(features.rows(), edges)?;
    let splits = split.resolve(&labels)?;
    let ds = Dataset {
        graph,
        features,
        labels,
        splits,
    };
    ds.validate()?;
    Ok(ds)
}

fn create(path: &Path) -> Result<std::io::BufWriter<fs::File>> {
    fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| Error::io(format!("creating {}", path.display()), e))
}

fn finish(path: &Path, w: std::io::Result<()>) -> Result<()> {
    w.map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn write_edge_list(path: &Path, graph: &Graph) -> Result<()> {
    let mut w = create(path)?;
    let res = (|| {
        writeln!(w, "# {} nodes, {} undirected edges", graph.num_nodes(), graph.num_undirected_edges())?;
        for (u, v) in graph.undirected_edges() {
            writeln!(w, "{u} {v}")?;
        }
        w.flush()
    })();
    finish(path, res)
}

pub fn encode_features_binary(features: &Matrix<f32>) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + features.len() * 4);
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&(features.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(features.cols() as u64).to_le_bytes());
    for v in features.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn write_features_binary(path: &Path, features: &Matrix<f32>) -> Result<()> {
    fs::write(path, encode_features_binary(features))
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn write_features_csv(path: &Path, features: &Matrix<f32>) -> Result<()> {
    let mut w = create(path)?;
    let res = (|| {
        for r in 0..features.rows() {
            let line: Vec<String> = features.row(r).iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        w.flush()
    })();
    finish(path, res)
}

pub fn write_labels(path: &Path, labels: &[i64]) -> Result<()> {
    let mut w = create(path)?;
    let res = (|| {
        for l in labels {
            writeln!(w, "{l}")?;
        }
        w.flush()
    })();
    finish(path, res)
}

pub fn write_split_file(path: &Path, splits: &Splits) -> Result<()> {
    let mut w = create(path)?;
    let res = (|| {
        for (name, ids) in [("train", &splits.train), ("val", &splits.val), ("test", &splits.test)] {
            let ids: Vec<String> = ids.iter().map(usize::to_string).collect();
            writeln!(w, "{name} {}", ids.join(" "))?;
        }
        w.flush()
    })();
    finish(path, res)
}

/// Parameters of a planted-partition graph with block-mean features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmConfig {
    pub num_blocks: usize,
    pub nodes_per_block: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    pub feature_noise: f64,
    pub seed: u64,
}

impl Default for SbmConfig {
    fn default() -> Self {
        Self {
            num_blocks: 3,
            nodes_per_block: 100,
            p_in: 0.1,
            p_out: 0.01,
            feature_dim: 16,
            feature_noise: 1.0,
            seed: 7,
        }
    }
}

/// Stochastic block model. Node `i` belongs to block `i / nodes_per_block`;
/// its features are the block's standard basis vector plus isotropic
/// Gaussian noise. Splits are 20 train / 30 val per block, rest test.
pub fn generate_sbm(cfg: &SbmConfig) -> Result<Dataset> {
    if cfg.num_blocks == 0 || cfg.nodes_per_block == 0 || cfg.feature_dim == 0 {
        return Err(Error::arg("block count, block size and feature dim must be positive"));
    }
    if !(0.0 <= cfg.p_out && cfg.p_out < cfg.p_in && cfg.p_in <= 1.0) {
        return Err(Error::arg(format!(
            "need 0 <= p_out < p_in <= 1, got p_in={} p_out={}",
            cfg.p_in, cfg.p_out
        )));
    }
    if cfg.feature_dim < cfg.num_blocks {
        return Err(Error::arg(format!(
            "feature_dim {} cannot hold {} orthogonal block means",
            cfg.feature_dim, cfg.num_blocks
        )));
    }
    let noise = Normal::new(0.0, cfg.feature_noise)
        .map_err(|e| Error::arg(format!("feature noise: {e}")))?;

    let n = cfg.num_blocks * cfg.nodes_per_block;
    let block = |i: usize| i / cfg.nodes_per_block;

    let mut edge_rng = stream_rng(cfg.seed, Stream::Generator, &[0]);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if block(u) == block(v) { cfg.p_in } else { cfg.p_out };
            if edge_rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    let graph = Graph::from_edges(n, edges)?;

    let mut feat_rng = stream_rng(cfg.seed, Stream::Generator, &[1]);
    let mut features = Matrix::zeros(n, cfg.feature_dim);
    for i in 0..n {
        let b = block(i);
        for (c, x) in features.row_mut(i).iter_mut().enumerate() {
            let mean = if c == b { 1.0 } else { 0.0 };
            *x = (mean + noise.sample(&mut feat_rng)) as f32;
        }
    }

    let labels: Vec<i64> = (0..n).map(|i| block(i) as i64).collect();
    let splits = per_class_split(&labels, 20, 30);
    let ds = Dataset {
        graph,
        features,
        labels,
        splits,
    };
    ds.validate()?;
    Ok(ds)
}
