//! Attributed graphs, anchor sets, and their text formats.
//!
//! A graph is an undirected edge list over `n` nodes plus an `n x d` feature
//! matrix (`d` may be zero). The edge list is the single source of truth;
//! adjacency matrices are materialized on demand, dense or sparse depending
//! on what the caller can afford.
//!
//! File formats, all UTF-8 text:
//! - edge file: one `i j` pair per line, whitespace-separated, `#` comment
//!   lines allowed, optional first line `n <count>` for graphs with isolated
//!   trailing nodes;
//! - feature file: first line `n d`, then `n` rows of `d` numbers;
//! - anchor file: one `i j` (source, target) pair per line.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    features: Array2<f64>,
}

impl Graph {
    /// Builds a graph from an edge list, deduplicating reversed and repeated
    /// edges into a canonical sorted `i < j` form. Self-loops are rejected.
    pub fn new(n: usize, edges: Vec<(usize, usize)>, features: Option<Array2<f64>>) -> Result<Self> {
        let mut canonical = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            if a >= n {
                return Err(Error::IndexOutOfRange { index: a, n });
            }
            if b >= n {
                return Err(Error::IndexOutOfRange { index: b, n });
            }
            if a == b {
                return Err(Error::InvalidConfig(format!("self-loop at node {a}")));
            }
            canonical.push((a.min(b), a.max(b)));
        }
        canonical.sort_unstable();
        canonical.dedup();
        let features = features.unwrap_or_else(|| Array2::zeros((n, 0)));
        if features.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "feature matrix has {} rows but the graph has {} nodes",
                features.nrows(),
                n
            )));
        }
        Ok(Graph {
            n,
            edges: canonical,
            features,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    /// Returns a copy of this graph with the feature matrix replaced.
    pub fn with_features(&self, features: Array2<f64>) -> Result<Graph> {
        Graph::new(self.n, self.edges.clone(), Some(features))
    }

    /// Node degrees (loop-free, so each edge contributes to two nodes).
    pub fn degrees(&self) -> Array1<f64> {
        let mut deg = Array1::zeros(self.n);
        for &(i, j) in &self.edges {
            deg[i] += 1.0;
            deg[j] += 1.0;
        }
        deg
    }

    pub fn adjacency_dense(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.n, self.n));
        for &(i, j) in &self.edges {
            a[[i, j]] = 1.0;
            a[[j, i]] = 1.0;
        }
        a
    }

    pub fn adjacency_csr(&self) -> CsrMatrix {
        let mut triplets = Vec::with_capacity(2 * self.edges.len());
        for &(i, j) in &self.edges {
            triplets.push((i, j, 1.0));
            triplets.push((j, i, 1.0));
        }
        CsrMatrix::from_triplets(self.n, self.n, triplets)
    }
}

/// Row-wise L2 normalization. Zero rows are left untouched, which makes the
/// operation idempotent.
pub fn normalize_features(x: &ArrayView2<f64>) -> Array2<f64> {
    let mut out = x.to_owned();
    for mut row in out.rows_mut() {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.mapv_inplace(|v| v / norm);
        }
    }
    out
}

/// One-to-one ground-truth correspondences between two graphs.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorSet {
    pairs: Vec<(usize, usize)>,
}

impl AnchorSet {
    /// Validates that indices are in range and that no source or target node
    /// appears twice. Exact duplicate pairs are deduplicated.
    pub fn new(mut pairs: Vec<(usize, usize)>, n_s: usize, n_t: usize) -> Result<Self> {
        pairs.sort_unstable();
        pairs.dedup();
        let mut seen_s = vec![false; n_s];
        let mut seen_t = vec![false; n_t];
        for &(s, t) in &pairs {
            if s >= n_s {
                return Err(Error::IndexOutOfRange { index: s, n: n_s });
            }
            if t >= n_t {
                return Err(Error::IndexOutOfRange { index: t, n: n_t });
            }
            if seen_s[s] {
                return Err(Error::InvalidConfig(format!(
                    "source node {s} appears in more than one anchor"
                )));
            }
            if seen_t[t] {
                return Err(Error::InvalidConfig(format!(
                    "target node {t} appears in more than one anchor"
                )));
            }
            seen_s[s] = true;
            seen_t[t] = true;
        }
        Ok(AnchorSet { pairs })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim().to_string()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .collect())
}

fn parse_index(path: &Path, line: usize, token: &str) -> Result<usize> {
    token
        .parse::<usize>()
        .map_err(|_| Error::parse(path, line, format!("expected a node index, got {token:?}")))
}

fn parse_pairs(path: &Path, lines: &[(usize, String)]) -> Result<Vec<(usize, usize)>> {
    let mut pairs = Vec::with_capacity(lines.len());
    for (lineno, line) in lines {
        let mut it = line.split_whitespace();
        let (a, b) = match (it.next(), it.next(), it.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => {
                return Err(Error::parse(
                    path,
                    *lineno,
                    format!("expected exactly two indices, got {line:?}"),
                ))
            }
        };
        pairs.push((
            parse_index(path, *lineno, a)?,
            parse_index(path, *lineno, b)?,
        ));
    }
    Ok(pairs)
}

/// Loads a graph from an edge file and an optional feature file.
///
/// Without a header line, `n` is one past the largest index in the edge
/// file; a `n <count>` header overrides that (and is required to represent
/// trailing isolated nodes).
pub fn load_graph(edges_path: &Path, features_path: Option<&Path>) -> Result<Graph> {
    let mut lines = read_lines(edges_path)?;
    let mut declared_n = None;
    if let Some((lineno, first)) = lines.first() {
        let tokens: Vec<&str> = first.split_whitespace().collect();
        if tokens.first() == Some(&"n") {
            if tokens.len() != 2 {
                return Err(Error::parse(
                    edges_path,
                    *lineno,
                    format!("malformed header, expected `n <count>`, got {first:?}"),
                ));
            }
            declared_n = Some(parse_index(edges_path, *lineno, tokens[1])?);
            lines.remove(0);
        }
    }
    let pairs = parse_pairs(edges_path, &lines)?;
    let n = declared_n.unwrap_or_else(|| pairs.iter().map(|&(a, b)| a.max(b) + 1).max().unwrap_or(0));
    let features = match features_path {
        Some(p) => Some(load_features(p, n)?),
        None => None,
    };
    for (&(a, b), (lineno, _)) in pairs.iter().zip(&lines) {
        if a >= n || b >= n {
            return Err(Error::parse(
                edges_path,
                *lineno,
                format!("node index {} out of range for n = {n}", a.max(b)),
            ));
        }
        if a == b {
            return Err(Error::parse(edges_path, *lineno, format!("self-loop at node {a}")));
        }
    }
    Graph::new(n, pairs, features)
}

fn load_features(path: &Path, n: usize) -> Result<Array2<f64>> {
    let lines = read_lines(path)?;
    let Some((header_lineno, header)) = lines.first() else {
        return Err(Error::parse(path, 1, "missing `n d` header line"));
    };
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() != 2 {
        return Err(Error::parse(
            path,
            *header_lineno,
            format!("expected header `n d`, got {header:?}"),
        ));
    }
    let rows = parse_index(path, *header_lineno, tokens[0])?;
    let d = parse_index(path, *header_lineno, tokens[1])?;
    if rows != n {
        return Err(Error::DimensionMismatch(format!(
            "feature file declares {rows} rows but the graph has {n} nodes"
        )));
    }
    let data_lines = &lines[1..];
    if data_lines.len() != rows {
        return Err(Error::parse(
            path,
            *header_lineno,
            format!("expected {rows} feature rows, found {}", data_lines.len()),
        ));
    }
    let mut x = Array2::zeros((rows, d));
    for (r, (lineno, line)) in data_lines.iter().enumerate() {
        let values: Vec<&str> = line.split_whitespace().collect();
        if values.len() != d {
            return Err(Error::parse(
                path,
                *lineno,
                format!("expected {d} values, found {}", values.len()),
            ));
        }
        for (c, token) in values.iter().enumerate() {
            x[[r, c]] = token.parse::<f64>().map_err(|_| {
                Error::parse(path, *lineno, format!("expected a number, got {token:?}"))
            })?;
        }
    }
    Ok(x)
}

/// Writes a graph back to the text formats. The edge file always carries the
/// `n <count>` header so isolated nodes survive a round trip.
pub fn save_graph(g: &Graph, edges_path: &Path, features_path: Option<&Path>) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("n {}\n", g.n()));
    for &(i, j) in g.edges() {
        out.push_str(&format!("{i} {j}\n"));
    }
    write_atomic(edges_path, out.as_bytes())?;
    if let Some(fp) = features_path {
        let x = g.features();
        let mut out = String::new();
        out.push_str(&format!("{} {}\n", x.nrows(), x.ncols()));
        for row in x.rows() {
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        write_atomic(fp, out.as_bytes())?;
    }
    Ok(())
}

pub fn load_anchors(path: &Path, n_s: usize, n_t: usize) -> Result<AnchorSet> {
    let lines = read_lines(path)?;
    let pairs = parse_pairs(path, &lines)?;
    AnchorSet::new(pairs, n_s, n_t)
}

pub fn save_anchors(anchors: &AnchorSet, path: &Path) -> Result<()> {
    let mut out = String::new();
    for &(s, t) in anchors.pairs() {
        out.push_str(&format!("{s} {t}\n"));
    }
    write_atomic(path, out.as_bytes())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}
