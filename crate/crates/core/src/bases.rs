//! Structure views of a graph and their shared storage forms.
//!
//! Each graph contributes a family of candidate structure matrices:
//!
//! 1. the adjacency matrix (edge view),
//! 2. the node similarity matrix `X Xᵀ` of the (normalized) features, and
//! 3. propagated similarity matrices `(Âᵏ X)(Âᵏ X)ᵀ` for k = 1, 2, ...,
//!    where `Â` is the degree-normalized adjacency with self-loops.
//!
//! Views 2 and 3 are rank-`d` products and are kept in factored form `Z Zᵀ`;
//! they are never densified on the hot path. The final structure matrix is a
//! convex combination of the views, learned by the aligner.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::graph::{normalize_features, Graph};
use crate::sparse::CsrMatrix;

/// A single structure view in whichever storage form fits it.
///
/// `Factored(z)` represents the symmetric product `z zᵀ`.
#[derive(Debug, Clone)]
pub enum StructureBasis {
    Dense(Array2<f64>),
    Factored(Array2<f64>),
    Sparse(CsrMatrix),
}

impl StructureBasis {
    /// Side length of the represented square matrix.
    pub fn dim(&self) -> usize {
        match self {
            StructureBasis::Dense(a) => a.nrows(),
            StructureBasis::Factored(z) => z.nrows(),
            StructureBasis::Sparse(a) => a.nrows(),
        }
    }

    /// Materializes the full matrix. Intended for small instances and tests.
    pub fn materialize(&self) -> Array2<f64> {
        match self {
            StructureBasis::Dense(a) => a.clone(),
            StructureBasis::Factored(z) => z.dot(&z.t()),
            StructureBasis::Sparse(a) => a.to_dense(),
        }
    }

    /// Computes `B * rhs` without densifying factored or sparse storage.
    pub fn apply(&self, rhs: &ArrayView2<f64>) -> Array2<f64> {
        match self {
            StructureBasis::Dense(a) => a.dot(rhs),
            StructureBasis::Factored(z) => z.dot(&z.t().dot(rhs)),
            StructureBasis::Sparse(a) => a.matmul_dense(rhs),
        }
    }

    /// Frobenius inner product between two views of the same dimension.
    pub fn frob_inner(&self, other: &StructureBasis) -> f64 {
        use StructureBasis::*;
        match (self, other) {
            (Dense(a), Dense(b)) => (a * b).sum(),
            (Dense(a), Factored(z)) | (Factored(z), Dense(a)) => {
                // <A, Z Zᵀ> = sum of (A Z) ⊙ Z.
                (a.dot(z) * z).sum()
            }
            (Dense(a), Sparse(s)) | (Sparse(s), Dense(a)) => s.frob_inner_dense(&a.view()),
            (Factored(z1), Factored(z2)) => {
                // <Z1 Z1ᵀ, Z2 Z2ᵀ> = ||Z1ᵀ Z2||_F².
                z1.t().dot(z2).iter().map(|v| v * v).sum()
            }
            (Factored(z), Sparse(s)) | (Sparse(s), Factored(z)) => {
                let mut acc = 0.0;
                for (i, j, v) in s.iter() {
                    acc += v * z.row(i).dot(&z.row(j));
                }
                acc
            }
            (Sparse(a), Sparse(b)) => a.frob_inner_csr(b),
        }
    }

    /// Returns a copy whose entry (i, j) is scaled by `w[i] * w[j]`.
    pub fn scale_sym(&self, w: &Array1<f64>) -> StructureBasis {
        match self {
            StructureBasis::Dense(a) => {
                let mut out = a.clone();
                for ((i, j), v) in out.indexed_iter_mut() {
                    *v *= w[i] * w[j];
                }
                StructureBasis::Dense(out)
            }
            StructureBasis::Factored(z) => {
                let mut out = z.clone();
                for (mut row, &wi) in out.rows_mut().into_iter().zip(w.iter()) {
                    row.mapv_inplace(|v| v * wi);
                }
                StructureBasis::Factored(out)
            }
            StructureBasis::Sparse(a) => StructureBasis::Sparse(a.scale_sym(w)),
        }
    }
}

/// The ordered family of structure views of one graph: edge view first, then
/// the node view, then subgraph views in propagation order.
#[derive(Debug, Clone)]
pub struct StructureBasisSet {
    n: usize,
    bases: Vec<StructureBasis>,
}

impl StructureBasisSet {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.bases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bases.is_empty()
    }

    pub fn get(&self, q: usize) -> &StructureBasis {
        &self.bases[q]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, StructureBasis> {
        self.bases.iter()
    }
}

/// Degree-normalized adjacency with self-loops,
/// `Â = M^{-1/2} (A + I) M^{-1/2}` with `M = diag(deg + 1)`.
#[derive(Debug, Clone)]
pub struct NormalizedAdjacency {
    csr: CsrMatrix,
}

impl NormalizedAdjacency {
    pub fn n(&self) -> usize {
        self.csr.nrows()
    }

    pub fn materialize(&self) -> Array2<f64> {
        self.csr.to_dense()
    }

    /// One propagation step `Â * x`.
    pub fn apply(&self, x: &ArrayView2<f64>) -> Array2<f64> {
        self.csr.matmul_dense(x)
    }
}

/// Builds `Â` for a graph. Every entry is `(A + I)_{ij} / sqrt((deg_i + 1)(deg_j + 1))`,
/// so an isolated node keeps a diagonal entry of exactly 1.
pub fn normalized_adjacency(g: &Graph) -> NormalizedAdjacency {
    let deg = g.degrees();
    let inv_sqrt: Vec<f64> = deg.iter().map(|d| 1.0 / (d + 1.0).sqrt()).collect();
    let mut triplets = Vec::with_capacity(2 * g.num_edges() + g.n());
    for i in 0..g.n() {
        triplets.push((i, i, inv_sqrt[i] * inv_sqrt[i]));
    }
    for &(i, j) in g.edges() {
        let v = inv_sqrt[i] * inv_sqrt[j];
        triplets.push((i, j, v));
        triplets.push((j, i, v));
    }
    NormalizedAdjacency {
        csr: CsrMatrix::from_triplets(g.n(), g.n(), triplets),
    }
}

/// Applies `k` propagation steps, returning `Âᵏ x`.
pub fn propagate(adj: &NormalizedAdjacency, x: &ArrayView2<f64>, k: usize) -> Array2<f64> {
    let mut z = x.to_owned();
    for _ in 0..k {
        z = adj.apply(&z.view());
    }
    z
}

#[derive(Debug, Clone)]
pub struct BasisOptions {
    /// Row-normalize features before building feature-derived views.
    pub normalize_features: bool,
    /// Store the edge view densely for graphs up to this many nodes.
    pub dense_threshold: usize,
}

impl Default for BasisOptions {
    fn default() -> Self {
        BasisOptions {
            normalize_features: true,
            dense_threshold: 512,
        }
    }
}

/// Sorts feature columns into a canonical order. Column order is irrelevant
/// to every product the pipeline takes (`Z Zᵀ` contracts over it), and fixing
/// it makes alignment results bit-identical under feature permutations.
fn canonicalize_columns(x: &ArrayView2<f64>) -> Array2<f64> {
    let d = x.ncols();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        let (ca, cb) = (x.column(a), x.column(b));
        ca.iter()
            .zip(cb.iter())
            .map(|(va, vb)| va.total_cmp(vb))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut out = Array2::zeros(x.dim());
    for (new_c, &old_c) in order.iter().enumerate() {
        out.column_mut(new_c).assign(&x.column(old_c));
    }
    out
}

/// Builds the ordered family of `k` structure views for a graph.
///
/// `k = 1` keeps only the edge view and works for featureless graphs; any
/// larger `k` requires `d >= 1`. With `k >= 3` the subgraph views reuse the
/// previous propagation, costing one `Â` multiplication each.
pub fn build_bases(g: &Graph, k: usize, opts: &BasisOptions) -> Result<StructureBasisSet> {
    if k == 0 {
        return Err(Error::InvalidConfig("the number of structure views must be at least 1".into()));
    }
    if k >= 2 && g.feature_dim() == 0 {
        return Err(Error::InvalidConfig(format!(
            "{k} structure views requested but the graph has no features; only the edge view is available"
        )));
    }
    let mut bases = Vec::with_capacity(k);
    let edge_view = if g.n() <= opts.dense_threshold {
        StructureBasis::Dense(g.adjacency_dense())
    } else {
        StructureBasis::Sparse(g.adjacency_csr())
    };
    bases.push(edge_view);
    if k >= 2 {
        let x = canonicalize_columns(&g.features());
        let z0 = if opts.normalize_features {
            normalize_features(&x.view())
        } else {
            x
        };
        bases.push(StructureBasis::Factored(z0.clone()));
        if k >= 3 {
            let adj = normalized_adjacency(g);
            let mut z = z0;
            for _ in 2..k {
                z = adj.apply(&z.view());
                bases.push(StructureBasis::Factored(z.clone()));
            }
        }
    }
    Ok(StructureBasisSet { n: g.n(), bases })
}
