//! Semi-synthetic benchmark generators: node-permuted targets with
//! ground-truth anchors, edge perturbation, and the three feature
//! inconsistencies (column permutation, truncation, PCA compression).
//!
//! Every generator is a deterministic function of its inputs and seed; the
//! RNG is ChaCha8, which has a portable, documented algorithm.

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{AnchorSet, Graph};

/// One semi-synthetic target recipe: node permutation, then edge moves,
/// then an optional feature inconsistency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbSpec {
    /// Seed fixing all randomness of the recipe.
    pub seed: u64,
    /// Fraction of edges moved to previously unconnected positions.
    pub edge_ratio: f64,
    /// Feature-space inconsistency applied after the edge moves.
    pub feature_op: FeatureOp,
}

/// Feature-space inconsistency with its strength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeatureOp {
    None,
    /// Cyclically shuffle this fraction of columns among themselves.
    Permute(f64),
    /// Delete this fraction of columns.
    Truncate(f64),
    /// PCA-compress, keeping a `1 - ratio` fraction of the dimensions.
    Compress(f64),
}

impl PerturbSpec {
    pub fn validate(&self) -> Result<()> {
        check_ratio("edge perturbation ratio", self.edge_ratio)?;
        match self.feature_op {
            FeatureOp::None => Ok(()),
            FeatureOp::Permute(p) => check_ratio("feature permutation ratio", p),
            FeatureOp::Truncate(p) => check_ratio("feature truncation ratio", p),
            FeatureOp::Compress(p) => check_ratio("feature compression ratio", p),
        }
    }
}

fn check_ratio(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) || !p.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "{name} must lie in [0, 1], got {p}"
        )));
    }
    Ok(())
}

/// Ties round away from zero, so a half edge counts.
fn round_count(p: f64, count: usize) -> usize {
    (p * count as f64).round() as usize
}

/// Derives an independent stream seed, splitmix64-style.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Relabels the nodes by a uniformly random permutation, returning the
/// target graph and the ground-truth anchors `(i, σ(i))`.
pub fn make_target(g: &Graph, seed: u64) -> (Graph, AnchorSet) {
    let mut perm: Vec<usize> = (0..g.n()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    perm.shuffle(&mut rng);
    make_target_with_permutation(g, &perm)
        .expect("relabeling by a valid permutation cannot fail")
}

/// Relabels the nodes by the given permutation: node `i` of the source
/// becomes node `perm[i]` of the target.
pub fn make_target_with_permutation(g: &Graph, perm: &[usize]) -> Result<(Graph, AnchorSet)> {
    let n = g.n();
    if perm.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "permutation has length {} for {} nodes",
            perm.len(),
            n
        )));
    }
    let mut seen = vec![false; n];
    for &v in perm {
        if v >= n {
            return Err(Error::IndexOutOfRange { index: v, n });
        }
        if seen[v] {
            return Err(Error::InvalidConfig(format!(
                "node {v} appears twice in the permutation"
            )));
        }
        seen[v] = true;
    }
    let edges: Vec<(usize, usize)> = g.edges().iter().map(|&(i, j)| (perm[i], perm[j])).collect();
    let x = g.features();
    let mut features = Array2::zeros((n, g.feature_dim()));
    for i in 0..n {
        features.row_mut(perm[i]).assign(&x.row(i));
    }
    let target = Graph::new(n, edges, Some(features))?;
    let anchors = AnchorSet::new((0..n).map(|i| (i, perm[i])).collect(), n, n)?;
    Ok((target, anchors))
}

/// Moves `round(p · |E|)` uniformly chosen edges to uniformly chosen
/// previously unconnected positions. The edge count is preserved exactly.
pub fn perturb_edges(g: &Graph, p: f64, seed: u64) -> Result<Graph> {
    check_ratio("edge perturbation ratio", p)?;
    let n = g.n();
    let edges = g.edges();
    let e = edges.len();
    let r = round_count(p, e);
    if r == 0 {
        return Ok(g.clone());
    }
    let total_pairs = n * (n - 1) / 2;
    let free = total_pairs - e;
    if r > free {
        return Err(Error::InvalidConfig(format!(
            "cannot move {r} edges: only {free} unconnected positions exist"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dropped = vec![false; e];
    for idx in rand::seq::index::sample(&mut rng, e, r).iter() {
        dropped[idx] = true;
    }

    // Free positions are indexed row by row so the l-th one is decodable
    // without enumerating the whole complement.
    let mut per_row: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(i, j) in edges {
        per_row[i].push(j);
    }
    let mut prefix = vec![0usize; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + (n - 1 - i) - per_row[i].len();
    }
    let decode = |l: usize| -> (usize, usize) {
        let mut lo = 0usize;
        let mut hi = n;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if prefix[mid] <= l {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let i = lo;
        let mut offset = l - prefix[i];
        let mut taken = per_row[i].iter().peekable();
        for j in (i + 1)..n {
            if taken.peek() == Some(&&j) {
                taken.next();
                continue;
            }
            if offset == 0 {
                return (i, j);
            }
            offset -= 1;
        }
        unreachable!("free-position index beyond the row prefix sums")
    };

    let mut moved: Vec<(usize, usize)> = edges
        .iter()
        .zip(&dropped)
        .filter(|(_, dropped)| !**dropped)
        .map(|(edge, _)| *edge)
        .collect();
    for l in rand::seq::index::sample(&mut rng, free, r).iter() {
        moved.push(decode(l));
    }
    Graph::new(n, moved, Some(g.features().to_owned()))
}

/// Cyclically shuffles `round(p · d)` uniformly chosen feature columns
/// among themselves (in index order), a derangement of the chosen set.
pub fn permute_features(g: &Graph, p: f64, seed: u64) -> Result<Graph> {
    check_ratio("feature permutation ratio", p)?;
    let d = g.feature_dim();
    let k = round_count(p, d);
    if k < 2 {
        return Ok(g.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<usize> = rand::seq::index::sample(&mut rng, d, k).into_vec();
    chosen.sort_unstable();
    let x = g.features();
    let mut out = x.to_owned();
    for w in 0..k {
        let src = chosen[(w + k - 1) % k];
        out.column_mut(chosen[w]).assign(&x.column(src));
    }
    g.with_features(out)
}

/// Deletes `round(p · d)` uniformly chosen feature columns, keeping the
/// survivors in their original order.
pub fn truncate_features(g: &Graph, p: f64, seed: u64) -> Result<Graph> {
    check_ratio("feature truncation ratio", p)?;
    let d = g.feature_dim();
    let r = round_count(p, d);
    if d == r {
        return Err(Error::InvalidConfig(
            "feature truncation would delete every column".into(),
        ));
    }
    if r == 0 {
        return Ok(g.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut drop = vec![false; d];
    for idx in rand::seq::index::sample(&mut rng, d, r).iter() {
        drop[idx] = true;
    }
    let x = g.features();
    let mut out = Array2::zeros((g.n(), d - r));
    let mut w = 0usize;
    for j in 0..d {
        if !drop[j] {
            out.column_mut(w).assign(&x.column(j));
            w += 1;
        }
    }
    g.with_features(out)
}

/// Replaces the features by their projections onto the top
/// `max(1, round((1 - p) · d))` principal components of the column-centered
/// matrix. Component signs are fixed by making the first largest-magnitude
/// coordinate positive.
pub fn compress_features(g: &Graph, p: f64) -> Result<Graph> {
    check_ratio("feature compression ratio", p)?;
    let d = g.feature_dim();
    if d < 2 {
        return Err(Error::InvalidConfig(format!(
            "PCA compression needs at least two feature columns, got {d}"
        )));
    }
    let n = g.n();
    let keep = (((1.0 - p) * d as f64).round() as usize).max(1);
    if n == 0 {
        return g.with_features(Array2::zeros((0, keep)));
    }
    let x = g.features();
    let means = x.mean_axis(Axis(0)).expect("n >= 1");
    let centered = &x - &means;
    if n < 2 {
        return g.with_features(Array2::zeros((n, keep)));
    }
    let cov = centered.t().dot(&centered) / (n as f64 - 1.0);
    let eig = nalgebra::SymmetricEigen::new(nalgebra::DMatrix::from_fn(d, d, |i, j| {
        cov[[i, j]]
    }));
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|a, b| eig.eigenvalues[*b].total_cmp(&eig.eigenvalues[*a]));
    let mut basis = Array2::zeros((d, keep));
    for (c, &idx) in order.iter().take(keep).enumerate() {
        let col = eig.eigenvectors.column(idx);
        let max_abs = (0..d).map(|i| col[i].abs()).fold(0.0f64, f64::max);
        let lead = (0..d)
            .find(|&i| col[i].abs() >= max_abs * (1.0 - 1e-12))
            .unwrap_or(0);
        let sign = if col[lead] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..d {
            basis[[i, c]] = sign * col[i];
        }
    }
    g.with_features(centered.dot(&basis))
}

/// Runs the whole recipe: permute nodes, move edges, apply the feature
/// inconsistency. Sub-steps draw from seeds derived per stream.
pub fn apply(g: &Graph, spec: &PerturbSpec) -> Result<(Graph, AnchorSet)> {
    spec.validate()?;
    let (mut target, anchors) = make_target(g, spec.seed);
    target = perturb_edges(&target, spec.edge_ratio, derive_seed(spec.seed, 1))?;
    target = match spec.feature_op {
        FeatureOp::None => target,
        FeatureOp::Permute(p) => permute_features(&target, p, derive_seed(spec.seed, 2))?,
        FeatureOp::Truncate(p) => truncate_features(&target, p, derive_seed(spec.seed, 2))?,
        FeatureOp::Compress(p) => compress_features(&target, p)?,
    };
    Ok((target, anchors))
}
