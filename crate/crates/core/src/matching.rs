//! From score matrices to node correspondences: top-k candidate ranking,
//! Hit@k against anchor sets, one-to-one extraction, and the plain
//! feature-similarity baseline.
//!
//! Every function takes scores oriented source x target, so couplings and
//! similarity matrices are interchangeable. Ties are always broken toward
//! the lower index.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::graph::{normalize_features, AnchorSet, Graph};

/// Which side queries and which side is ranked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Each target node ranks source candidates.
    TargetToSource,
    /// Each source node ranks target candidates.
    SourceToTarget,
}

/// How one-to-one pairs are extracted from a score matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtractMode {
    /// Scan entries in decreasing score, taking pairs with free endpoints.
    Greedy,
    /// Assignment solver maximizing total score.
    Exact,
    /// Exact when the matrix has at most this many entries, greedy otherwise.
    Auto(usize),
}

impl Default for ExtractMode {
    fn default() -> Self {
        ExtractMode::Auto(10_000)
    }
}

/// Rankings, extracted pairs, and metrics from one alignment method.
#[derive(Debug, Clone)]
pub struct AlignmentResult {
    /// Score matrix, rows = source nodes, columns = target nodes.
    pub scores: Array2<f64>,
    /// Query orientation of `rankings`.
    pub direction: Direction,
    /// Ranked `(candidate, score)` lists, one per query node.
    pub rankings: Vec<Vec<(usize, f64)>>,
    /// Injective matching, filled by `extract`.
    pub one_to_one: Option<Vec<(usize, usize)>>,
    /// Hit@k percentages keyed by k, filled by `score_against`.
    pub hits: BTreeMap<usize, f64>,
    /// Time spent producing the scores.
    pub wall_time: Duration,
}

impl AlignmentResult {
    /// Ranks the top `top_k` candidates per query node.
    pub fn from_scores(
        scores: Array2<f64>,
        direction: Direction,
        top_k: usize,
        wall_time: Duration,
    ) -> Result<Self> {
        let rankings = rank_candidates(&scores.view(), top_k, direction)?;
        Ok(AlignmentResult {
            scores,
            direction,
            rankings,
            one_to_one: None,
            hits: BTreeMap::new(),
            wall_time,
        })
    }

    /// Fills the Hit@k map from ground-truth anchors.
    pub fn score_against(&mut self, anchors: &AnchorSet, ks: &[usize]) -> Result<()> {
        self.hits = hit_at_k_directed(&self.scores.view(), anchors, ks, self.direction)?;
        Ok(())
    }

    /// Fills the one-to-one matching.
    pub fn extract(&mut self, mode: ExtractMode) -> Result<()> {
        self.one_to_one = Some(extract_one_to_one(&self.scores.view(), mode)?);
        Ok(())
    }
}

/// For each query node, the `k` highest-scored counterparts, sorted by score
/// descending and index ascending. `k` beyond the counterpart count
/// truncates; `k = 0` is an error.
pub fn rank_candidates(
    scores: &ArrayView2<f64>,
    k: usize,
    direction: Direction,
) -> Result<Vec<Vec<(usize, f64)>>> {
    if k == 0 {
        return Err(Error::InvalidConfig("ranking needs k of at least 1".into()));
    }
    let queries = match direction {
        Direction::TargetToSource => scores.ncols(),
        Direction::SourceToTarget => scores.nrows(),
    };
    let mut out = Vec::with_capacity(queries);
    for q in 0..queries {
        let lane = match direction {
            Direction::TargetToSource => scores.column(q),
            Direction::SourceToTarget => scores.row(q),
        };
        let mut ranked: Vec<(usize, f64)> = lane.iter().copied().enumerate().collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.truncate(k);
        out.push(ranked);
    }
    Ok(out)
}

/// Hit@k over all anchors in the default target-to-source direction.
pub fn hit_at_k(
    scores: &ArrayView2<f64>,
    anchors: &AnchorSet,
    ks: &[usize],
) -> Result<BTreeMap<usize, f64>> {
    hit_at_k_directed(scores, anchors, ks, Direction::TargetToSource)
}

/// Hit@k over all anchors: the percentage of anchors whose true counterpart
/// appears among the query node's k best-scored candidates.
pub fn hit_at_k_directed(
    scores: &ArrayView2<f64>,
    anchors: &AnchorSet,
    ks: &[usize],
    direction: Direction,
) -> Result<BTreeMap<usize, f64>> {
    if anchors.is_empty() {
        return Err(Error::EmptyAnchors);
    }
    if ks.iter().any(|k| *k == 0) {
        return Err(Error::InvalidConfig("Hit@k needs k of at least 1".into()));
    }
    let (n, m) = scores.dim();
    let mut ranks = Vec::with_capacity(anchors.len());
    for &(s, t) in anchors.pairs() {
        if s >= n {
            return Err(Error::IndexOutOfRange { index: s, n });
        }
        if t >= m {
            return Err(Error::IndexOutOfRange { index: t, n: m });
        }
        let (lane, answer) = match direction {
            Direction::TargetToSource => (scores.column(t), s),
            Direction::SourceToTarget => (scores.row(s), t),
        };
        let mine = lane[answer];
        let rank = lane
            .iter()
            .enumerate()
            .filter(|(i, v)| **v > mine || (**v == mine && *i < answer))
            .count();
        ranks.push(rank);
    }
    let total = ranks.len() as f64;
    let mut hits = BTreeMap::new();
    for &k in ks {
        let hit = ranks.iter().filter(|r| **r < k).count() as f64;
        hits.insert(k, 100.0 * hit / total);
    }
    Ok(hits)
}

/// Extracts an injective matching of `min(n, m)` pairs, returned sorted by
/// source index.
pub fn extract_one_to_one(
    scores: &ArrayView2<f64>,
    mode: ExtractMode,
) -> Result<Vec<(usize, usize)>> {
    if scores.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("scores must be finite".into()));
    }
    let (n, m) = scores.dim();
    if n.min(m) == 0 {
        return Ok(Vec::new());
    }
    let exact = match mode {
        ExtractMode::Greedy => false,
        ExtractMode::Exact => true,
        ExtractMode::Auto(threshold) => n * m <= threshold,
    };
    let mut pairs = if exact {
        extract_exact(scores)
    } else {
        extract_greedy(scores)
    };
    pairs.sort_unstable();
    Ok(pairs)
}

fn extract_greedy(scores: &ArrayView2<f64>) -> Vec<(usize, usize)> {
    let (n, m) = scores.dim();
    let mut entries: Vec<(usize, usize, f64)> = scores
        .indexed_iter()
        .map(|((i, j), v)| (i, j, *v))
        .collect();
    entries.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    let want = n.min(m);
    let mut used_s = vec![false; n];
    let mut used_t = vec![false; m];
    let mut pairs = Vec::with_capacity(want);
    for (i, j, _) in entries {
        if !used_s[i] && !used_t[j] {
            used_s[i] = true;
            used_t[j] = true;
            pairs.push((i, j));
            if pairs.len() == want {
                break;
            }
        }
    }
    pairs
}

fn extract_exact(scores: &ArrayView2<f64>) -> Vec<(usize, usize)> {
    let (n, m) = scores.dim();
    if n <= m {
        let row_to_col = assign_max(scores);
        row_to_col.into_iter().enumerate().collect()
    } else {
        let transposed = scores.t();
        let row_to_col = assign_max(&transposed);
        row_to_col
            .into_iter()
            .enumerate()
            .map(|(t, s)| (s, t))
            .collect()
    }
}

/// Maximum-total-score assignment of every row to a distinct column
/// (`nrows <= ncols`), by the shortest-augmenting-path method with
/// potentials on the equivalent min-cost problem.
fn assign_max(scores: &ArrayView2<f64>) -> Vec<usize> {
    let (n, m) = scores.dim();
    debug_assert!(n <= m && n > 0);
    let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let cost = |i: usize, j: usize| top - scores[[i, j]];

    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut assigned = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        assigned[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = assigned[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[assigned[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if assigned[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            assigned[j0] = assigned[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![usize::MAX; n];
    for j in 1..=m {
        if assigned[j] != 0 {
            row_to_col[assigned[j] - 1] = j - 1;
        }
    }
    row_to_col
}

/// Ranks target nodes against source nodes by cosine feature similarity.
pub fn knn_align(g_s: &Graph, g_t: &Graph, k: usize) -> Result<AlignmentResult> {
    let start = Instant::now();
    let d = g_s.feature_dim();
    if d == 0 || g_t.feature_dim() != d {
        return Err(Error::DimensionMismatch(format!(
            "feature matching needs equal nonzero feature dimensions, got {} and {}",
            d,
            g_t.feature_dim()
        )));
    }
    let scores =
        normalize_features(&g_s.features()).dot(&normalize_features(&g_t.features()).t());
    AlignmentResult::from_scores(scores, Direction::TargetToSource, k, start.elapsed())
}

/// Writes rankings as CSV: one row per query node with alternating
/// candidate index and score columns.
pub fn write_matches(path: &Path, result: &AlignmentResult) -> Result<()> {
    let (query, candidate) = match result.direction {
        Direction::TargetToSource => ("target_index", "source"),
        Direction::SourceToTarget => ("source_index", "target"),
    };
    let width = result.rankings.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = String::new();
    out.push_str(query);
    for r in 1..=width {
        write!(out, ",rank{r}_{candidate},score{r}").expect("writing to a string cannot fail");
    }
    out.push('\n');
    for (q, ranked) in result.rankings.iter().enumerate() {
        write!(out, "{q}").expect("writing to a string cannot fail");
        for (idx, score) in ranked {
            write!(out, ",{idx},{score}").expect("writing to a string cannot fail");
        }
        out.push('\n');
    }
    std::fs::write(path, &out).map_err(|e| Error::io(path, e))
}

/// Writes the Hit@k map as `Hit@k: value` lines with two decimals.
pub fn write_metrics(path: &Path, hits: &BTreeMap<usize, f64>) -> Result<()> {
    let mut out = String::new();
    for (k, value) in hits {
        writeln!(out, "Hit@{k}: {value:.2}").expect("writing to a string cannot fail");
    }
    std::fs::write(path, &out).map_err(|e| Error::io(path, e))
}
