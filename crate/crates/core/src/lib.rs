//! Unsupervised attributed graph alignment.
//!
//! The library aligns two attributed graphs without supervision by jointly
//! learning a structure matrix for each graph (a convex combination of an
//! edge view, a node-feature view, and propagated subgraph views) and a
//! Gromov-Wasserstein coupling between the two node sets. Alternating
//! proximal updates move the mixture weights by projected gradient steps and
//! the coupling by KL-proximal Sinkhorn steps.
//!
//! Modules mirror the pipeline: [`graph`] holds graphs and file formats,
//! [`bases`] builds the structure views, [`gw`] evaluates the objective and
//! its gradients, [`solvers`] hosts the simplex projection and Sinkhorn
//! scaling primitives, [`aligner`] runs the alternating loop, [`matching`]
//! turns couplings into node matchings and metrics, and [`perturb`] generates
//! the semi-synthetic robustness benchmarks.

pub mod aligner;
pub mod bases;
pub mod error;
pub mod graph;
pub mod gw;
pub mod matching;
pub mod perturb;
pub mod solvers;
pub mod sparse;

pub use aligner::{initialize, run, step, write_trace, AlignConfig, AlignState, InitMode, TracePoint};
pub use bases::{build_bases, normalized_adjacency, BasisOptions, StructureBasis, StructureBasisSet};
pub use error::{Error, Result};
pub use graph::{load_anchors, load_graph, normalize_features, save_anchors, save_graph, AnchorSet, Graph};
pub use gw::{mix, Coupling, GwObjective, Weights};
pub use matching::{
    extract_one_to_one, hit_at_k, hit_at_k_directed, knn_align, rank_candidates, write_matches,
    write_metrics, AlignmentResult, Direction, ExtractMode,
};
pub use perturb::{
    apply, compress_features, derive_seed, make_target, make_target_with_permutation,
    perturb_edges, permute_features, truncate_features, FeatureOp, PerturbSpec,
};
pub use solvers::{kl_prox_step, project_simplex, update_alpha, SinkhornSettings};
