//! The Gromov-Wasserstein objective over learned structure mixtures.
//!
//! For structure matrices `D_s`, `D_t` and a coupling `π` with marginals
//! `(μ, ν)`, the objective is
//!
//! ```text
//! F = Σ_ij D_s(i,j)² μ_i μ_j + Σ_kl D_t(k,l)² ν_k ν_l − 2 tr(D_s π D_t πᵀ)
//! ```
//!
//! which equals the usual quadruple sum Σ |D_s(i,j) − D_t(k,l)|² π_ik π_jl
//! whenever π has marginals (μ, ν). Each structure matrix is a convex
//! combination `D = Σ_q β_q D^(q)` of the graph's views, so the two constant
//! terms are quadratic forms over precomputed Gram matrices of the views and
//! the cross term is evaluated through thin factored products; nothing here
//! densifies an `n x n` view.
//!
//! All products accumulate in a fixed index order, so evaluations are
//! deterministic on identical inputs.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::bases::{StructureBasis, StructureBasisSet};
use crate::error::{Error, Result};

/// A transport plan between two node sets together with its prescribed
/// marginals.
#[derive(Debug, Clone)]
pub struct Coupling {
    plan: Array2<f64>,
    mu: Array1<f64>,
    nu: Array1<f64>,
}

impl Coupling {
    pub fn new(plan: Array2<f64>, mu: Array1<f64>, nu: Array1<f64>) -> Result<Self> {
        if plan.nrows() != mu.len() || plan.ncols() != nu.len() {
            return Err(Error::DimensionMismatch(format!(
                "plan is {}x{} but marginals have lengths {} and {}",
                plan.nrows(),
                plan.ncols(),
                mu.len(),
                nu.len()
            )));
        }
        Ok(Coupling { plan, mu, nu })
    }

    /// The independent coupling of uniform marginals: every entry `1/(n m)`.
    pub fn uniform(n: usize, m: usize) -> Self {
        Coupling {
            plan: Array2::from_elem((n, m), 1.0 / (n as f64 * m as f64)),
            mu: Array1::from_elem(n, 1.0 / n as f64),
            nu: Array1::from_elem(m, 1.0 / m as f64),
        }
    }

    pub fn plan(&self) -> ArrayView2<'_, f64> {
        self.plan.view()
    }

    pub fn mu(&self) -> ArrayView1<'_, f64> {
        self.mu.view()
    }

    pub fn nu(&self) -> ArrayView1<'_, f64> {
        self.nu.view()
    }

    /// Largest absolute violation of the prescribed marginals.
    pub fn marginal_residual(&self) -> f64 {
        let rows = self.plan.sum_axis(ndarray::Axis(1));
        let cols = self.plan.sum_axis(ndarray::Axis(0));
        let r = rows
            .iter()
            .zip(self.mu.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        let c = cols
            .iter()
            .zip(self.nu.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        r.max(c)
    }

    /// Checks the marginal constraints up to `tol` and nonnegativity.
    pub fn validate(&self, tol: f64) -> Result<()> {
        if self.plan.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidConfig(
                "coupling has negative or non-finite entries".into(),
            ));
        }
        let residual = self.marginal_residual();
        if residual > tol {
            return Err(Error::InvalidConfig(format!(
                "coupling marginals are off by {residual:e}, more than the allowed {tol:e}"
            )));
        }
        Ok(())
    }
}

/// Mixture weights for the two structure families, each on its own simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    beta_s: Array1<f64>,
    beta_t: Array1<f64>,
}

impl Weights {
    const SIMPLEX_TOL: f64 = 1e-9;

    pub fn new(beta_s: Array1<f64>, beta_t: Array1<f64>) -> Result<Self> {
        for (name, beta) in [("source", &beta_s), ("target", &beta_t)] {
            if beta.is_empty() {
                return Err(Error::InvalidConfig(format!("{name} weights are empty")));
            }
            if beta.iter().any(|v| *v < -Self::SIMPLEX_TOL || !v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "{name} weights must be nonnegative"
                )));
            }
            let sum: f64 = beta.sum();
            if (sum - 1.0).abs() > Self::SIMPLEX_TOL {
                return Err(Error::InvalidConfig(format!(
                    "{name} weights sum to {sum}, expected 1"
                )));
            }
        }
        Ok(Weights { beta_s, beta_t })
    }

    /// Skips the simplex checks. Useful for evaluating the objective at
    /// off-simplex points, e.g. finite-difference probes.
    pub fn new_unchecked(beta_s: Array1<f64>, beta_t: Array1<f64>) -> Self {
        Weights { beta_s, beta_t }
    }

    /// Uniform weights `1/k` on both simplices.
    pub fn uniform(k_s: usize, k_t: usize) -> Self {
        Weights {
            beta_s: Array1::from_elem(k_s, 1.0 / k_s as f64),
            beta_t: Array1::from_elem(k_t, 1.0 / k_t as f64),
        }
    }

    pub fn beta_s(&self) -> ArrayView1<'_, f64> {
        self.beta_s.view()
    }

    pub fn beta_t(&self) -> ArrayView1<'_, f64> {
        self.beta_t.view()
    }

    /// Concatenates both weight vectors into one `α = [β_s, β_t]`.
    pub fn as_alpha(&self) -> Array1<f64> {
        let mut alpha = Array1::zeros(self.beta_s.len() + self.beta_t.len());
        alpha
            .slice_mut(ndarray::s![..self.beta_s.len()])
            .assign(&self.beta_s);
        alpha
            .slice_mut(ndarray::s![self.beta_s.len()..])
            .assign(&self.beta_t);
        alpha
    }

    /// Splits a concatenated `α` back into the two weight vectors.
    pub fn from_alpha(alpha: &ArrayView1<f64>, k_s: usize) -> Result<Self> {
        if alpha.len() <= k_s {
            return Err(Error::DimensionMismatch(format!(
                "alpha has length {} but the source family alone has {k_s} views",
                alpha.len()
            )));
        }
        Ok(Weights {
            beta_s: alpha.slice(ndarray::s![..k_s]).to_owned(),
            beta_t: alpha.slice(ndarray::s![k_s..]).to_owned(),
        })
    }
}

/// A convex combination of structure views, applied lazily.
pub struct MixedCost<'a> {
    bases: &'a StructureBasisSet,
    beta: Array1<f64>,
}

impl MixedCost<'_> {
    /// Computes `D * rhs = Σ_q β_q (D^(q) * rhs)` one view at a time.
    /// Views with exactly zero weight are skipped, so a vertex of the simplex
    /// reproduces that single view's product bit for bit.
    pub fn apply(&self, rhs: &ArrayView2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((self.bases.n(), rhs.ncols()));
        for (basis, &b) in self.bases.iter().zip(self.beta.iter()) {
            if b == 0.0 {
                continue;
            }
            out.scaled_add(b, &basis.apply(rhs));
        }
        out
    }

    /// Materializes the mixed matrix. Intended for small instances and tests.
    pub fn materialize(&self) -> Array2<f64> {
        let n = self.bases.n();
        let mut out = Array2::zeros((n, n));
        for (basis, &b) in self.bases.iter().zip(self.beta.iter()) {
            if b == 0.0 {
                continue;
            }
            out.scaled_add(b, &basis.materialize());
        }
        out
    }
}

/// Validates mixture weights against a basis family and pairs them lazily.
pub fn mix<'a>(bases: &'a StructureBasisSet, beta: &ArrayView1<f64>) -> Result<MixedCost<'a>> {
    if beta.len() != bases.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} structure views",
            beta.len(),
            bases.len()
        )));
    }
    if beta.iter().any(|v| *v < -1e-9 || !v.is_finite()) {
        return Err(Error::InvalidConfig("mixture weights must be nonnegative".into()));
    }
    let sum: f64 = beta.sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidConfig(format!(
            "mixture weights sum to {sum}, expected 1"
        )));
    }
    Ok(MixedCost {
        bases,
        beta: beta.to_owned(),
    })
}

fn mix_unchecked<'a>(bases: &'a StructureBasisSet, beta: &ArrayView1<f64>) -> MixedCost<'a> {
    MixedCost {
        bases,
        beta: beta.to_owned(),
    }
}

/// Pairwise marginal-weighted Frobenius inner products of a basis family:
/// `G[p][q] = Σ_ij D^(p)(i,j) D^(q)(i,j) w_i w_j`.
fn weighted_gram(bases: &StructureBasisSet, w: &Array1<f64>) -> Array2<f64> {
    let k = bases.len();
    let sqrt_w = w.mapv(f64::sqrt);
    let scaled: Vec<StructureBasis> = bases.iter().map(|b| b.scale_sym(&sqrt_w)).collect();
    let mut gram = Array2::zeros((k, k));
    for p in 0..k {
        for q in p..k {
            let v = scaled[p].frob_inner(&scaled[q]);
            gram[[p, q]] = v;
            gram[[q, p]] = v;
        }
    }
    gram
}

/// The objective, its gradients, and the cached per-family Gram matrices.
///
/// Owns both basis families; build it once per alignment problem.
#[derive(Debug, Clone)]
pub struct GwObjective {
    bases_s: StructureBasisSet,
    bases_t: StructureBasisSet,
    gram_s: Array2<f64>,
    gram_t: Array2<f64>,
}

impl GwObjective {
    pub fn new(
        bases_s: StructureBasisSet,
        bases_t: StructureBasisSet,
        mu: &ArrayView1<f64>,
        nu: &ArrayView1<f64>,
    ) -> Result<Self> {
        if mu.len() != bases_s.n() || nu.len() != bases_t.n() {
            return Err(Error::DimensionMismatch(format!(
                "marginals of lengths {} and {} for graphs of sizes {} and {}",
                mu.len(),
                nu.len(),
                bases_s.n(),
                bases_t.n()
            )));
        }
        let gram_s = weighted_gram(&bases_s, &mu.to_owned());
        let gram_t = weighted_gram(&bases_t, &nu.to_owned());
        Ok(GwObjective {
            bases_s,
            bases_t,
            gram_s,
            gram_t,
        })
    }

    pub fn bases_s(&self) -> &StructureBasisSet {
        &self.bases_s
    }

    pub fn bases_t(&self) -> &StructureBasisSet {
        &self.bases_t
    }

    fn check_shapes(&self, c: &Coupling, w: &Weights) -> Result<()> {
        if c.plan().nrows() != self.bases_s.n() || c.plan().ncols() != self.bases_t.n() {
            return Err(Error::DimensionMismatch(format!(
                "coupling is {}x{} but the graphs have {} and {} nodes",
                c.plan().nrows(),
                c.plan().ncols(),
                self.bases_s.n(),
                self.bases_t.n()
            )));
        }
        if w.beta_s.len() != self.bases_s.len() || w.beta_t.len() != self.bases_t.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} and {} weights for families of {} and {} views",
                w.beta_s.len(),
                w.beta_t.len(),
                self.bases_s.len(),
                self.bases_t.len()
            )));
        }
        Ok(())
    }

    /// `D_s π` and `π D_t`, the two thin products every term reuses.
    fn side_products(&self, c: &Coupling, w: &Weights) -> (Array2<f64>, Array2<f64>) {
        let mix_s = mix_unchecked(&self.bases_s, &w.beta_s.view());
        let mix_t = mix_unchecked(&self.bases_t, &w.beta_t.view());
        let left = mix_s.apply(&c.plan());
        let right = mix_t.apply(&c.plan().t()).t().to_owned();
        (left, right)
    }

    /// Objective value at `(π, α)`.
    pub fn objective(&self, c: &Coupling, w: &Weights) -> Result<f64> {
        self.check_shapes(c, w)?;
        let const_s = w.beta_s.dot(&self.gram_s.dot(&w.beta_s));
        let const_t = w.beta_t.dot(&self.gram_t.dot(&w.beta_t));
        let (left, right) = self.side_products(c, w);
        let cross = (&left * &right).sum();
        Ok(const_s + const_t - 2.0 * cross)
    }

    /// Gradient with respect to the coupling: `−4 D_s π D_t`.
    pub fn grad_pi(&self, c: &Coupling, w: &Weights) -> Result<Array2<f64>> {
        self.check_shapes(c, w)?;
        let mix_s = mix_unchecked(&self.bases_s, &w.beta_s.view());
        let mix_t = mix_unchecked(&self.bases_t, &w.beta_t.view());
        let right = mix_t.apply(&c.plan().t()).t().to_owned();
        let mut grad = mix_s.apply(&right.view());
        grad.mapv_inplace(|v| -4.0 * v);
        Ok(grad)
    }

    /// Gradient with respect to `α = [β_s, β_t]`:
    /// `∂F/∂β_s^(q) = 2 (G_s β_s)_q − 2 tr(D_s^(q) π D_t πᵀ)` and symmetrically
    /// for the target side.
    pub fn grad_alpha(&self, c: &Coupling, w: &Weights) -> Result<Array1<f64>> {
        self.check_shapes(c, w)?;
        let (k_s, k_t) = (self.bases_s.len(), self.bases_t.len());
        let mut grad = Array1::zeros(k_s + k_t);
        let (left, right) = self.side_products(c, w);
        let lin_s = self.gram_s.dot(&w.beta_s);
        for q in 0..k_s {
            let cross = (&self.bases_s.get(q).apply(&c.plan()) * &right).sum();
            grad[q] = 2.0 * lin_s[q] - 2.0 * cross;
        }
        let lin_t = self.gram_t.dot(&w.beta_t);
        for q in 0..k_t {
            let piq = self.bases_t.get(q).apply(&c.plan().t());
            let cross = (&left * &piq.t()).sum();
            grad[k_s + q] = 2.0 * lin_t[q] - 2.0 * cross;
        }
        Ok(grad)
    }
}

/// One-shot objective evaluation. Builds the Gram matrices on each call;
/// use [`GwObjective`] to amortize them across iterations.
pub fn objective(
    bases_s: &StructureBasisSet,
    bases_t: &StructureBasisSet,
    c: &Coupling,
    w: &Weights,
) -> Result<f64> {
    GwObjective::new(bases_s.clone(), bases_t.clone(), &c.mu(), &c.nu())?.objective(c, w)
}

/// One-shot coupling gradient. See [`GwObjective::grad_pi`].
pub fn grad_pi(
    bases_s: &StructureBasisSet,
    bases_t: &StructureBasisSet,
    c: &Coupling,
    w: &Weights,
) -> Result<Array2<f64>> {
    GwObjective::new(bases_s.clone(), bases_t.clone(), &c.mu(), &c.nu())?.grad_pi(c, w)
}

/// One-shot weight gradient. See [`GwObjective::grad_alpha`].
pub fn grad_alpha(
    bases_s: &StructureBasisSet,
    bases_t: &StructureBasisSet,
    c: &Coupling,
    w: &Weights,
) -> Result<Array1<f64>> {
    GwObjective::new(bases_s.clone(), bases_t.clone(), &c.mu(), &c.nu())?.grad_alpha(c, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bases::{build_bases, BasisOptions};
    use crate::graph::Graph;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};

    fn p3_bases(k: usize) -> StructureBasisSet {
        let g = Graph::new(3, vec![(0, 1), (1, 2)], Some(Array2::eye(3))).unwrap();
        build_bases(&g, k, &BasisOptions::default()).unwrap()
    }

    fn empty3_bases(k: usize) -> StructureBasisSet {
        let g = Graph::new(3, vec![], Some(Array2::zeros((3, 3)))).unwrap();
        build_bases(&g, k, &BasisOptions::default()).unwrap()
    }

    #[test]
    fn mix_at_vertex_reproduces_one_view() {
        let bases = p3_bases(2);
        let d = mix(&bases, &array![1.0, 0.0].view()).unwrap().materialize();
        assert_eq!(d, bases.get(0).materialize());
    }

    #[test]
    fn mix_averages_views() {
        let bases = p3_bases(2);
        let d = mix(&bases, &array![0.5, 0.5].view()).unwrap().materialize();
        let expected = (bases.get(0).materialize() + Array2::<f64>::eye(3)) * 0.5;
        assert_abs_diff_eq!(d, expected, epsilon = 1e-12);
    }

    #[test]
    fn mix_rejects_bad_weights() {
        let bases = p3_bases(2);
        assert!(mix(&bases, &array![0.0, 0.0].view()).is_err());
        assert!(mix(&bases, &array![0.5, 0.25, 0.25].view()).is_err());
        assert!(mix(&bases, &array![-0.2, 1.2].view()).is_err());
    }

    #[test]
    fn mix_apply_matches_materialized_product() {
        let bases = p3_bases(3);
        let m = mix(&bases, &array![0.2, 0.3, 0.5].view()).unwrap();
        let rhs = array![[1.0, 2.0], [0.5, -1.0], [0.0, 1.5]];
        assert_abs_diff_eq!(
            m.apply(&rhs.view()),
            m.materialize().dot(&rhs),
            epsilon = 1e-10
        );
    }

    #[test]
    fn objective_vanishes_for_identical_graphs_under_identity_coupling() {
        let bases = p3_bases(2);
        let w = Weights::uniform(2, 2);
        let plan = Array2::eye(3) / 3.0;
        let c = Coupling::new(
            plan,
            Array1::from_elem(3, 1.0 / 3.0),
            Array1::from_elem(3, 1.0 / 3.0),
        )
        .unwrap();
        let f = objective(&bases, &bases, &c, &w).unwrap();
        assert_abs_diff_eq!(f, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn objective_of_path_against_empty_graph_is_structure_mass() {
        // D_t = 0, so only Σ D_s(i,j)² μ_i μ_j = ||A||_F² / 9 = 4/9 remains.
        let g_s = Graph::new(3, vec![(0, 1), (1, 2)], None).unwrap();
        let bases_s = build_bases(&g_s, 1, &BasisOptions::default()).unwrap();
        let g_t = Graph::new(3, vec![], None).unwrap();
        let bases_t = build_bases(&g_t, 1, &BasisOptions::default()).unwrap();
        let plan = Array2::eye(3) / 3.0;
        let c = Coupling::new(
            plan,
            Array1::from_elem(3, 1.0 / 3.0),
            Array1::from_elem(3, 1.0 / 3.0),
        )
        .unwrap();
        let w = Weights::uniform(1, 1);
        let f = objective(&bases_s, &bases_t, &c, &w).unwrap();
        assert_abs_diff_eq!(f, 4.0 / 9.0, epsilon = 1e-12);
    }

    #[test]
    fn objective_on_single_nodes_is_squared_difference() {
        let g_s = Graph::new(1, vec![], Some(array![[2.0]])).unwrap();
        let g_t = Graph::new(1, vec![], Some(array![[0.5]])).unwrap();
        let opts = BasisOptions {
            normalize_features: false,
            ..BasisOptions::default()
        };
        // Node views are the 1x1 matrices [4.0] and [0.25].
        let bases_s = build_bases(&g_s, 2, &opts).unwrap();
        let bases_t = build_bases(&g_t, 2, &opts).unwrap();
        let c = Coupling::uniform(1, 1);
        let w = Weights::new(array![0.0, 1.0], array![0.0, 1.0]).unwrap();
        let f = objective(&bases_s, &bases_t, &c, &w).unwrap();
        assert_abs_diff_eq!(f, (4.0 - 0.25f64).powi(2), epsilon = 1e-12);
    }

    #[test]
    fn grad_pi_vanishes_against_zero_target() {
        let bases_s = p3_bases(1);
        let bases_t = empty3_bases(1);
        let c = Coupling::uniform(3, 3);
        let w = Weights::uniform(1, 1);
        let g = grad_pi(&bases_s, &bases_t, &c, &w).unwrap();
        assert_abs_diff_eq!(g, Array2::zeros((3, 3)), epsilon = 1e-15);
    }

    #[test]
    fn grad_pi_matches_identity_example() {
        // D_s = D_t = I and π = I/n give ∇_π = −4 D_s π D_t = −4 I / n.
        let bases = p3_bases(2);
        let w = Weights::new(array![0.0, 1.0], array![0.0, 1.0]).unwrap();
        let plan = Array2::eye(3) / 3.0;
        let c = Coupling::new(
            plan,
            Array1::from_elem(3, 1.0 / 3.0),
            Array1::from_elem(3, 1.0 / 3.0),
        )
        .unwrap();
        let g = grad_pi(&bases, &bases, &c, &w).unwrap();
        assert_abs_diff_eq!(g, Array2::eye(3) * (-4.0 / 3.0), epsilon = 1e-12);
    }

    #[test]
    fn grad_alpha_on_single_nodes_matches_closed_form() {
        let g_s = Graph::new(1, vec![], Some(array![[2.0]])).unwrap();
        let g_t = Graph::new(1, vec![], Some(array![[0.5]])).unwrap();
        let opts = BasisOptions {
            normalize_features: false,
            ..BasisOptions::default()
        };
        let bases_s = build_bases(&g_s, 2, &opts).unwrap();
        let bases_t = build_bases(&g_t, 2, &opts).unwrap();
        let c = Coupling::uniform(1, 1);
        let w = Weights::new(array![0.0, 1.0], array![0.0, 1.0]).unwrap();
        // F = (D_s − D_t)², so ∂F/∂β_s^(q) = 2 (D_s − D_t) D_s^(q).
        let g = grad_alpha(&bases_s, &bases_t, &c, &w).unwrap();
        let diff = 4.0 - 0.25;
        assert_abs_diff_eq!(g[0], 0.0, epsilon = 1e-12); // edge view is empty
        assert_abs_diff_eq!(g[1], 2.0 * diff * 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g[2], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g[3], -2.0 * diff * 0.25, epsilon = 1e-12);
    }

    #[test]
    fn objective_is_invariant_under_node_relabeling() {
        let g_s = Graph::new(
            4,
            vec![(0, 1), (1, 2), (2, 3)],
            Some(array![[1.0, 0.0], [0.5, 0.5], [0.0, 1.0], [0.25, 0.5]]),
        )
        .unwrap();
        let g_t = Graph::new(
            3,
            vec![(0, 1), (0, 2)],
            Some(array![[0.3, 0.7], [1.0, 0.0], [0.5, 0.5]]),
        )
        .unwrap();
        let sigma = [2usize, 0, 3, 1]; // source relabeling
        let rho = [1usize, 2, 0]; // target relabeling
        let gs_perm = relabel(&g_s, &sigma);
        let gt_perm = relabel(&g_t, &rho);

        let plan = array![
            [0.10, 0.05, 0.10],
            [0.05, 0.15, 0.05],
            [0.05, 0.05, 0.15],
            [0.1333333333333333, 0.0833333333333333, 0.0333333333333334]
        ];
        let mu = plan.sum_axis(ndarray::Axis(1));
        let nu = plan.sum_axis(ndarray::Axis(0));
        let mut plan_perm = Array2::zeros(plan.dim());
        for i in 0..4 {
            for j in 0..3 {
                plan_perm[[sigma[i], rho[j]]] = plan[[i, j]];
            }
        }
        let mut mu_perm = Array1::zeros(4);
        let mut nu_perm = Array1::zeros(3);
        for i in 0..4 {
            mu_perm[sigma[i]] = mu[i];
        }
        for j in 0..3 {
            nu_perm[rho[j]] = nu[j];
        }

        let opts = BasisOptions::default();
        let w = Weights::uniform(2, 2);
        let f = objective(
            &build_bases(&g_s, 2, &opts).unwrap(),
            &build_bases(&g_t, 2, &opts).unwrap(),
            &Coupling::new(plan, mu, nu).unwrap(),
            &w,
        )
        .unwrap();
        let f_perm = objective(
            &build_bases(&gs_perm, 2, &opts).unwrap(),
            &build_bases(&gt_perm, 2, &opts).unwrap(),
            &Coupling::new(plan_perm, mu_perm, nu_perm).unwrap(),
            &w,
        )
        .unwrap();
        assert_abs_diff_eq!(f, f_perm, epsilon = 1e-12);
    }

    fn relabel(g: &Graph, perm: &[usize]) -> Graph {
        let edges = g.edges().iter().map(|&(i, j)| (perm[i], perm[j])).collect();
        let mut x = Array2::zeros((g.n(), g.feature_dim()));
        for i in 0..g.n() {
            x.row_mut(perm[i]).assign(&g.features().row(i));
        }
        Graph::new(g.n(), edges, Some(x)).unwrap()
    }

    #[test]
    fn coupling_validation_catches_bad_marginals() {
        let c = Coupling::new(
            array![[0.5, 0.0], [0.0, 0.1]],
            array![0.5, 0.5],
            array![0.5, 0.5],
        )
        .unwrap();
        assert!(c.validate(1e-6).is_err());
        assert!(Coupling::uniform(2, 2).validate(1e-12).is_ok());
    }

    #[test]
    fn weights_validation_enforces_the_simplex() {
        assert!(Weights::new(array![0.5, 0.5], array![1.0]).is_ok());
        assert!(Weights::new(array![0.6, 0.5], array![1.0]).is_err());
        assert!(Weights::new(array![1.5, -0.5], array![1.0]).is_err());
        let w = Weights::uniform(2, 3);
        let alpha = w.as_alpha();
        assert_eq!(Weights::from_alpha(&alpha.view(), 2).unwrap(), w);
    }
}
