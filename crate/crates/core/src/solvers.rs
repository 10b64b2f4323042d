//! Optimization primitives: simplex projection, the projected weight step,
//! and the KL-proximal coupling step solved by Sinkhorn scaling.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::gw::{Coupling, Weights};

/// Controls for the inner Sinkhorn scaling loop.
#[derive(Debug, Clone)]
pub struct SinkhornSettings {
    /// Maximum scaling iterations per solve.
    pub max_iters: usize,
    /// Largest allowed marginal violation of the returned plan.
    pub tolerance: f64,
    /// Force the log-domain implementation. The dense implementation is used
    /// otherwise, with an automatic switch to log-domain on underflow or
    /// overflow.
    pub log_domain: bool,
    /// Plan entries are clamped to at least this value before the kernel
    /// exponent or logarithm is taken.
    pub floor: f64,
}

impl Default for SinkhornSettings {
    fn default() -> Self {
        SinkhornSettings {
            max_iters: 200,
            tolerance: 1e-6,
            log_domain: false,
            floor: 1e-30,
        }
    }
}

/// Euclidean projection onto the probability simplex, by the sorting method:
/// find the largest prefix of the sorted entries with a positive shifted
/// value, subtract the prefix threshold, and clip.
pub fn project_simplex(v: &ArrayView1<f64>) -> Array1<f64> {
    let k = v.len();
    if k == 0 {
        return Array1::zeros(0);
    }
    let mut sorted: Vec<f64> = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &s) in sorted.iter().enumerate() {
        cumsum += s;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if s - t > 0.0 {
            theta = t;
        }
    }
    v.mapv(|x| (x - theta).max(0.0))
}

/// Projected gradient step on the concatenated mixture weights
/// `α = [β_s, β_t]`: each half takes the step `β − τ g` and is projected back
/// onto its own simplex.
pub fn update_alpha(w: &Weights, grad: &ArrayView1<f64>, tau: f64) -> Result<Weights> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "weight step size must be positive and finite, got {tau}"
        )));
    }
    let k_s = w.beta_s().len();
    let k_t = w.beta_t().len();
    if grad.len() != k_s + k_t {
        return Err(Error::DimensionMismatch(format!(
            "gradient of length {} for {} + {} weights",
            grad.len(),
            k_s,
            k_t
        )));
    }
    let step_s = &w.beta_s() - &(tau * &grad.slice(ndarray::s![..k_s]));
    let step_t = &w.beta_t() - &(tau * &grad.slice(ndarray::s![k_s..]));
    Weights::new(
        project_simplex(&step_s.view()),
        project_simplex(&step_t.view()),
    )
}

/// KL-proximal step on the coupling. Minimizes
/// `⟨g, π⟩ + KL(π ‖ π_prev) / η` over couplings with the prescribed
/// marginals; the minimizer is the Sinkhorn balancing of the kernel
/// `π_prev ⊙ exp(−η g)`.
pub fn kl_prox_step(
    prev: &Coupling,
    grad: &ArrayView2<f64>,
    eta: f64,
    settings: &SinkhornSettings,
) -> Result<Coupling> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "coupling step size must be positive and finite, got {eta}"
        )));
    }
    if grad.dim() != prev.plan().dim() {
        return Err(Error::DimensionMismatch(format!(
            "gradient is {:?} but the coupling is {:?}",
            grad.dim(),
            prev.plan().dim()
        )));
    }
    if grad.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("coupling gradient has non-finite entries".into()));
    }
    let mut kernel = prev.plan().to_owned();
    kernel.zip_mut_with(grad, |p, g| {
        *p = p.max(settings.floor) * (-eta * g).exp();
    });
    let plan = sinkhorn_scale(&kernel, &prev.mu(), &prev.nu(), settings)?;
    Coupling::new(plan, prev.mu().to_owned(), prev.nu().to_owned())
}

/// Balances a positive kernel to the prescribed marginals by diagonal
/// scaling. Falls back to log-domain scaling when the kernel or the scaling
/// vectors leave the dense range.
pub(crate) fn sinkhorn_scale(
    kernel: &Array2<f64>,
    mu: &ArrayView1<f64>,
    nu: &ArrayView1<f64>,
    settings: &SinkhornSettings,
) -> Result<Array2<f64>> {
    let well_scaled = kernel.iter().all(|v| v.is_finite() && *v > 0.0);
    if settings.log_domain || !well_scaled {
        let log_kernel = kernel.mapv(|v| v.max(settings.floor).ln());
        return sinkhorn_log(&log_kernel, mu, nu, settings);
    }
    match sinkhorn_dense(kernel, mu, nu, settings) {
        DenseOutcome::Converged(plan) => Ok(plan),
        DenseOutcome::Diverged => {
            let log_kernel = kernel.mapv(|v| v.max(settings.floor).ln());
            sinkhorn_log(&log_kernel, mu, nu, settings)
        }
        DenseOutcome::OutOfIterations { residual } => Err(Error::SinkhornDidNotConverge {
            iterations: settings.max_iters,
            tolerance: settings.tolerance,
            residual,
        }),
    }
}

enum DenseOutcome {
    Converged(Array2<f64>),
    Diverged,
    OutOfIterations { residual: f64 },
}

fn sinkhorn_dense(
    kernel: &Array2<f64>,
    mu: &ArrayView1<f64>,
    nu: &ArrayView1<f64>,
    settings: &SinkhornSettings,
) -> DenseOutcome {
    let mut u: Array1<f64>;
    let mut v = Array1::ones(kernel.ncols());
    let mut kv = kernel.dot(&v);
    let mut residual = f64::INFINITY;
    for _ in 0..settings.max_iters {
        u = mu / &kv;
        let ktu = kernel.t().dot(&u);
        v = nu / &ktu;
        kv = kernel.dot(&v);
        if u.iter().any(|x| !x.is_finite()) || v.iter().any(|x| !x.is_finite()) {
            return DenseOutcome::Diverged;
        }
        // Column sums are exact right after the v-update, so the row sums
        // u_i (K v)_i carry the whole violation.
        residual = u
            .iter()
            .zip(kv.iter())
            .zip(mu.iter())
            .map(|((ui, kvi), mi)| (ui * kvi - mi).abs())
            .fold(0.0f64, f64::max);
        if residual <= settings.tolerance {
            let mut plan = kernel.clone();
            for ((i, j), p) in plan.indexed_iter_mut() {
                *p *= u[i] * v[j];
            }
            return DenseOutcome::Converged(plan);
        }
    }
    DenseOutcome::OutOfIterations { residual }
}

fn logsumexp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

fn sinkhorn_log(
    log_kernel: &Array2<f64>,
    mu: &ArrayView1<f64>,
    nu: &ArrayView1<f64>,
    settings: &SinkhornSettings,
) -> Result<Array2<f64>> {
    let (n, m) = log_kernel.dim();
    let log_mu = mu.mapv(f64::ln);
    let log_nu = nu.mapv(f64::ln);
    let mut f = Array1::zeros(n);
    let mut g = Array1::zeros(m);
    let mut residual = f64::INFINITY;
    for _ in 0..settings.max_iters {
        for i in 0..n {
            let row = log_kernel.row(i);
            f[i] = log_mu[i] - logsumexp(row.iter().zip(g.iter()).map(|(l, gj)| l + gj));
        }
        for j in 0..m {
            let col = log_kernel.column(j);
            g[j] = log_nu[j] - logsumexp(col.iter().zip(f.iter()).map(|(l, fi)| l + fi));
        }
        residual = (0..n)
            .map(|i| {
                let row = log_kernel.row(i);
                let log_row_sum =
                    f[i] + logsumexp(row.iter().zip(g.iter()).map(|(l, gj)| l + gj));
                (log_row_sum.exp() - mu[i]).abs()
            })
            .fold(0.0f64, f64::max);
        if residual <= settings.tolerance {
            let mut plan = log_kernel.clone();
            for ((i, j), p) in plan.indexed_iter_mut() {
                *p = (*p + f[i] + g[j]).exp();
            }
            return Ok(plan);
        }
    }
    Err(Error::SinkhornDidNotConverge {
        iterations: settings.max_iters,
        tolerance: settings.tolerance,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn project_simplex_matches_worked_example() {
        let p = project_simplex(&array![0.6, 0.8].view());
        assert_abs_diff_eq!(p, array![0.4, 0.6], epsilon = 1e-12);
    }

    #[test]
    fn project_simplex_is_identity_on_the_simplex() {
        let v = array![0.2, 0.5, 0.3];
        assert_abs_diff_eq!(project_simplex(&v.view()), v, epsilon = 1e-12);
    }

    #[test]
    fn project_simplex_handles_single_entry_and_dominant_entry() {
        assert_eq!(project_simplex(&array![42.0].view()), array![1.0]);
        let p = project_simplex(&array![10.0, -10.0].view());
        assert_abs_diff_eq!(p, array![1.0, 0.0], epsilon = 1e-12);
    }

    #[test]
    fn update_alpha_matches_worked_example() {
        let w = Weights::uniform(2, 2);
        let grad = array![1.0, -1.0, 0.0, 0.0];
        let next = update_alpha(&w, &grad.view(), 0.25).unwrap();
        assert_abs_diff_eq!(next.beta_s().to_owned(), array![0.25, 0.75], epsilon = 1e-12);
        assert_abs_diff_eq!(next.beta_t().to_owned(), array![0.5, 0.5], epsilon = 1e-12);
    }

    #[test]
    fn update_alpha_rejects_bad_steps() {
        let w = Weights::uniform(2, 2);
        let grad = array![0.0, 0.0, 0.0, 0.0];
        assert!(update_alpha(&w, &grad.view(), 0.0).is_err());
        assert!(update_alpha(&w, &grad.view(), f64::NAN).is_err());
        assert!(update_alpha(&w, &array![0.0, 0.0].view(), 0.1).is_err());
    }

    #[test]
    fn kl_prox_step_keeps_a_balanced_plan() {
        let c = Coupling::uniform(3, 4);
        let zero = Array2::zeros((3, 4));
        let next = kl_prox_step(&c, &zero.view(), 0.01, &SinkhornSettings::default()).unwrap();
        assert_abs_diff_eq!(next.plan().to_owned(), c.plan().to_owned(), epsilon = 1e-12);
    }

    #[test]
    fn kl_prox_step_balances_the_two_by_two_kernel() {
        // Prox center [[2,1],[1,2]] (any positive scale) with zero gradient
        // balances to [[1/3, 1/6], [1/6, 1/3]] for uniform marginals.
        let plan = array![[2.0, 1.0], [1.0, 2.0]];
        let c = Coupling::new(plan, array![0.5, 0.5], array![0.5, 0.5]).unwrap();
        let zero = Array2::zeros((2, 2));
        let next = kl_prox_step(&c, &zero.view(), 1.0, &SinkhornSettings::default()).unwrap();
        let expected = array![
            [1.0 / 3.0, 1.0 / 6.0],
            [1.0 / 6.0, 1.0 / 3.0]
        ];
        assert_abs_diff_eq!(next.plan().to_owned(), expected, epsilon = 1e-10);
    }

    #[test]
    fn uniform_kernel_balances_to_independent_coupling() {
        let plan = Array2::from_elem((3, 5), 0.7);
        let c = Coupling::new(
            plan,
            Array1::from_elem(3, 1.0 / 3.0),
            Array1::from_elem(5, 0.2),
        )
        .unwrap();
        let next = kl_prox_step(&c, &Array2::zeros((3, 5)).view(), 0.5, &SinkhornSettings::default())
            .unwrap();
        assert_abs_diff_eq!(
            next.plan().to_owned(),
            Array2::from_elem((3, 5), 1.0 / 15.0),
            epsilon = 1e-12
        );
    }

    #[test]
    fn dense_and_log_domain_agree() {
        let plan = array![
            [0.30, 0.05, 0.15],
            [0.10, 0.20, 0.20]
        ];
        let c = Coupling::new(plan, array![0.5, 0.5], array![0.4, 0.25, 0.35]).unwrap();
        let grad = array![[1.0, -2.0, 0.5], [0.0, 3.0, -1.0]];
        let tight = SinkhornSettings {
            tolerance: 1e-12,
            max_iters: 5000,
            ..SinkhornSettings::default()
        };
        let dense = kl_prox_step(&c, &grad.view(), 0.7, &tight).unwrap();
        let log = kl_prox_step(
            &c,
            &grad.view(),
            0.7,
            &SinkhornSettings {
                log_domain: true,
                ..tight
            },
        )
        .unwrap();
        assert_abs_diff_eq!(dense.plan().to_owned(), log.plan().to_owned(), epsilon = 1e-8);
    }

    #[test]
    fn underflowing_kernel_switches_to_log_domain() {
        let c = Coupling::uniform(2, 2);
        // exp(-eta g) underflows to zero in dense arithmetic for g = 1e6.
        let grad = array![[1e6, 0.0], [0.0, 1e6]];
        let next = kl_prox_step(&c, &grad.view(), 1.0, &SinkhornSettings::default()).unwrap();
        assert!(next.marginal_residual() <= 1e-6);
        // The anti-diagonal carries essentially all the mass.
        assert!(next.plan()[[0, 1]] > 0.49);
        assert!(next.plan()[[1, 0]] > 0.49);
    }

    #[test]
    fn non_convergence_is_reported_with_residual() {
        let plan = array![[1.0, 1e-14], [1e-14, 1.0]];
        let c = Coupling::new(plan, array![0.3, 0.7], array![0.7, 0.3]).unwrap();
        let settings = SinkhornSettings {
            max_iters: 2,
            tolerance: 1e-14,
            ..SinkhornSettings::default()
        };
        let err = kl_prox_step(&c, &Array2::zeros((2, 2)).view(), 1.0, &settings).unwrap_err();
        assert!(matches!(err, Error::SinkhornDidNotConverge { .. }), "{err}");
    }

    #[test]
    fn kl_prox_step_decreases_the_surrogate() {
        // The step must not increase ⟨g, π⟩ + KL(π ‖ π_prev)/η, whose value
        // at π_prev itself is ⟨g, π_prev⟩.
        let plan = array![
            [0.20, 0.15, 0.15],
            [0.10, 0.25, 0.15]
        ];
        let c = Coupling::new(plan, array![0.5, 0.5], array![0.3, 0.4, 0.3]).unwrap();
        let grad = array![[0.5, -1.5, 2.0], [-0.25, 1.0, 0.75]];
        let eta = 0.3;
        let next = kl_prox_step(&c, &grad.view(), eta, &SinkhornSettings::default()).unwrap();
        let lin_prev: f64 = (&c.plan() * &grad.view()).sum();
        let lin_next: f64 = (&next.plan() * &grad.view()).sum();
        let kl: f64 = next
            .plan()
            .iter()
            .zip(c.plan().iter())
            .map(|(p, q)| p * (p / q).ln() - p + q)
            .sum();
        assert!(lin_next + kl / eta <= lin_prev + 1e-9);
    }

    proptest! {
        #[test]
        fn projection_lands_on_the_simplex(v in proptest::collection::vec(-3.0..3.0f64, 1..12)) {
            let p = project_simplex(&Array1::from_vec(v).view());
            prop_assert!(p.iter().all(|x| *x >= 0.0));
            prop_assert!((p.sum() - 1.0).abs() < 1e-9);
            let again = project_simplex(&p.view());
            for (a, b) in p.iter().zip(again.iter()) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn projection_commutes_with_permutation(v in proptest::collection::vec(-3.0..3.0f64, 2..10), shift in 0usize..10) {
            let k = v.len();
            let rotated: Vec<f64> = (0..k).map(|i| v[(i + shift) % k]).collect();
            let p = project_simplex(&Array1::from_vec(v.clone()).view());
            let pr = project_simplex(&Array1::from_vec(rotated).view());
            for i in 0..k {
                prop_assert!((p[(i + shift) % k] - pr[i]).abs() < 1e-9);
            }
        }

        #[test]
        fn sinkhorn_balances_random_positive_kernels(
            seed in 0u64..500,
            n in 1usize..8,
            m in 1usize..8,
        ) {
            use rand::{RngExt, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let plan = Array2::from_shape_fn((n, m), |_| rng.random_range(0.05..1.0f64));
            let c = Coupling::new(
                plan,
                Array1::from_elem(n, 1.0 / n as f64),
                Array1::from_elem(m, 1.0 / m as f64),
            ).unwrap();
            let grad = Array2::from_shape_fn((n, m), |_| rng.random_range(-1.0..1.0f64));
            let next = kl_prox_step(&c, &grad.view(), 0.5, &SinkhornSettings::default()).unwrap();
            prop_assert!(next.marginal_residual() <= 1e-6);
            prop_assert!(next.plan().iter().all(|p| *p >= 0.0));
        }
    }
}
