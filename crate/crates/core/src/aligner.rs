//! The full alignment loop: initialize the mixture weights and the coupling,
//! then alternate a projected gradient step on the weights with a
//! KL-proximal Sinkhorn step on the coupling until both step norms fall
//! below their thresholds.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array1;

use crate::bases::{build_bases, BasisOptions};
use crate::error::{Error, Result};
use crate::graph::{normalize_features, Graph};
use crate::gw::{Coupling, GwObjective, Weights};
use crate::solvers::{kl_prox_step, sinkhorn_scale, update_alpha, SinkhornSettings};

/// How the initial coupling is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    /// Independent coupling, `π_ij = 1/(nm)`.
    Uniform,
    /// Clamped feature similarity `relu(X_s X_tᵀ) + floor`, balanced to the
    /// marginals. Requires equal nonzero feature dimensions.
    FeatureSimilarity,
}

/// Settings for a full alignment run.
#[derive(Debug, Clone)]
pub struct AlignConfig {
    /// Number of structure bases per graph.
    pub num_bases: usize,
    /// Step size of the projected gradient update on the weights.
    pub tau: f64,
    /// Step size of the KL-proximal update on the coupling.
    pub eta: f64,
    /// Outer iteration budget.
    pub max_outer_iters: usize,
    /// Convergence threshold on the weight step, ∞-norm.
    pub eps_alpha: f64,
    /// Convergence threshold on the coupling step, Frobenius norm.
    pub eps_pi: f64,
    /// Initial coupling.
    pub init: InitMode,
    /// Skip the weight update, keeping the uniform mixture.
    pub freeze_weights: bool,
    /// Row-normalize features before building bases.
    pub normalize_features: bool,
    /// Edge views switch from dense to sparse storage above this node count.
    pub dense_threshold: usize,
    /// Inner Sinkhorn controls.
    pub sinkhorn: SinkhornSettings,
}

impl AlignConfig {
    /// Defaults used for the semi-synthetic benchmarks: two bases, τ = 0.1.
    pub fn semi_synthetic() -> Self {
        AlignConfig {
            num_bases: 2,
            tau: 0.1,
            eta: 0.01,
            max_outer_iters: 500,
            eps_alpha: 1e-6,
            eps_pi: 1e-6,
            init: InitMode::FeatureSimilarity,
            freeze_weights: false,
            normalize_features: true,
            dense_threshold: BasisOptions::default().dense_threshold,
            sinkhorn: SinkhornSettings::default(),
        }
    }

    /// Defaults used for real-world graphs: four bases, τ = 1.
    pub fn real_world() -> Self {
        AlignConfig {
            num_bases: 4,
            tau: 1.0,
            ..AlignConfig::semi_synthetic()
        }
    }

    /// Checks the numeric invariants of the configuration.
    pub fn validate(&self) -> Result<()> {
        if self.num_bases < 1 {
            return Err(Error::InvalidConfig("need at least one structure basis".into()));
        }
        if self.max_outer_iters < 1 {
            return Err(Error::InvalidConfig("need at least one outer iteration".into()));
        }
        for (name, value) in [
            ("tau", self.tau),
            ("eta", self.eta),
            ("eps_alpha", self.eps_alpha),
            ("eps_pi", self.eps_pi),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive and finite, got {value}"
                )));
            }
        }
        Ok(())
    }
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig::semi_synthetic()
    }
}

/// One recorded outer iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    /// Outer iteration number; 0 is the initial point.
    pub iteration: usize,
    /// Objective value after the iteration's updates.
    pub objective: f64,
    /// ∞-norm of the weight change.
    pub alpha_step: f64,
    /// Frobenius norm of the coupling change.
    pub pi_step: f64,
}

/// Mutable state of an alignment run.
#[derive(Debug)]
pub struct AlignState {
    problem: GwObjective,
    coupling: Coupling,
    weights: Weights,
    trace: Vec<TracePoint>,
    iteration: usize,
    converged: bool,
}

impl AlignState {
    /// The objective this run optimizes.
    pub fn problem(&self) -> &GwObjective {
        &self.problem
    }

    /// Current coupling.
    pub fn coupling(&self) -> &Coupling {
        &self.coupling
    }

    /// Current mixture weights.
    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    /// Objective and step norms per outer iteration, starting at iteration 0.
    pub fn trace(&self) -> &[TracePoint] {
        &self.trace
    }

    /// Number of outer iterations taken so far.
    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// Whether the last step fell below both convergence thresholds.
    pub fn converged(&self) -> bool {
        self.converged
    }

    /// Replaces the coupling's plan, keeping the marginals. The trace is
    /// rewound to this point as a fresh initial value.
    pub fn set_plan(&mut self, plan: ndarray::Array2<f64>) -> Result<()> {
        if plan.dim() != self.coupling.plan().dim() {
            return Err(Error::DimensionMismatch(format!(
                "plan is {:?} but the problem needs {:?}",
                plan.dim(),
                self.coupling.plan().dim()
            )));
        }
        self.coupling =
            Coupling::new(plan, self.coupling.mu().to_owned(), self.coupling.nu().to_owned())?;
        let objective = self.problem.objective(&self.coupling, &self.weights)?;
        self.iteration = 0;
        self.converged = false;
        self.trace = vec![TracePoint {
            iteration: 0,
            objective,
            alpha_step: 0.0,
            pi_step: 0.0,
        }];
        Ok(())
    }
}

/// Builds the bases and the objective and records the starting point.
pub fn initialize(g_s: &Graph, g_t: &Graph, cfg: &AlignConfig) -> Result<AlignState> {
    cfg.validate()?;
    let (n, m) = (g_s.n(), g_t.n());
    if n == 0 || m == 0 {
        return Err(Error::InvalidConfig("cannot align an empty graph".into()));
    }
    let opts = BasisOptions {
        normalize_features: cfg.normalize_features,
        dense_threshold: cfg.dense_threshold,
    };
    let bases_s = build_bases(g_s, cfg.num_bases, &opts)?;
    let bases_t = build_bases(g_t, cfg.num_bases, &opts)?;
    let mu = Array1::from_elem(n, 1.0 / n as f64);
    let nu = Array1::from_elem(m, 1.0 / m as f64);
    let coupling = match cfg.init {
        InitMode::Uniform => Coupling::uniform(n, m),
        InitMode::FeatureSimilarity => {
            feature_similarity_init(g_s, g_t, &mu, &nu, &cfg.sinkhorn)?
        }
    };
    let weights = Weights::uniform(cfg.num_bases, cfg.num_bases);
    let problem = GwObjective::new(bases_s, bases_t, &mu.view(), &nu.view())?;
    let objective = problem.objective(&coupling, &weights)?;
    Ok(AlignState {
        problem,
        coupling,
        weights,
        trace: vec![TracePoint {
            iteration: 0,
            objective,
            alpha_step: 0.0,
            pi_step: 0.0,
        }],
        iteration: 0,
        converged: false,
    })
}

fn feature_similarity_init(
    g_s: &Graph,
    g_t: &Graph,
    mu: &Array1<f64>,
    nu: &Array1<f64>,
    settings: &SinkhornSettings,
) -> Result<Coupling> {
    let d = g_s.feature_dim();
    if d == 0 || g_t.feature_dim() != d {
        return Err(Error::DimensionMismatch(format!(
            "feature-similarity initialization needs equal nonzero feature \
             dimensions, got {} and {}",
            d,
            g_t.feature_dim()
        )));
    }
    let xs = normalize_features(&g_s.features());
    let xt = normalize_features(&g_t.features());
    let mut kernel = xs.dot(&xt.t());
    kernel.mapv_inplace(|v| v.max(0.0) + settings.floor);
    let plan = sinkhorn_scale(&kernel, &mu.view(), &nu.view(), settings)?;
    Coupling::new(plan, mu.clone(), nu.clone())
}

/// One outer iteration: weight update with the old coupling, then coupling
/// update with the new weights. Appends to the trace and sets the
/// convergence flag from the two step norms.
pub fn step(state: &mut AlignState, cfg: &AlignConfig) -> Result<()> {
    let alpha_step = if cfg.freeze_weights {
        0.0
    } else {
        let grad = state.problem.grad_alpha(&state.coupling, &state.weights)?;
        let next = update_alpha(&state.weights, &grad.view(), cfg.tau)?;
        let step = next
            .as_alpha()
            .iter()
            .zip(state.weights.as_alpha().iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        state.weights = next;
        step
    };
    let grad = state.problem.grad_pi(&state.coupling, &state.weights)?;
    let next = kl_prox_step(&state.coupling, &grad.view(), cfg.eta, &cfg.sinkhorn)?;
    let pi_step = {
        let diff = &next.plan() - &state.coupling.plan();
        diff.iter().map(|v| v * v).sum::<f64>().sqrt()
    };
    state.coupling = next;
    state.iteration += 1;
    let objective = state.problem.objective(&state.coupling, &state.weights)?;
    state.trace.push(TracePoint {
        iteration: state.iteration,
        objective,
        alpha_step,
        pi_step,
    });
    state.converged = alpha_step < cfg.eps_alpha && pi_step < cfg.eps_pi;
    Ok(())
}

/// Runs the full loop: initialize, then step until convergence or the
/// iteration budget. Non-convergence is not an error; the returned state
/// carries the final coupling with `converged() == false`.
pub fn run(g_s: &Graph, g_t: &Graph, cfg: &AlignConfig) -> Result<AlignState> {
    let mut state = initialize(g_s, g_t, cfg)?;
    for _ in 0..cfg.max_outer_iters {
        step(&mut state, cfg)?;
        if state.converged {
            break;
        }
    }
    Ok(state)
}

/// Writes the trace as CSV with columns
/// `iteration,objective,alpha_step_norm,pi_step_norm`.
pub fn write_trace(path: &Path, trace: &[TracePoint]) -> Result<()> {
    let mut out = String::from("iteration,objective,alpha_step_norm,pi_step_norm\n");
    for p in trace {
        writeln!(out, "{},{},{},{}", p.iteration, p.objective, p.alpha_step, p.pi_step)
            .expect("writing to a string cannot fail");
    }
    std::fs::write(path, &out).map_err(|e| Error::io(path, e))
}
