//! Classical outer loop: L-BFGS for noiseless compilation, Nelder-Mead for
//! noisy compilation, and deterministic multi-restart batches.

mod lbfgs;
mod nelder_mead;

use std::fmt::Write as _;
use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::CostEvaluator;
use crate::error::{Error, Result};
use crate::pauli::{wrap_angle, ParameterVector};
use crate::seed::{derive_seed, Stream};

pub use lbfgs::lbfgs_minimize;
pub use nelder_mead::nelder_mead_minimize;

/// Something to minimize.
pub trait Objective: Sync {
    fn n_params(&self) -> usize;

    fn value(&self, x: &[f64]) -> Result<f64>;

    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)>;

    /// Whether every coordinate is 2π-periodic, so iterates may be wrapped
    /// into `[−π, π]`.
    fn is_periodic(&self) -> bool {
        false
    }
}

impl Objective for CostEvaluator {
    fn n_params(&self) -> usize {
        CostEvaluator::n_params(self)
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.cost(&ParameterVector::new(x.to_vec()))
    }

    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.cost_and_gradient(&ParameterVector::new(x.to_vec()))
    }

    fn is_periodic(&self) -> bool {
        self.circuit().layer_time() == 1.0
    }
}

/// Wraps a plain closure pair as an [`Objective`].
pub struct FnObjective<F, G> {
    n: usize,
    f: F,
    grad: G,
}

impl<F, G> FnObjective<F, G>
where
    F: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64]) -> Vec<f64> + Sync,
{
    pub fn new(n: usize, f: F, grad: G) -> Self {
        Self { n, f, grad }
    }
}

impl<F, G> Objective for FnObjective<F, G>
where
    F: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64]) -> Vec<f64> + Sync,
{
    fn n_params(&self) -> usize {
        self.n
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok((self.f)(x))
    }

    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        Ok(((self.f)(x), (self.grad)(x)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitKind {
    /// `N(mean, sigma²)` per coordinate, clipped to `[clip_lo, clip_hi]`.
    GaussianClipped {
        mean: f64,
        sigma: f64,
        clip_lo: f64,
        clip_hi: f64,
    },
    /// Every draw returns these values.
    Fixed { values: Vec<f64> },
    /// `center + N(0, sigma²)` per coordinate, wrapped into `[−π, π]`.
    Perturbed { center: Vec<f64>, sigma: f64 },
}

/// Distribution of starting points; `seed` is the master seed of a batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitScheme {
    pub kind: InitKind,
    pub seed: u64,
}

impl Default for InitScheme {
    fn default() -> Self {
        Self::gaussian(0.5, 0)
    }
}

impl InitScheme {
    /// Zero-mean Gaussian clipped to `[−1, 1]`.
    pub fn gaussian(sigma: f64, seed: u64) -> Self {
        Self {
            kind: InitKind::GaussianClipped {
                mean: 0.0,
                sigma,
                clip_lo: -1.0,
                clip_hi: 1.0,
            },
            seed,
        }
    }

    pub fn fixed(values: Vec<f64>) -> Self {
        Self {
            kind: InitKind::Fixed { values },
            seed: 0,
        }
    }

    pub fn perturbed(center: Vec<f64>, sigma: f64, seed: u64) -> Self {
        Self {
            kind: InitKind::Perturbed { center, sigma },
            seed,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> ParameterVector {
        let values = match &self.kind {
            InitKind::GaussianClipped {
                mean,
                sigma,
                clip_lo,
                clip_hi,
            } => {
                if *sigma == 0.0 {
                    vec![mean.clamp(*clip_lo, *clip_hi); n]
                } else {
                    let normal = Normal::new(*mean, *sigma).expect("finite sigma");
                    (0..n)
                        .map(|_| normal.sample(rng).clamp(*clip_lo, *clip_hi))
                        .collect()
                }
            }
            InitKind::Fixed { values } => {
                assert_eq!(values.len(), n, "fixed init has the wrong length");
                values.clone()
            }
            InitKind::Perturbed { center, sigma } => {
                assert_eq!(center.len(), n, "perturbed init has the wrong length");
                if *sigma == 0.0 {
                    center.clone()
                } else {
                    let normal = Normal::new(0.0, *sigma).expect("finite sigma");
                    center
                        .iter()
                        .map(|c| wrap_angle(c + normal.sample(rng)))
                        .collect()
                }
            }
        };
        ParameterVector::new(values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Lbfgs,
    NelderMead,
}

/// Optimizer settings. When deserialized, omitted fields take the defaults
/// of the selected algorithm (e.g. `max_iters = 2000` for Nelder-Mead).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "PartialOptimizerConfig")]
pub struct OptimizerConfig {
    pub algorithm: Algorithm,
    pub max_iters: usize,
    pub cost_tolerance: f64,
    /// L-BFGS only.
    pub gradient_tolerance: f64,
    /// L-BFGS only.
    pub history_size: usize,
    /// Nelder-Mead only.
    pub simplex_init_step: f64,
    /// Nelder-Mead only: stop once `max f − min f` over the simplex drops below this.
    pub spread_tolerance: f64,
    pub restarts: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialOptimizerConfig {
    algorithm: Option<Algorithm>,
    max_iters: Option<usize>,
    cost_tolerance: Option<f64>,
    gradient_tolerance: Option<f64>,
    history_size: Option<usize>,
    simplex_init_step: Option<f64>,
    spread_tolerance: Option<f64>,
    restarts: Option<usize>,
}

impl From<PartialOptimizerConfig> for OptimizerConfig {
    fn from(p: PartialOptimizerConfig) -> Self {
        let base = match p.algorithm.unwrap_or(Algorithm::Lbfgs) {
            Algorithm::Lbfgs => Self::lbfgs(),
            Algorithm::NelderMead => Self::nelder_mead(),
        };
        Self {
            algorithm: base.algorithm,
            max_iters: p.max_iters.unwrap_or(base.max_iters),
            cost_tolerance: p.cost_tolerance.unwrap_or(base.cost_tolerance),
            gradient_tolerance: p.gradient_tolerance.unwrap_or(base.gradient_tolerance),
            history_size: p.history_size.unwrap_or(base.history_size),
            simplex_init_step: p.simplex_init_step.unwrap_or(base.simplex_init_step),
            spread_tolerance: p.spread_tolerance.unwrap_or(base.spread_tolerance),
            restarts: p.restarts.unwrap_or(base.restarts),
        }
    }
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self::lbfgs()
    }
}

impl OptimizerConfig {
    pub fn lbfgs() -> Self {
        Self {
            algorithm: Algorithm::Lbfgs,
            max_iters: 200,
            cost_tolerance: 1e-4,
            gradient_tolerance: 1e-8,
            history_size: 10,
            simplex_init_step: 0.1,
            spread_tolerance: 1e-8,
            restarts: 10,
        }
    }

    pub fn nelder_mead() -> Self {
        Self {
            algorithm: Algorithm::NelderMead,
            max_iters: 2000,
            ..Self::lbfgs()
        }
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("cost_tolerance", self.cost_tolerance),
            ("gradient_tolerance", self.gradient_tolerance),
            ("simplex_init_step", self.simplex_init_step),
            ("spread_tolerance", self.spread_tolerance),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(*v > 0.0)) {
            return Err(Error::Config(format!("{name} must be positive, got {v}")));
        }
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be at least 1".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if self.algorithm == Algorithm::Lbfgs && self.history_size == 0 {
            return Err(Error::Config("history_size must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    CostTolerance,
    GradientTolerance,
    SimplexSpread,
    MaxIters,
    LineSearchFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub cost: f64,
    /// `‖∇C‖_∞` for L-BFGS, simplex cost spread for Nelder-Mead.
    pub grad_norm_or_spread: f64,
    /// Wall-clock time since the run started; not part of the determinism contract.
    pub elapsed_ms: f64,
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub restart: usize,
    pub seed: u64,
    pub initial_theta: Vec<f64>,
    pub records: Vec<IterationRecord>,
    pub final_theta: ParameterVector,
    pub final_cost: f64,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub evaluations: u64,
}

impl OptimizationTrace {
    pub fn iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.iteration)
    }

    pub fn final_fidelity(&self) -> f64 {
        1.0 - self.final_cost
    }

    /// Running minimum of the recorded costs.
    pub fn best_so_far(&self) -> Vec<f64> {
        self.records
            .iter()
            .scan(f64::INFINITY, |best, r| {
                *best = best.min(r.cost);
                Some(*best)
            })
            .collect()
    }
}

pub(crate) struct TraceBuilder {
    start: Instant,
    records: Vec<IterationRecord>,
}

impl TraceBuilder {
    pub(crate) fn new() -> Self {
        Self {
            start: Instant::now(),
            records: Vec::new(),
        }
    }

    pub(crate) fn push(&mut self, iteration: usize, cost: f64, metric: f64, theta: &[f64]) {
        self.records.push(IterationRecord {
            iteration,
            cost,
            grad_norm_or_spread: metric,
            elapsed_ms: self.start.elapsed().as_secs_f64() * 1e3,
            theta: theta.to_vec(),
        });
    }

    pub(crate) fn finish(
        self,
        initial: &[f64],
        final_theta: Vec<f64>,
        final_cost: f64,
        stop_reason: StopReason,
        evaluations: u64,
    ) -> OptimizationTrace {
        OptimizationTrace {
            restart: 0,
            seed: 0,
            initial_theta: initial.to_vec(),
            records: self.records,
            final_theta: ParameterVector::new(final_theta),
            final_cost,
            converged: matches!(
                stop_reason,
                StopReason::CostTolerance
                    | StopReason::GradientTolerance
                    | StopReason::SimplexSpread
            ),
            stop_reason,
            evaluations,
        }
    }
}

pub(crate) fn wrap_in_place(x: &mut [f64]) {
    x.iter_mut().for_each(|v| *v = wrap_angle(*v));
}

/// Runs the algorithm selected in `cfg` from a single starting point.
pub fn minimize<O: Objective + ?Sized>(
    objective: &O,
    init: &ParameterVector,
    cfg: &OptimizerConfig,
) -> Result<OptimizationTrace> {
    match cfg.algorithm {
        Algorithm::Lbfgs => lbfgs_minimize(objective, init, cfg),
        Algorithm::NelderMead => nelder_mead_minimize(objective, init, cfg),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationStats {
    pub count: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl PopulationStats {
    pub fn from_values(values: &[f64]) -> Self {
        let count = values.len();
        if count == 0 {
            return Self {
                count,
                mean: f64::NAN,
                std: f64::NAN,
                min: f64::NAN,
                max: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / count as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / count as f64;
        Self {
            count,
            mean,
            std: var.sqrt(),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiRestartResult {
    pub traces: Vec<OptimizationTrace>,
    pub best_index: usize,
    /// Statistics of the final cost over all restarts.
    pub final_cost: PopulationStats,
    /// Statistics of the final fidelity over all restarts.
    pub fidelity: PopulationStats,
    /// Fidelity statistics over restarts whose final cost reached the cost
    /// tolerance; `None` when no restart did.
    pub successful_fidelity: Option<PopulationStats>,
    pub success_count: usize,
}

impl MultiRestartResult {
    pub fn best(&self) -> &OptimizationTrace {
        &self.traces[self.best_index]
    }

    pub fn from_traces(mut traces: Vec<OptimizationTrace>, cost_tolerance: f64) -> Self {
        traces.sort_by_key(|t| t.restart);
        let costs: Vec<f64> = traces.iter().map(|t| t.final_cost).collect();
        let fids: Vec<f64> = traces.iter().map(|t| t.final_fidelity()).collect();
        let hits: Vec<f64> = traces
            .iter()
            .filter(|t| t.final_cost <= cost_tolerance)
            .map(|t| t.final_fidelity())
            .collect();
        let best_index = costs
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map_or(0, |(i, _)| i);
        Self {
            best_index,
            final_cost: PopulationStats::from_values(&costs),
            fidelity: PopulationStats::from_values(&fids),
            successful_fidelity: (!hits.is_empty()).then(|| PopulationStats::from_values(&hits)),
            success_count: hits.len(),
            traces,
        }
    }
}

/// Restart `r` starts from `init.sample` with the seed derived from
/// `(init.seed, r)`; restarts run in parallel and are reduced in index order.
pub fn multi_restart<O: Objective + ?Sized>(
    objective: &O,
    init: &InitScheme,
    cfg: &OptimizerConfig,
) -> Result<MultiRestartResult> {
    cfg.validate()?;
    let traces = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let seed = derive_seed(init.seed, Stream::Restart, r as u64);
            let start = init.sample(objective.n_params(), &mut crate::seed::rng(seed));
            let mut trace = minimize(objective, &start, cfg)?;
            trace.restart = r;
            trace.seed = seed;
            Ok(trace)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MultiRestartResult::from_traces(traces, cfg.cost_tolerance))
}

/// CSV with columns `restart,iteration,cost,grad_norm_or_spread,elapsed_ms`.
pub fn traces_to_csv(traces: &[OptimizationTrace]) -> String {
    let mut out = String::from("restart,iteration,cost,grad_norm_or_spread,elapsed_ms\n");
    for t in traces {
        for r in &t.records {
            let _ = writeln!(
                out,
                "{},{},{:e},{:e},{:.3}",
                t.restart, r.iteration, r.cost, r.grad_norm_or_spread, r.elapsed_ms
            );
        }
    }
    out
}
