//! Monte-Carlo gradients, stochastic gradient descent and gradient checks.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::adjoint::{adjoint_gradient, forward_sensitivity};
use crate::ansatz::FeedbackParams;
use crate::dynamics::{sample_noise, ControlProblem};
use crate::error::{invalid, Error, Result};
use crate::forward::{forward_solve, pathwise_cost, Trajectory};
use crate::linalg::{dot, norm};

/// Iteration index reserved for evaluation seeds, disjoint from training.
pub const EVAL_STREAM: u64 = u64::MAX;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Counter-based seed for sample `sample` of iteration `iteration`.
pub fn derive_seed(master: u64, iteration: u64, sample: u64) -> u64 {
    const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
    let a = mix(master.wrapping_add(GOLDEN));
    let b = mix(a ^ iteration.wrapping_mul(GOLDEN).wrapping_add(0x632b_e59b_d9b4_e019));
    mix(b ^ sample.wrapping_mul(0xd1b5_4a32_d192_ed03).wrapping_add(GOLDEN))
}

/// Seed of the single retry after a diverged sample.
fn retry_seed(seed: u64) -> u64 {
    mix(seed ^ 0x5851_f42d_4c95_7f2d)
}

/// Runs `f` on sample `i` of a batch, in parallel when enabled, returning
/// results in sample order.
fn map_samples<T: Send>(count: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        (0..count).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count).map(f).collect()
    }
}

/// Runs `f` on the path with `seed`, retrying once with a derived seed when
/// the forward solve diverges. `Ok(None)` means both attempts diverged.
fn with_retry<T>(seed: u64, mut f: impl FnMut(u64) -> Result<T>) -> Result<Option<T>> {
    match f(seed) {
        Err(Error::Diverged { .. }) => match f(retry_seed(seed)) {
            Err(Error::Diverged { .. }) => Ok(None),
            other => other.map(Some),
        },
        other => other.map(Some),
    }
}

/// Mean and standard error of a sample.
fn mean_and_error(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradientEstimate {
    pub mean: Vec<f64>,
    /// Per-coordinate standard error of [`GradientEstimate::mean`].
    pub std_error: Vec<f64>,
    pub sample_count: usize,
    /// Samples that diverged twice and were dropped.
    pub failures: usize,
    /// Batch mean of the pathwise cost at the same parameters.
    pub cost: f64,
    pub cost_std_error: f64,
}

impl GradientEstimate {
    pub fn norm(&self) -> f64 {
        norm(&self.mean)
    }
}

/// Pathwise cost and gradient for one noise seed.
pub fn sample_gradient(problem: &ControlProblem, params: &FeedbackParams, seed: u64) -> Result<(f64, Vec<f64>)> {
    let noise = problem.sample_noise(seed);
    let traj = forward_solve(problem, params, &noise)?;
    let cost = pathwise_cost(problem, params, &traj)?;
    let (_, grad) = adjoint_gradient(problem, params, &traj)?;
    Ok((cost, grad))
}

/// Batch estimate of `∇J(α)` with sample seeds `derive_seed(master, iteration, i)`.
pub fn mc_gradient(
    problem: &ControlProblem,
    params: &FeedbackParams,
    batch: usize,
    master_seed: u64,
    iteration: u64,
) -> Result<GradientEstimate> {
    if batch == 0 {
        return invalid("batch size must be at least 1");
    }
    let results = map_samples(batch, |i| {
        with_retry(derive_seed(master_seed, iteration, i as u64), |s| sample_gradient(problem, params, s))
    });
    let dm = params.param_count();
    let mut good = Vec::with_capacity(batch);
    for r in results {
        if let Some(v) = r? {
            good.push(v);
        }
    }
    if good.is_empty() {
        return Err(Error::AllSamplesDiverged { samples: batch });
    }
    let m = good.len() as f64;
    let mut mean = vec![0.0; dm];
    for (_, g) in &good {
        mean.iter_mut().zip(g).for_each(|(a, b)| *a += b);
    }
    mean.iter_mut().for_each(|a| *a /= m);
    let mut std_error = vec![0.0; dm];
    if good.len() > 1 {
        for (_, g) in &good {
            for ((s, gi), mi) in std_error.iter_mut().zip(g).zip(&mean) {
                *s += (gi - mi) * (gi - mi);
            }
        }
        std_error.iter_mut().for_each(|s| *s = (*s / (m - 1.0) / m).sqrt());
    }
    let costs: Vec<f64> = good.iter().map(|(c, _)| *c).collect();
    let (cost, cost_std_error) = mean_and_error(&costs);
    Ok(GradientEstimate { mean, std_error, sample_count: good.len(), failures: batch - good.len(), cost, cost_std_error })
}

/// Per-path statistics on the evaluation stream.
#[derive(Clone, Debug, PartialEq)]
pub struct PathBatch<T> {
    pub values: Vec<T>,
    pub failures: usize,
}

/// Simulates `samples` fresh evaluation paths and maps each `(index, trajectory)` through `f`.
pub fn map_paths<T: Send>(
    problem: &ControlProblem,
    params: &FeedbackParams,
    samples: usize,
    seed: u64,
    f: impl Fn(usize, &Trajectory) -> Result<T> + Sync + Send,
) -> Result<PathBatch<T>> {
    if samples == 0 {
        return invalid("number of evaluation samples must be at least 1");
    }
    let results = map_samples(samples, |i| {
        with_retry(derive_seed(seed, EVAL_STREAM, i as u64), |s| {
            let noise = sample_noise(s, problem.steps(), problem.dt(), problem.space());
            f(i, &forward_solve(problem, params, &noise)?)
        })
    });
    let mut values = Vec::with_capacity(samples);
    for r in results {
        if let Some(v) = r? {
            values.push(v);
        }
    }
    if values.is_empty() {
        return Err(Error::AllSamplesDiverged { samples });
    }
    Ok(PathBatch { failures: samples - values.len(), values })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
    pub failures: usize,
}

/// Monte-Carlo cost on evaluation seeds, which never coincide with training seeds.
pub fn evaluate_cost(problem: &ControlProblem, params: &FeedbackParams, samples: usize, seed: u64) -> Result<CostEstimate> {
    let batch = map_paths(problem, params, samples, seed, |_, traj| pathwise_cost(problem, params, traj))?;
    let (mean, std_error) = mean_and_error(&batch.values);
    Ok(CostEstimate { mean, std_error, samples: batch.values.len(), failures: batch.failures })
}

/// Standard normal vector, e.g. a random direction for gradient checks.
pub fn random_direction(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub step_size: f64,
    pub batch: usize,
    pub max_iterations: usize,
    /// Stop once the estimated gradient norm drops below this.
    pub tolerance: f64,
    pub seed: u64,
    /// Step size `s / (1 + it / τ)` when set.
    pub decay: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { step_size: 0.05, batch: 8, max_iterations: 2000, tolerance: 1e-6, seed: 0, decay: None }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) || !self.step_size.is_finite() {
            return invalid(format!("step size must be positive, got {}", self.step_size));
        }
        if self.batch == 0 {
            return invalid("batch size must be at least 1");
        }
        if !(self.tolerance > 0.0) {
            return invalid(format!("stopping threshold must be positive, got {}", self.tolerance));
        }
        if let Some(tau) = self.decay {
            if !(tau > 0.0) {
                return invalid(format!("decay horizon must be positive, got {tau}"));
            }
        }
        Ok(())
    }

    pub fn step_at(&self, iteration: usize) -> f64 {
        match self.decay {
            Some(tau) => self.step_size / (1.0 + iteration as f64 / tau),
            None => self.step_size,
        }
    }
}

/// One SGD iteration. The cost columns come from the training batch at the
/// parameters before the update, so they are unbiased for `J(α_it)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HistoryRow {
    pub iteration: usize,
    pub cost: f64,
    pub cost_std_error: f64,
    pub grad_norm: f64,
    pub step_size: f64,
    pub failures: usize,
    pub wall_time: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    GradientTolerance,
    MaxIterations,
    Stopped,
}

impl Termination {
    pub fn name(self) -> &'static str {
        match self {
            Termination::GradientTolerance => "gradient-tolerance",
            Termination::MaxIterations => "max-iterations",
            Termination::Stopped => "stopped",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainHistory {
    pub rows: Vec<HistoryRow>,
    pub termination: Termination,
    /// Number of parameter updates performed.
    pub updates: usize,
}

/// Plain SGD `α ← α − s ∇Ĵ(α)` until `‖∇Ĵ‖ < ρ` or the iteration budget runs out.
pub fn sgd_train(problem: &ControlProblem, params: &FeedbackParams, cfg: &TrainConfig) -> Result<(FeedbackParams, TrainHistory)> {
    sgd_train_with(problem, params, cfg, |_, _| true)
}

/// [`sgd_train`] with a callback after each row; returning `false` stops early.
pub fn sgd_train_with(
    problem: &ControlProblem,
    params: &FeedbackParams,
    cfg: &TrainConfig,
    mut on_row: impl FnMut(&HistoryRow, &FeedbackParams) -> bool,
) -> Result<(FeedbackParams, TrainHistory)> {
    cfg.validate()?;
    let mut current = params.clone();
    let mut rows = Vec::new();
    let start = Instant::now();
    let mut termination = Termination::MaxIterations;
    let mut updates = 0;
    for it in 0..cfg.max_iterations {
        let est = mc_gradient(problem, &current, cfg.batch, cfg.seed, it as u64)?;
        let grad_norm = est.norm();
        let step = cfg.step_at(it);
        let converged = grad_norm < cfg.tolerance;
        let row = HistoryRow {
            iteration: it,
            cost: est.cost,
            cost_std_error: est.cost_std_error,
            grad_norm,
            step_size: if converged { 0.0 } else { step },
            failures: est.failures,
            wall_time: start.elapsed().as_secs_f64(),
        };
        if converged {
            rows.push(row);
            termination = Termination::GradientTolerance;
            break;
        }
        for (a, g) in current.alpha.iter_mut().zip(&est.mean) {
            *a -= step * g;
        }
        updates += 1;
        if current.alpha.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFiniteParameters { iteration: it, snapshot: current.alpha });
        }
        let keep_going = on_row(&row, &current);
        rows.push(row);
        if !keep_going {
            termination = Termination::Stopped;
            break;
        }
    }
    Ok((current, TrainHistory { rows, termination, updates }))
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckRow {
    pub h: f64,
    pub finite_difference: f64,
    pub abs_error: f64,
    pub rel_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    /// `⟨∇̂J, β⟩` from the adjoint.
    pub adjoint: f64,
    /// `∂J/∂β` from the linearized state equation.
    pub sensitivity: f64,
    pub sensitivity_rel_error: f64,
    pub rows: Vec<GradCheckRow>,
    pub min_rel_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

fn relative(err: f64, reference: f64) -> f64 {
    if err == 0.0 {
        0.0
    } else {
        err / reference.abs().max(f64::MIN_POSITIVE)
    }
}

/// Compares the adjoint directional derivative with the forward sensitivity
/// and with central differences over `steps`, all on one frozen noise path.
pub fn grad_check(
    problem: &ControlProblem,
    params: &FeedbackParams,
    direction: &[f64],
    steps: &[f64],
    noise_seed: u64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    if direction.len() != params.param_count() {
        return invalid(format!("direction has {} entries, expected {}", direction.len(), params.param_count()));
    }
    if steps.iter().any(|h| !(*h > 0.0)) {
        return invalid("finite-difference steps must be positive");
    }
    let noise = problem.sample_noise(noise_seed);
    let traj = forward_solve(problem, params, &noise)?;
    let (_, grad) = adjoint_gradient(problem, params, &traj)?;
    let adjoint = dot(&grad, direction);
    let sensitivity = forward_sensitivity(problem, params, &traj, direction)?;
    let sensitivity_rel_error = relative((adjoint - sensitivity).abs(), adjoint);
    let cost_at = |h: f64| -> Result<f64> {
        let alpha = params.alpha.iter().zip(direction).map(|(a, b)| a + h * b).collect();
        let q = params.with_alpha(alpha)?;
        let tr = forward_solve(problem, &q, &noise)?;
        pathwise_cost(problem, &q, &tr)
    };
    let mut rows = Vec::with_capacity(steps.len());
    for &h in steps {
        let fd = (cost_at(h)? - cost_at(-h)?) / (2.0 * h);
        let abs_error = (fd - adjoint).abs();
        rows.push(GradCheckRow { h, finite_difference: fd, abs_error, rel_error: relative(abs_error, adjoint) });
    }
    let min_rel_error = rows.iter().map(|r| r.rel_error).fold(f64::INFINITY, f64::min);
    let passed = sensitivity_rel_error <= 1e-8 && (rows.is_empty() || min_rel_error <= tolerance);
    Ok(GradCheckReport { adjoint, sensitivity, sensitivity_rel_error, rows, min_rel_error, tolerance, passed })
}
