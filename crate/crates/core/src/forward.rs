//! Semi-implicit Euler–Maruyama integration of the controlled state equation
//! and the pathwise cost.
//!
//! One step reads `u_{j+1} = S(u_j + dt (F(u_j) + Φ(t_j, u_j))) + σ S̃ ξ_j`
//! where `S` is the implicit diffusion solve: division by `1 + dt λ_k` in the
//! cosine basis, `(M + dt K)⁻¹ M` for hats (whose noise enters as
//! `(M + dt K)⁻¹ ξ_j` with `ξ_j ~ N(0, dt M)`).

use crate::ansatz::FeedbackParams;
use crate::dynamics::{ControlProblem, NoisePath};
use crate::error::{invalid, Error, Result};
use crate::spatial::Field;

/// States above this Euclidean norm count as a blow-up.
pub const BLOWUP_NORM: f64 = 1e8;

/// One simulated path: states `u_0..u_N` and controls `g_0..g_{N−1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub dim: usize,
    /// Row-major `(N + 1) × dim`.
    pub states: Vec<f64>,
    /// Row-major `N × dim`; the control applied on `[t_j, t_{j+1})`.
    pub controls: Vec<f64>,
    pub noise_seed: u64,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn state(&self, step: usize) -> &[f64] {
        &self.states[step * self.dim..(step + 1) * self.dim]
    }

    pub fn control(&self, step: usize) -> &[f64] {
        &self.controls[step * self.dim..(step + 1) * self.dim]
    }

    pub fn terminal(&self) -> &[f64] {
        self.state(self.steps())
    }

    pub fn state_field(&self, step: usize, problem: &ControlProblem) -> Field {
        Field::new(self.state(step).to_vec(), problem.kind())
    }

    /// All states as fields.
    pub fn fields(&self, problem: &ControlProblem) -> Vec<Field> {
        (0..=self.steps()).map(|j| self.state_field(j, problem)).collect()
    }

    pub(crate) fn check(&self, problem: &ControlProblem) -> Result<()> {
        let n = problem.steps();
        if self.dim != problem.dim()
            || self.times.len() != n + 1
            || self.states.len() != (n + 1) * self.dim
            || self.controls.len() != n * self.dim
        {
            return invalid("trajectory does not match the problem grid");
        }
        if self.states.iter().any(|v| !v.is_finite()) {
            return invalid("trajectory contains non-finite states");
        }
        Ok(())
    }
}

fn check_inputs(problem: &ControlProblem, params: &FeedbackParams, noise: &NoisePath) -> Result<()> {
    if noise.steps != problem.steps() || noise.dim != problem.dim() || noise.increments.len() != noise.steps * noise.dim {
        return invalid(format!(
            "noise path has {} steps of dimension {}, the problem needs {} of dimension {}",
            noise.steps,
            noise.dim,
            problem.steps(),
            problem.dim()
        ));
    }
    if params.kind() != problem.kind() || params.dim() != problem.dim() {
        return invalid("feedback basis does not match the problem basis");
    }
    if (params.horizon() - problem.horizon()).abs() > 1e-12 * problem.horizon() {
        return invalid("feedback horizon does not match the problem horizon");
    }
    if params.alpha.len() != params.param_count() {
        return invalid(format!("expected {} parameters, got {}", params.param_count(), params.alpha.len()));
    }
    Ok(())
}

/// Integrates the controlled state equation along one noise path.
pub fn forward_solve(problem: &ControlProblem, params: &FeedbackParams, noise: &NoisePath) -> Result<Trajectory> {
    check_inputs(problem, params, noise)?;
    let n = problem.steps();
    let d = problem.dim();
    let dt = problem.dt();
    let mut states = vec![0.0; (n + 1) * d];
    let mut controls = vec![0.0; n * d];
    states[..d].copy_from_slice(&problem.initial().coeffs);
    let mut reaction = vec![0.0; d];
    let mut fprime = Vec::new();
    let mut z = vec![0.0; d];
    let with_noise = problem.sigma() > 0.0;
    for j in 0..n {
        let t = problem.time(j);
        let (done, rest) = states.split_at_mut((j + 1) * d);
        let u = &done[j * d..];
        let g = &mut controls[j * d..(j + 1) * d];
        params.eval_into(t, u, g);
        problem.reaction_term(u, &mut reaction, &mut fprime);
        for i in 0..d {
            z[i] = u[i] + dt * (reaction[i] + g[i]);
        }
        let next = &mut rest[..d];
        problem.implicit_step(&z, with_noise.then(|| noise.increment(j)), next);
        let sq: f64 = next.iter().map(|v| v * v).sum();
        if !sq.is_finite() || sq > BLOWUP_NORM * BLOWUP_NORM {
            return Err(Error::Diverged { step: j + 1 });
        }
    }
    Ok(Trajectory { times: (0..=n).map(|j| problem.time(j)).collect(), dim: d, states, controls, noise_seed: noise.seed })
}

/// `Σ_{j<N} dt [ℒ(t_j, u_j) + ν/2 ‖g_j‖²] + ℳ(u_N)` for one path.
pub fn pathwise_cost(problem: &ControlProblem, params: &FeedbackParams, traj: &Trajectory) -> Result<f64> {
    traj.check(problem)?;
    if params.dim() != problem.dim() {
        return invalid("feedback basis does not match the problem basis");
    }
    problem.validate_for_solve()?;
    let dt = problem.dt();
    let nu = problem.nu();
    let mut total = 0.0;
    for j in 0..traj.steps() {
        let penalty = if nu > 0.0 { 0.5 * nu * problem.space().norm_sq(traj.control(j)) } else { 0.0 };
        total += dt * (problem.running(j, traj.state(j), None) + penalty);
    }
    Ok(total + problem.terminal(traj.terminal(), None))
}

/// Squared L² norm of every state, for plotting.
pub fn state_norms(problem: &ControlProblem, traj: &Trajectory) -> Vec<f64> {
    (0..=traj.steps()).map(|j| problem.space().norm_sq(traj.state(j))).collect()
}
