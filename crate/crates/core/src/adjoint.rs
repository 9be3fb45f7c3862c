//! Backward costate sweep and pathwise parameter gradients.
//!
//! The costate is the exact transpose of the linearized forward scheme, so
//! the gradient is the gradient of the discrete pathwise cost. With
//! `r_j = Sᵀ p_{j+1}`:
//!
//! ```text
//! p_N = ℳ′(u_N)
//! p_j = r_j + dt (F′(u_j) r_j + Φ_uᵀ (r_j + ν W g_j) + ℒ′(t_j, u_j))
//! ∇J  = Σ_j dt Φ_αᵀ (r_j + ν W g_j)
//! ```
//!
//! All vectors live in Euclidean coefficient space; `W` is the discrete L²
//! metric (identity for the cosine basis, lumped masses for hats).

use crate::ansatz::FeedbackParams;
use crate::dynamics::ControlProblem;
use crate::error::{invalid, Result};
use crate::forward::Trajectory;
use crate::linalg::dot;

/// Costates `p_0..p_N` aligned with the forward grid.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjointTrajectory {
    pub dim: usize,
    /// Row-major `(N + 1) × dim`.
    pub costates: Vec<f64>,
}

impl AdjointTrajectory {
    pub fn costate(&self, step: usize) -> &[f64] {
        &self.costates[step * self.dim..(step + 1) * self.dim]
    }

    pub fn steps(&self) -> usize {
        self.costates.len() / self.dim - 1
    }
}

fn check(problem: &ControlProblem, params: &FeedbackParams, traj: &Trajectory) -> Result<()> {
    traj.check(problem)?;
    problem.validate_for_solve()?;
    if params.kind() != problem.kind() || params.dim() != problem.dim() {
        return invalid("feedback basis does not match the problem basis");
    }
    if params.alpha.len() != params.param_count() {
        return invalid(format!("expected {} parameters, got {}", params.param_count(), params.alpha.len()));
    }
    Ok(())
}

/// `w_j = r_j + ν W g_j`, the cotangent fed to the feedback VJP.
fn control_cotangent(problem: &ControlProblem, r: &[f64], g: &[f64], w: &mut [f64]) {
    let nu = problem.nu();
    if nu > 0.0 {
        problem.space().apply_metric(g, w);
        for (wi, ri) in w.iter_mut().zip(r) {
            *wi = ri + nu * *wi;
        }
    } else {
        w.copy_from_slice(r);
    }
}

/// The backward sweep; accumulates the parameter gradient when `grad` is given.
fn sweep(problem: &ControlProblem, params: &FeedbackParams, traj: &Trajectory, mut grad: Option<&mut [f64]>) -> Vec<f64> {
    let n = problem.steps();
    let d = problem.dim();
    let dt = problem.dt();
    let mut costates = vec![0.0; (n + 1) * d];
    problem.terminal(traj.terminal(), Some(&mut costates[n * d..]));
    let mut r = vec![0.0; d];
    let mut w = vec![0.0; d];
    let mut vs = vec![0.0; d];
    let mut fr = vec![0.0; d];
    let mut lg = vec![0.0; d];
    let mut scratch = vec![0.0; d];
    let mut fprime = Vec::new();
    let mut dummy = Vec::new();
    for j in (0..n).rev() {
        let t = problem.time(j);
        let u = traj.state(j);
        let (head, tail) = costates.split_at_mut((j + 1) * d);
        problem.implicit_transpose(&tail[..d], &mut r);
        control_cotangent(problem, &r, traj.control(j), &mut w);
        match grad.as_deref_mut() {
            Some(g) => params.vjp_into(t, u, &w, &mut vs, g, dt),
            None => {
                dummy.resize(params.param_count(), 0.0);
                params.vjp_into(t, u, &w, &mut vs, &mut dummy, 0.0);
            }
        }
        problem.reaction_term(u, &mut scratch, &mut fprime);
        problem.reaction_jacobian(&fprime, &r, &mut fr);
        problem.running(j, u, Some(&mut lg));
        let p = &mut head[j * d..];
        for i in 0..d {
            p[i] = r[i] + dt * (fr[i] + vs[i] + lg[i]);
        }
    }
    costates
}

/// Solves the discrete adjoint equation backward along a forward path.
pub fn adjoint_solve(problem: &ControlProblem, params: &FeedbackParams, traj: &Trajectory) -> Result<AdjointTrajectory> {
    check(problem, params, traj)?;
    Ok(AdjointTrajectory { dim: problem.dim(), costates: sweep(problem, params, traj, None) })
}

/// Pathwise gradient `Σ_j dt Φ_αᵀ (Sᵀ p_{j+1} + ν W g_j)` from stored costates.
pub fn pathwise_gradient(
    problem: &ControlProblem,
    params: &FeedbackParams,
    traj: &Trajectory,
    adj: &AdjointTrajectory,
) -> Result<Vec<f64>> {
    check(problem, params, traj)?;
    if adj.dim != problem.dim() || adj.costates.len() != traj.states.len() {
        return invalid("costates are not aligned with the trajectory");
    }
    let d = problem.dim();
    let dt = problem.dt();
    let mut grad = vec![0.0; params.param_count()];
    let mut r = vec![0.0; d];
    let mut w = vec![0.0; d];
    let mut vs = vec![0.0; d];
    // same summation order as the fused sweep
    for j in (0..problem.steps()).rev() {
        problem.implicit_transpose(adj.costate(j + 1), &mut r);
        control_cotangent(problem, &r, traj.control(j), &mut w);
        params.vjp_into(problem.time(j), traj.state(j), &w, &mut vs, &mut grad, dt);
    }
    Ok(grad)
}

/// Fused backward sweep returning costates and gradient in one pass.
pub fn adjoint_gradient(
    problem: &ControlProblem,
    params: &FeedbackParams,
    traj: &Trajectory,
) -> Result<(AdjointTrajectory, Vec<f64>)> {
    check(problem, params, traj)?;
    let mut grad = vec![0.0; params.param_count()];
    let costates = sweep(problem, params, traj, Some(&mut grad));
    Ok((AdjointTrajectory { dim: problem.dim(), costates }, grad))
}

/// Directional derivative `∂J/∂β` along a frozen path from the linearized
/// state equation `y_{j+1} = S(y_j + dt (F′(u_j) y_j + Φ_u y_j + Φ_α β))`,
/// `y_0 = 0`.
pub fn forward_sensitivity(
    problem: &ControlProblem,
    params: &FeedbackParams,
    traj: &Trajectory,
    direction: &[f64],
) -> Result<f64> {
    check(problem, params, traj)?;
    if direction.len() != params.param_count() {
        return invalid(format!("direction has {} entries, expected {}", direction.len(), params.param_count()));
    }
    let d = problem.dim();
    let dt = problem.dt();
    let nu = problem.nu();
    let mut y = vec![0.0; d];
    let mut dg = vec![0.0; d];
    let mut fy = vec![0.0; d];
    let mut lg = vec![0.0; d];
    let mut wg = vec![0.0; d];
    let mut z = vec![0.0; d];
    let mut scratch = vec![0.0; d];
    let mut fprime = Vec::new();
    let mut total = 0.0;
    for j in 0..problem.steps() {
        let u = traj.state(j);
        params.jvp_into(problem.time(j), u, &y, direction, &mut dg);
        problem.running(j, u, Some(&mut lg));
        problem.space().apply_metric(traj.control(j), &mut wg);
        total += dt * (dot(&lg, &y) + nu * dot(&wg, &dg));
        problem.reaction_term(u, &mut scratch, &mut fprime);
        problem.reaction_jacobian(&fprime, &y, &mut fy);
        for i in 0..d {
            z[i] = y[i] + dt * (fy[i] + dg[i]);
        }
        problem.implicit_step(&z, None, &mut y);
    }
    problem.terminal(traj.terminal(), Some(&mut lg));
    Ok(total + dot(&lg, &y))
}
