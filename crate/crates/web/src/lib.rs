//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Three operations are exposed: a heat-equation rollout with or without the
//! Riccati feedback, the Riccati gain curves, and an uncontrolled Nagumo
//! rollout next to its deterministic reference.

use std::sync::Arc;

use spdectl::dynamics::indicator;
use spdectl::forward::state_norms;
use spdectl::{
    fem_assemble, forward_solve, model, pathwise_cost, reference_profile, riccati_solve, spectral_basis, BasisKind,
    ControlProblem, Family, FeedbackParams, ProblemSetup, Space, Trajectory,
};
use wasm_bindgen::prelude::*;

const LENGTH: f64 = 20.0;

/// A simulated path sampled at the collocation points, ready for plotting.
#[wasm_bindgen]
pub struct Rollout {
    steps: usize,
    dt: f64,
    points: Vec<f64>,
    profiles: Vec<f64>,
    reference: Vec<f64>,
    norms: Vec<f64>,
    cost: f64,
}

#[wasm_bindgen]
impl Rollout {
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn points(&self) -> Vec<f64> {
        self.points.clone()
    }

    /// State values at the points after `step` steps (clamped to the last step).
    pub fn profile(&self, step: usize) -> Vec<f64> {
        slice(&self.profiles, self.points.len(), step.min(self.steps)).to_vec()
    }

    /// Reference values at `step`, empty when the run has no reference.
    pub fn reference(&self, step: usize) -> Vec<f64> {
        if self.reference.is_empty() {
            return Vec::new();
        }
        slice(&self.reference, self.points.len(), step.min(self.steps)).to_vec()
    }

    /// Squared L² norm of the state at every step.
    pub fn norms(&self) -> Vec<f64> {
        self.norms.clone()
    }

    pub fn cost(&self) -> f64 {
        self.cost
    }
}

fn slice(data: &[f64], width: usize, step: usize) -> &[f64] {
    &data[step * width..(step + 1) * width]
}

fn sample(problem: &ControlProblem, traj: &Trajectory, out: &mut Vec<f64>) {
    let space = problem.space();
    let mut buf = vec![0.0; space.points().len()];
    for j in 0..=traj.steps() {
        space.to_points(traj.state(j), &mut buf);
        out.extend_from_slice(&buf);
    }
}

fn rollout(problem: &ControlProblem, params: &FeedbackParams, seed: u64, reference: Option<&Trajectory>) -> spdectl::Result<Rollout> {
    let traj = forward_solve(problem, params, &problem.sample_noise(seed))?;
    let mut profiles = Vec::new();
    sample(problem, &traj, &mut profiles);
    let mut ref_values = Vec::new();
    if let Some(r) = reference {
        sample(problem, r, &mut ref_values);
    }
    Ok(Rollout {
        steps: problem.steps(),
        dt: problem.dt(),
        points: problem.space().points().to_vec(),
        profiles,
        reference: ref_values,
        norms: state_norms(problem, &traj),
        cost: pathwise_cost(problem, params, &traj)?,
    })
}

fn heat_problem(modes: usize, horizon: f64, dt: f64, sigma: f64) -> spdectl::Result<ControlProblem> {
    let space: Space = spectral_basis(LENGTH, modes)?.into();
    let initial = indicator(&space, LENGTH / 3.0, 2.0 * LENGTH / 3.0);
    ProblemSetup::from_model(space, model("heat-lq")?, horizon, dt, sigma, initial).build()
}

pub fn heat_rollout_native(
    modes: usize,
    horizon: f64,
    dt: f64,
    sigma: f64,
    seed: u64,
    controlled: bool,
) -> spdectl::Result<Rollout> {
    let problem = heat_problem(modes, horizon, dt, sigma)?;
    let dim = problem.dim();
    let params = if controlled {
        let sol = riccati_solve(LENGTH, modes, horizon, dt)?;
        FeedbackParams::new(Family::Riccati(Arc::new(sol)), BasisKind::Spectral, dim, horizon, vec![])?
    } else {
        FeedbackParams::zero(BasisKind::Spectral, dim, horizon)
    };
    rollout(&problem, &params, seed, None)
}

pub fn riccati_gains_native(modes: usize, horizon: f64, dt: f64) -> spdectl::Result<Vec<f64>> {
    let sol = riccati_solve(LENGTH, modes, horizon, dt)?;
    Ok((0..=modes).flat_map(|k| sol.mode(k).to_vec()).collect())
}

pub fn nagumo_rollout_native(elements: usize, horizon: f64, dt: f64, sigma: f64, seed: u64) -> spdectl::Result<Rollout> {
    let space: Space = fem_assemble(LENGTH, elements)?.into();
    let initial = indicator(&space, LENGTH / 4.0, 3.0 * LENGTH / 4.0);
    let problem = ProblemSetup::from_model(space, model("nagumo-l2")?, horizon, dt, sigma, initial).build()?;
    let reference = reference_profile(&problem)?;
    let problem = problem.with_reference(&reference.fields(&problem))?;
    let params = FeedbackParams::zero(BasisKind::Fem, problem.dim(), horizon);
    rollout(&problem, &params, seed, Some(&reference))
}

fn js(e: spdectl::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Heat equation from an indicator, uncontrolled or under the Riccati feedback.
#[wasm_bindgen]
pub fn heat_rollout(modes: usize, horizon: f64, dt: f64, sigma: f64, seed: u64, controlled: bool) -> Result<Rollout, JsError> {
    heat_rollout_native(modes, horizon, dt, sigma, seed, controlled).map_err(js)
}

/// Riccati gains `p_k(t_j)`, mode-major: `(modes + 1) × (steps + 1)` values.
#[wasm_bindgen]
pub fn riccati_gains(modes: usize, horizon: f64, dt: f64) -> Result<Vec<f64>, JsError> {
    riccati_gains_native(modes, horizon, dt).map_err(js)
}

/// Uncontrolled stochastic Nagumo path with its noise-free reference.
#[wasm_bindgen]
pub fn nagumo_rollout(elements: usize, horizon: f64, dt: f64, sigma: f64, seed: u64) -> Result<Rollout, JsError> {
    nagumo_rollout_native(elements, horizon, dt, sigma, seed).map_err(js)
}
