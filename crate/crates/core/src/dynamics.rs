//! The controlled reaction-diffusion problem: reaction term, running and
//! terminal costs, additive noise, initial and reference data.

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::linalg::{dot, BidiagCholesky};
use crate::spatial::{BasisKind, Field, Space};

/// A scalar map with its derivative, `u ↦ (h(u), h'(u))`.
pub trait PointwiseMap: Send + Sync {
    fn eval(&self, u: f64) -> (f64, f64);
}

/// A local cost density `l(t, x, u)` with `∂_u l`. `reference` is the value
/// of the reference profile at `(t, x)`, or zero when the problem has none.
pub trait LocalCost: Send + Sync {
    fn eval(&self, t: f64, x: f64, u: f64, reference: f64) -> (f64, f64);
}

/// `f(u) = −u(u − ½)(u − 1)` and `f'(u) = −3u² + 3u − ½`.
pub fn nagumo_reaction(u: f64) -> (f64, f64) {
    (-u * (u - 0.5) * (u - 1.0), -3.0 * u * u + 3.0 * u - 0.5)
}

#[derive(Clone)]
pub enum Reaction {
    Zero,
    Nagumo,
    Custom(Arc<dyn PointwiseMap>),
}

impl Reaction {
    pub fn eval(&self, u: f64) -> (f64, f64) {
        match self {
            Reaction::Zero => (0.0, 0.0),
            Reaction::Nagumo => nagumo_reaction(u),
            Reaction::Custom(m) => m.eval(u),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Reaction::Zero)
    }
}

impl fmt::Debug for Reaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reaction::Zero => write!(f, "Zero"),
            Reaction::Nagumo => write!(f, "Nagumo"),
            Reaction::Custom(_) => write!(f, "Custom"),
        }
    }
}

#[derive(Clone)]
pub enum CostTerm {
    Zero,
    /// `u²/2`
    HalfSquare,
    /// `(u − u⁰)²` against the problem's reference profile.
    Tracking,
    Custom(Arc<dyn LocalCost>),
}

impl CostTerm {
    pub fn eval(&self, t: f64, x: f64, u: f64, reference: f64) -> (f64, f64) {
        match self {
            CostTerm::Zero => (0.0, 0.0),
            CostTerm::HalfSquare => (0.5 * u * u, u),
            CostTerm::Tracking => {
                let d = u - reference;
                (d * d, 2.0 * d)
            }
            CostTerm::Custom(c) => c.eval(t, x, u, reference),
        }
    }

    fn needs_reference(&self) -> bool {
        matches!(self, CostTerm::Tracking)
    }
}

impl fmt::Debug for CostTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostTerm::Zero => write!(f, "Zero"),
            CostTerm::HalfSquare => write!(f, "HalfSquare"),
            CostTerm::Tracking => write!(f, "Tracking"),
            CostTerm::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// Reaction, costs and control weight registered under an experiment name.
#[derive(Clone, Debug)]
pub struct Model {
    pub reaction: Reaction,
    pub running_cost: CostTerm,
    pub terminal_cost: CostTerm,
    pub nu: f64,
}

pub const MODEL_NAMES: [&str; 3] = ["heat-lq", "nagumo-l2", "nagumo-nemytskii"];

/// Looks up a registered model.
///
/// `heat-lq` carries the terminal cost `u²/2` so that the Riccati feedback
/// with `P(T) = −Id` is optimal for it.
pub fn model(name: &str) -> Result<Model> {
    match name {
        "heat-lq" => Ok(Model {
            reaction: Reaction::Zero,
            running_cost: CostTerm::HalfSquare,
            terminal_cost: CostTerm::HalfSquare,
            nu: 1.0,
        }),
        "nagumo-l2" | "nagumo-nemytskii" => Ok(Model {
            reaction: Reaction::Nagumo,
            running_cost: CostTerm::Tracking,
            terminal_cost: CostTerm::Tracking,
            nu: 1.0,
        }),
        other => invalid(format!("unknown problem '{other}' (expected one of {MODEL_NAMES:?})")),
    }
}

/// Everything needed to build a [`ControlProblem`].
#[derive(Clone, Debug)]
pub struct ProblemSetup {
    pub space: Space,
    pub horizon: f64,
    pub dt: f64,
    pub sigma: f64,
    pub nu: f64,
    pub reaction: Reaction,
    pub running_cost: CostTerm,
    pub terminal_cost: CostTerm,
    pub initial: Field,
}

impl ProblemSetup {
    pub fn from_model(space: Space, model: Model, horizon: f64, dt: f64, sigma: f64, initial: Field) -> Self {
        ProblemSetup {
            space,
            horizon,
            dt,
            sigma,
            nu: model.nu,
            reaction: model.reaction,
            running_cost: model.running_cost,
            terminal_cost: model.terminal_cost,
            initial,
        }
    }

    pub fn build(self) -> Result<ControlProblem> {
        let ProblemSetup { space, horizon, dt, sigma, nu, reaction, running_cost, terminal_cost, initial } =
            self;
        if !(horizon > 0.0) || !horizon.is_finite() {
            return invalid(format!("horizon must be positive, got {horizon}"));
        }
        if !(dt > 0.0 && dt < horizon) {
            return invalid(format!("time step must lie in (0, T), got {dt}"));
        }
        let ratio = horizon / dt;
        let steps = ratio.round() as usize;
        if (ratio - steps as f64).abs() > 1e-9 * ratio.max(1.0) {
            return invalid(format!("T / dt = {ratio} is not an integer"));
        }
        if !(nu >= 0.0) || !nu.is_finite() {
            return invalid(format!("control weight must be nonnegative, got {nu}"));
        }
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return invalid(format!("noise amplitude must be nonnegative, got {sigma}"));
        }
        space.check(&initial)?;
        if !initial.is_finite() {
            return invalid("initial state has non-finite coefficients");
        }
        let stepper = Stepper::new(&space, dt)?;
        Ok(ControlProblem {
            space,
            horizon,
            dt,
            steps,
            sigma,
            nu,
            reaction,
            running_cost,
            terminal_cost,
            initial,
            reference: None,
            stepper,
        })
    }
}

/// Reference profile on the time grid, as coefficients and as collocation values.
#[derive(Clone, Debug)]
struct Reference {
    coeffs: Vec<f64>,
    points: Vec<f64>,
}

/// The dt-dependent implicit diffusion operator.
#[derive(Clone, Debug)]
enum Stepper {
    /// `1 + dt λ_k` per mode.
    Spectral(Vec<f64>),
    /// Cholesky factor of `M + dt K`.
    Fem(BidiagCholesky),
}

impl Stepper {
    fn new(space: &Space, dt: f64) -> Result<Self> {
        Ok(match space {
            Space::Spectral(b) => Stepper::Spectral(b.eigenvalues().iter().map(|l| 1.0 + dt * l).collect()),
            Space::Fem(b) => Stepper::Fem(
                b.mass()
                    .add_scaled(dt, b.stiffness())
                    .cholesky()
                    .ok_or_else(|| Error::Internal("M + dt K is not positive definite".into()))?,
            ),
        })
    }
}

/// A fully specified stochastic optimal control problem on a time grid
/// `t_j = j dt`, `j = 0..=N`.
#[derive(Clone, Debug)]
pub struct ControlProblem {
    space: Space,
    horizon: f64,
    dt: f64,
    steps: usize,
    sigma: f64,
    nu: f64,
    reaction: Reaction,
    running_cost: CostTerm,
    terminal_cost: CostTerm,
    initial: Field,
    reference: Option<Reference>,
    stepper: Stepper,
}

impl ControlProblem {
    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn kind(&self) -> BasisKind {
        self.space.kind()
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of time steps `N = T / dt`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn reaction(&self) -> &Reaction {
        &self.reaction
    }

    pub fn initial(&self) -> &Field {
        &self.initial
    }

    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.dt
    }

    pub fn has_reference(&self) -> bool {
        self.reference.is_some()
    }

    /// Same problem with a different noise amplitude.
    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return invalid(format!("noise amplitude must be nonnegative, got {sigma}"));
        }
        let mut p = self.clone();
        p.sigma = sigma;
        Ok(p)
    }

    /// Same problem with another initial state.
    pub fn with_initial(&self, initial: Field) -> Result<Self> {
        self.space.check(&initial)?;
        let mut p = self.clone();
        p.initial = initial;
        Ok(p)
    }

    /// Attaches a reference trajectory `u⁰` (one state per grid time).
    pub fn with_reference(&self, states: &[Field]) -> Result<Self> {
        if states.len() != self.steps + 1 {
            return invalid(format!(
                "reference has {} states, the time grid has {}",
                states.len(),
                self.steps + 1
            ));
        }
        let dim = self.dim();
        let npts = self.space.points().len();
        let mut coeffs = Vec::with_capacity(states.len() * dim);
        let mut points = vec![0.0; states.len() * npts];
        for (j, s) in states.iter().enumerate() {
            self.space.check(s)?;
            coeffs.extend_from_slice(&s.coeffs);
            self.space.to_points(&s.coeffs, &mut points[j * npts..(j + 1) * npts]);
        }
        let mut p = self.clone();
        p.reference = Some(Reference { coeffs, points });
        Ok(p)
    }

    pub fn reference_state(&self, step: usize) -> Option<&[f64]> {
        let dim = self.dim();
        self.reference.as_ref().map(|r| &r.coeffs[step * dim..(step + 1) * dim])
    }

    fn reference_points(&self, step: usize) -> Option<&[f64]> {
        let npts = self.space.points().len();
        self.reference.as_ref().map(|r| &r.points[step * npts..(step + 1) * npts])
    }

    /// Grid index of time `t`; `t` must be a grid time.
    pub fn step_index(&self, t: f64) -> Result<usize> {
        let r = t / self.dt;
        let j = r.round();
        if !(j >= 0.0) || j as usize > self.steps || (r - j).abs() > 1e-8 * r.abs().max(1.0) {
            return invalid(format!("time {t} is not on the grid dt = {} in [0, {}]", self.dt, self.horizon));
        }
        Ok(j as usize)
    }

    fn check_reference(&self, term: &CostTerm) -> Result<()> {
        if term.needs_reference() && self.reference.is_none() {
            return invalid("tracking cost requires a reference profile");
        }
        Ok(())
    }

    pub(crate) fn validate_for_solve(&self) -> Result<()> {
        self.check_reference(&self.running_cost)?;
        self.check_reference(&self.terminal_cost)
    }

    /// `Σ_q w_q h(t, x_q, u(x_q))` and, if `grad` is given, its Euclidean gradient
    /// with respect to the coefficients.
    fn local_functional(&self, term: &CostTerm, step: usize, u: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let t = self.time(step);
        match (term, &self.space) {
            (CostTerm::Zero, _) => {
                if let Some(g) = grad {
                    g.iter_mut().for_each(|v| *v = 0.0);
                }
                0.0
            }
            // Parseval: identical to the collocation quadrature for fields in Sₙ.
            (CostTerm::HalfSquare, Space::Spectral(_)) => {
                if let Some(g) = grad {
                    g.copy_from_slice(u);
                }
                0.5 * dot(u, u)
            }
            (CostTerm::Tracking, Space::Spectral(_)) => {
                let r = self.reference_state(step).expect("reference checked before solving");
                let mut s = 0.0;
                match grad {
                    Some(g) => {
                        for ((gi, ui), ri) in g.iter_mut().zip(u).zip(r) {
                            let d = ui - ri;
                            s += d * d;
                            *gi = 2.0 * d;
                        }
                    }
                    None => s = u.iter().zip(r).map(|(a, b)| (a - b) * (a - b)).sum(),
                }
                s
            }
            _ => {
                let pts = self.space.points();
                let w = self.space.point_weights();
                let mut vals = vec![0.0; pts.len()];
                self.space.to_points(u, &mut vals);
                let refs = self.reference_points(step);
                let mut total = 0.0;
                for (q, v) in vals.iter_mut().enumerate() {
                    let r = refs.map_or(0.0, |r| r[q]);
                    let (val, der) = term.eval(t, pts[q], *v, r);
                    total += w[q] * val;
                    *v = der;
                }
                if let Some(g) = grad {
                    self.space.dual_from_points(&vals, g);
                }
                total
            }
        }
    }

    pub(crate) fn running(&self, step: usize, u: &[f64], grad: Option<&mut [f64]>) -> f64 {
        self.local_functional(&self.running_cost, step, u, grad)
    }

    pub(crate) fn terminal(&self, u: &[f64], grad: Option<&mut [f64]>) -> f64 {
        self.local_functional(&self.terminal_cost, self.steps, u, grad)
    }

    /// Galerkin reaction term `Pₙ F(u)`; `fprime` receives `f'(u)` on the
    /// collocation points for later Jacobian products.
    pub(crate) fn reaction_term(&self, u: &[f64], out: &mut [f64], fprime: &mut Vec<f64>) {
        if self.reaction.is_zero() {
            out.iter_mut().for_each(|v| *v = 0.0);
            fprime.clear();
            return;
        }
        let npts = self.space.points().len();
        let mut vals = vec![0.0; npts];
        fprime.resize(npts, 0.0);
        self.space.to_points(u, &mut vals);
        for (v, d) in vals.iter_mut().zip(fprime.iter_mut()) {
            let (f, fp) = self.reaction.eval(*v);
            *v = f;
            *d = fp;
        }
        self.space.project_points(&vals, out);
    }

    /// `F'(u) v` (a symmetric operator) from the stored `f'(u)` values.
    pub(crate) fn reaction_jacobian(&self, fprime: &[f64], v: &[f64], out: &mut [f64]) {
        if self.reaction.is_zero() {
            out.iter_mut().for_each(|x| *x = 0.0);
            return;
        }
        match &self.space {
            Space::Spectral(b) => {
                let mut vals = vec![0.0; fprime.len()];
                b.synthesize(v, &mut vals);
                vals.iter_mut().zip(fprime).for_each(|(a, d)| *a *= d);
                b.analyze(&vals, out);
            }
            Space::Fem(_) => {
                for ((o, a), d) in out.iter_mut().zip(v).zip(fprime) {
                    *o = a * d;
                }
            }
        }
    }

    /// `u_next = S z + noise`, where `S` applies the implicit diffusion solve
    /// and `noise` is `σ ξ` routed through the same solve.
    pub(crate) fn implicit_step(&self, z: &[f64], increment: Option<&[f64]>, out: &mut [f64]) {
        let sigma = self.sigma;
        match (&self.stepper, &self.space) {
            (Stepper::Spectral(denom), _) => {
                for k in 0..out.len() {
                    let noise = increment.map_or(0.0, |xi| sigma * xi[k]);
                    out[k] = (z[k] + noise) / denom[k];
                }
            }
            (Stepper::Fem(chol), Space::Fem(b)) => {
                b.mass().mul(z, out);
                if let Some(xi) = increment {
                    for (o, x) in out.iter_mut().zip(xi) {
                        *o += sigma * x;
                    }
                }
                chol.solve_in_place(out);
            }
            _ => unreachable!("stepper built for the problem's space"),
        }
    }

    /// `Sᵀ p`.
    pub(crate) fn implicit_transpose(&self, p: &[f64], out: &mut [f64]) {
        match (&self.stepper, &self.space) {
            (Stepper::Spectral(denom), _) => {
                for k in 0..out.len() {
                    out[k] = p[k] / denom[k];
                }
            }
            (Stepper::Fem(chol), Space::Fem(b)) => {
                let mut tmp = p.to_vec();
                chol.solve_in_place(&mut tmp);
                b.mass().mul(&tmp, out);
            }
            _ => unreachable!("stepper built for the problem's space"),
        }
    }

    /// Draws the noise path for this problem's grid.
    pub fn sample_noise(&self, seed: u64) -> NoisePath {
        sample_noise(seed, self.steps, self.dt, &self.space)
    }
}

/// Running cost density integrated over space plus the control penalty:
/// `∫ l(t, x, u) dx + ν/2 ‖g‖²`.
pub fn cost_integrand(problem: &ControlProblem, t: f64, u: &Field, g: &Field) -> Result<f64> {
    problem.space.check(u)?;
    problem.space.check(g)?;
    problem.check_reference(&problem.running_cost)?;
    let j = problem.step_index(t)?;
    Ok(problem.running(j, &u.coeffs, None) + 0.5 * problem.nu * problem.space.norm_sq(&g.coeffs))
}

/// Galerkin representers `(ℒ′(t, u), ℳ′(u))` of the derivatives of the
/// running and terminal functionals.
pub fn cost_gradients(problem: &ControlProblem, t: f64, u: &Field) -> Result<(Field, Field)> {
    problem.space.check(u)?;
    problem.validate_for_solve()?;
    let j = problem.step_index(t)?;
    let dim = problem.dim();
    let mut run = vec![0.0; dim];
    let mut term = vec![0.0; dim];
    problem.running(j, &u.coeffs, Some(&mut run));
    problem.local_functional(&problem.terminal_cost, j, &u.coeffs, Some(&mut term));
    let to_field = |euclid: Vec<f64>| -> Field {
        let coeffs = match &problem.space {
            Space::Spectral(_) => euclid,
            Space::Fem(b) => euclid.iter().zip(b.lumped_mass()).map(|(g, w)| g / w).collect(),
        };
        Field::new(coeffs, problem.kind())
    };
    Ok((to_field(run), to_field(term)))
}

/// Additive noise increments for one path, already scaled by `√dt` (and
/// correlated by the mass matrix for finite elements).
#[derive(Clone, Debug, PartialEq)]
pub struct NoisePath {
    pub seed: u64,
    pub steps: usize,
    pub dim: usize,
    pub increments: Vec<f64>,
}

impl NoisePath {
    pub fn increment(&self, step: usize) -> &[f64] {
        &self.increments[step * self.dim..(step + 1) * self.dim]
    }

    /// A noise path that is identically zero.
    pub fn zero(steps: usize, dim: usize) -> Self {
        NoisePath { seed: 0, steps, dim, increments: vec![0.0; steps * dim] }
    }
}

/// Spectral basis: i.i.d. `N(0, dt)` per mode. Finite elements: each slice
/// is `N(0, dt M)`, the load vector of white noise against the hats.
pub fn sample_noise(seed: u64, steps: usize, dt: f64, space: &Space) -> NoisePath {
    let dim = space.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd = dt.sqrt();
    let mut increments: Vec<f64> = (0..steps * dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sd * z
        })
        .collect();
    if let Space::Fem(b) = space {
        let chol = b.mass_cholesky();
        let mut out = vec![0.0; dim];
        for slice in increments.chunks_exact_mut(dim) {
            chol.mul_lower(slice, &mut out);
            slice.copy_from_slice(&out);
        }
    }
    NoisePath { seed, steps, dim, increments }
}

/// Deterministic, uncontrolled solution from the problem's initial state,
/// used as the tracking reference `u⁰`.
pub fn reference_profile(problem: &ControlProblem) -> Result<crate::forward::Trajectory> {
    let mut quiet = problem.with_sigma(0.0)?;
    quiet.running_cost = CostTerm::Zero;
    quiet.terminal_cost = CostTerm::Zero;
    let params = crate::ansatz::FeedbackParams::zero(problem.kind(), problem.dim(), problem.horizon());
    let noise = NoisePath::zero(problem.steps, problem.dim());
    crate::forward::forward_solve(&quiet, &params, &noise)
}

/// Indicator function `1_{[a, b]}` projected onto the problem space.
pub fn indicator(space: &Space, a: f64, b: f64) -> Field {
    space.project_fn(|x| if (a..=b).contains(&x) { 1.0 } else { 0.0 })
}

/// Constant function projected onto the space (exact in both bases).
pub fn constant(space: &Space, c: f64) -> Field {
    match space {
        Space::Spectral(b) => {
            let mut f = Field::zeros(b.dim(), BasisKind::Spectral);
            f.coeffs[0] = c * b.length().sqrt();
            f
        }
        Space::Fem(b) => Field::new(vec![c; b.dim()], BasisKind::Fem),
    }
}
