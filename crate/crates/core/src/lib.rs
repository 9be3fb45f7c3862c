//! Feedback control of stochastic reaction-diffusion equations on an
//! interval with Neumann boundary conditions.
//!
//! The state is discretized either on cosine eigenfunctions of the Neumann
//! Laplacian or on piecewise-linear hats, integrated with a semi-implicit
//! Euler–Maruyama scheme, and steered by a parametrized feedback `Φ(t, u, α)`.
//! Parameters are trained by stochastic gradient descent on Monte-Carlo
//! estimates of the cost gradient, each sample obtained from one forward
//! solve and one backward costate sweep. A per-mode Riccati solver gives the
//! optimal feedback of the linear-quadratic heat problem as a benchmark.

// `!(x > 0.0)` deliberately rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adjoint;
pub mod ansatz;
pub mod dynamics;
pub mod error;
pub mod forward;
pub mod io;
pub mod linalg;
pub mod optimize;
pub mod riccati;
pub mod spatial;

pub use adjoint::{adjoint_gradient, adjoint_solve, forward_sensitivity, pathwise_gradient, AdjointTrajectory};
pub use ansatz::{
    cutoff, feedback_eval, feedback_jvp, feedback_vjp_params, feedback_vjp_state, Activation, Family, FeedbackParams,
};
pub use dynamics::{
    cost_gradients, cost_integrand, model, reference_profile, sample_noise, ControlProblem, CostTerm, Model,
    NoisePath, ProblemSetup, Reaction,
};
pub use error::{Error, Result};
pub use forward::{forward_solve, pathwise_cost, Trajectory};
pub use optimize::{evaluate_cost, grad_check, mc_gradient, sgd_train, GradientEstimate, TrainConfig};
pub use riccati::{lq_optimal_cost, riccati_feedback, riccati_solve, RiccatiSolution};
pub use spatial::{
    evaluate_field, fem_assemble, l2_project_fem, project_spectral, spectral_basis, BasisKind, FemBasis, Field,
    SpectralBasis, Space,
};
