//! Linear-quadratic benchmark on the cosine basis.
//!
//! The Laplacian is diagonal on the cosine modes, so the operator Riccati
//! equation `∂ₜP + PΔ + ΔP − Id + P² = 0`, `P(T) = −Id` decouples into the
//! scalar equations `p_k' = 1 + 2λ_k p_k − p_k²`, `p_k(T) = −1`. The optimal
//! feedback is `g = P(t) u`, i.e. `g_k = p_k(t) u_k`.

use crate::error::{invalid, Result};
use crate::spatial::{BasisKind, Field};

/// Mode-wise Riccati gains on the time grid `t_j = j dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct RiccatiSolution {
    length: f64,
    horizon: f64,
    dt: f64,
    steps: usize,
    eigenvalues: Vec<f64>,
    /// `gains[k * (steps + 1) + j] = p_k(t_j)`
    gains: Vec<f64>,
}

impl RiccatiSolution {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn gain(&self, mode: usize, step: usize) -> f64 {
        self.gains[mode * (self.steps + 1) + step]
    }

    /// The whole trajectory `p_k(t_0..=t_N)` of one mode.
    pub fn mode(&self, mode: usize) -> &[f64] {
        &self.gains[mode * (self.steps + 1)..(mode + 1) * (self.steps + 1)]
    }

    pub fn step_index(&self, t: f64) -> Result<usize> {
        let r = t / self.dt;
        let j = r.round();
        if !(j >= 0.0) || j as usize > self.steps || (r - j).abs() > 1e-8 * r.abs().max(1.0) {
            return invalid(format!("time {t} is not on the Riccati grid"));
        }
        Ok(j as usize)
    }
}

fn rhs(lambda: f64, p: f64) -> f64 {
    1.0 + 2.0 * lambda * p - p * p
}

/// Integrates one scalar Riccati equation backward from `p(T) = −1` with the
/// classical Runge–Kutta method. Stiff modes take several substeps per grid
/// interval so that `h (2√(λ² + 1) + 2|λ|) ≤ ½`.
pub fn riccati_mode(lambda: f64, horizon: f64, dt: f64) -> Result<Vec<f64>> {
    let steps = grid_steps(horizon, dt)?;
    let rate = 2.0 * (lambda * lambda + 1.0).sqrt() + 2.0 * lambda.abs();
    let sub = ((dt * rate) / 0.5).ceil().max(1.0) as usize;
    let h = -dt / sub as f64;
    let mut p = vec![0.0; steps + 1];
    let mut cur = -1.0;
    p[steps] = cur;
    for j in (0..steps).rev() {
        for _ in 0..sub {
            let k1 = rhs(lambda, cur);
            let k2 = rhs(lambda, cur + 0.5 * h * k1);
            let k3 = rhs(lambda, cur + 0.5 * h * k2);
            let k4 = rhs(lambda, cur + h * k3);
            cur += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        p[j] = cur;
    }
    Ok(p)
}

fn grid_steps(horizon: f64, dt: f64) -> Result<usize> {
    if !(horizon > 0.0) || !(dt > 0.0) || dt >= horizon {
        return invalid(format!("need 0 < dt < T, got dt = {dt}, T = {horizon}"));
    }
    let r = horizon / dt;
    let n = r.round();
    if (r - n).abs() > 1e-9 * r {
        return invalid(format!("T / dt = {r} is not an integer"));
    }
    Ok(n as usize)
}

/// Solves the decoupled Riccati system for modes `0..=n` on `(0, L)`.
pub fn riccati_solve(length: f64, n: usize, horizon: f64, dt: f64) -> Result<RiccatiSolution> {
    if !(length > 0.0) {
        return invalid(format!("domain length must be positive, got {length}"));
    }
    if n == 0 {
        return invalid("need at least one non-constant mode");
    }
    let steps = grid_steps(horizon, dt)?;
    let eigenvalues: Vec<f64> =
        (0..=n).map(|k| (k as f64 * std::f64::consts::PI / length).powi(2)).collect();
    let mut gains = Vec::with_capacity((n + 1) * (steps + 1));
    for &l in &eigenvalues {
        gains.extend(riccati_mode(l, horizon, dt)?);
    }
    Ok(RiccatiSolution { length, horizon, dt, steps, eigenvalues, gains })
}

/// Riccati feedback `g_k = p_k(t) u_k`.
pub fn riccati_feedback(sol: &RiccatiSolution, t: f64, u: &Field) -> Result<Field> {
    if u.kind != BasisKind::Spectral {
        return invalid("the Riccati benchmark is defined on the spectral basis only");
    }
    if u.len() != sol.dim() {
        return invalid(format!("field has {} modes, gains have {}", u.len(), sol.dim()));
    }
    let j = sol.step_index(t)?;
    Ok(Field::new(
        u.coeffs.iter().enumerate().map(|(k, c)| sol.gain(k, j) * c).collect(),
        BasisKind::Spectral,
    ))
}

fn check_initial(sol: &RiccatiSolution, u0: &Field) -> Result<()> {
    if u0.kind != BasisKind::Spectral || u0.len() != sol.dim() {
        return invalid("initial state must be a spectral field with the Riccati mode count");
    }
    Ok(())
}

/// Continuous-time value `V(0, u₀) = −½ Σ p_k(0) u₀ₖ² − σ²/2 Σ ∫₀ᵀ p_k`,
/// with the time integral by the trapezoidal rule on the grid.
pub fn lq_value_continuous(sol: &RiccatiSolution, u0: &Field, sigma: f64) -> Result<f64> {
    check_initial(sol, u0)?;
    let mut v = 0.0;
    for k in 0..sol.dim() {
        let p = sol.mode(k);
        let integral: f64 = p.windows(2).map(|w| 0.5 * sol.dt * (w[0] + w[1])).sum();
        v += -0.5 * p[0] * u0.coeffs[k].powi(2) - 0.5 * sigma * sigma * integral;
    }
    Ok(v)
}

/// Expected cost of the Riccati closed loop under the semi-implicit
/// Euler–Maruyama scheme with step `dt`, computed exactly from the
/// per-mode mean and variance recursions
///
/// `m_{j+1} = (1 + dt p_j) m_j / (1 + dt λ)`,
/// `v_{j+1} = ((1 + dt p_j)² v_j + σ² dt) / (1 + dt λ)²`,
///
/// for the cost `Σ_j dt ½ (1 + p_j²) E u_j² + ½ E u_N²`.
pub fn lq_optimal_cost(sol: &RiccatiSolution, u0: &Field, sigma: f64) -> Result<f64> {
    check_initial(sol, u0)?;
    let dt = sol.dt;
    let mut total = 0.0;
    for k in 0..sol.dim() {
        let p = sol.mode(k);
        let denom = 1.0 + dt * sol.eigenvalues[k];
        let mut mean = u0.coeffs[k];
        let mut var = 0.0;
        for &pj in &p[..sol.steps] {
            let second = mean * mean + var;
            total += dt * 0.5 * (1.0 + pj * pj) * second;
            let a = 1.0 + dt * pj;
            mean = a * mean / denom;
            var = (a * a * var + sigma * sigma * dt) / (denom * denom);
        }
        total += 0.5 * (mean * mean + var);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_zero_is_stationary() {
        let p = riccati_mode(0.0, 20.0, 0.05).unwrap();
        assert!(p.iter().all(|&v| (v + 1.0).abs() <= 1e-10));
        assert_eq!(*p.last().unwrap(), -1.0);
    }

    #[test]
    fn long_horizon_limit() {
        let p = riccati_mode(1.0, 20.0, 0.05).unwrap();
        assert!((p[0] - (1.0 - 2f64.sqrt())).abs() < 1e-6);
    }

    #[test]
    fn gains_lie_between_terminal_value_and_zero() {
        let sol = riccati_solve(20.0, 16, 5.0, 0.05).unwrap();
        for k in 0..sol.dim() {
            assert_eq!(sol.gain(k, sol.steps()), -1.0);
            assert!(sol.mode(k).iter().all(|&p| (-1.0..=0.0).contains(&p)));
        }
        // nondecreasing in λ at every time
        for j in 0..sol.steps() {
            for k in 1..sol.dim() {
                assert!(sol.gain(k, j) >= sol.gain(k - 1, j) - 1e-15);
            }
        }
    }

    #[test]
    fn feedback_examples() {
        let sol = riccati_solve(20.0, 4, 1.0, 0.1).unwrap();
        let e0 = Field::unit(5, 0, BasisKind::Spectral);
        for j in 0..=10 {
            let g = riccati_feedback(&sol, j as f64 * 0.1, &e0).unwrap();
            assert!((g.coeffs[0] + 1.0).abs() < 1e-12);
        }
        let zero = Field::zeros(5, BasisKind::Spectral);
        assert!(riccati_feedback(&sol, 0.5, &zero).unwrap().coeffs.iter().all(|&c| c == 0.0));
        assert!(riccati_feedback(&sol, 0.5, &Field::zeros(5, BasisKind::Fem)).is_err());
    }

    #[test]
    fn deterministic_cost_of_constant_state() {
        let sol = riccati_solve(1.0, 3, 2.0, 0.01).unwrap();
        let e0 = Field::unit(4, 0, BasisKind::Spectral);
        let v = lq_value_continuous(&sol, &e0, 0.0).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
        // the discrete closed loop approaches the same value as dt -> 0
        let d = lq_optimal_cost(&sol, &e0, 0.0).unwrap();
        assert!((d - 0.5).abs() < 1e-2);
    }

    #[test]
    fn noise_only_cost_is_nonnegative() {
        let sol = riccati_solve(20.0, 8, 4.0, 0.05).unwrap();
        let zero = Field::zeros(9, BasisKind::Spectral);
        assert!(lq_value_continuous(&sol, &zero, 0.05).unwrap() >= 0.0);
        assert!(lq_optimal_cost(&sol, &zero, 0.05).unwrap() >= 0.0);
    }
}
