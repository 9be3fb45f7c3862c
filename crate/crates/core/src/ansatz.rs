//! Parametrized feedback families `Φ(t, u, α)` with hand-derived derivatives.
//!
//! Every family acts on coefficient vectors of dimension `d = n + 1` and
//! returns the control's coefficients in the same basis. Derivatives are
//! taken with respect to the Euclidean structure of the coefficient and
//! parameter vectors: [`FeedbackParams::vjp_into`] returns `Φ_uᵀ w` and
//! `Φ_αᵀ w`, [`FeedbackParams::jvp_into`] returns `Φ_u δu + Φ_α δα`.
//!
//! Networks read the input `(t · time_scale, η(u))` where `η` is the optional
//! radial cutoff, and map it to `d` output coefficients:
//!
//! * one layer: `B θ(A x + a)`,
//! * two layers: `C θ(B θ(A x + a) + b)`.
//!
//! The Nemytskii RBF family is defined on the hat basis and evaluates node by
//! node: `g_i = Σ_j α_{ijk} exp(−κ (u_i − ū_j)²)` for `t` in the `k`-th slice
//! of a uniform time partition.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::linalg::{axpy, dot, matvec, matvec_t};
use crate::riccati::RiccatiSolution;
use crate::spatial::{BasisKind, Field};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    /// Subgradient at zero is taken as zero.
    Relu,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> (f64, f64) {
        match self {
            Activation::Tanh => {
                let v = z.tanh();
                (v, 1.0 - v * v)
            }
            Activation::Relu => {
                if z > 0.0 {
                    (z, 1.0)
                } else {
                    (0.0, 0.0)
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            other => invalid(format!("unknown activation '{other}'")),
        }
    }
}

/// Shape of a feedback family.
#[derive(Clone, Debug)]
pub enum Family {
    Zero,
    /// `g_i = α_{i,k(t)} u_i` with `intervals` piecewise-constant time slices.
    LinearDiagonal { intervals: usize },
    OneLayer { hidden: usize, activation: Activation, cutoff: Option<f64>, time_scale: f64 },
    TwoLayer {
        hidden1: usize,
        hidden2: usize,
        activation: Activation,
        cutoff: Option<f64>,
        time_scale: f64,
    },
    RbfNemytskii { neurons: usize, intervals: usize, kappa: f64, train_centers: bool },
    /// Fixed Riccati gains; no trainable parameters.
    Riccati(Arc<RiccatiSolution>),
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Zero => "zero",
            Family::LinearDiagonal { .. } => "linear-diagonal",
            Family::OneLayer { .. } => "one-layer",
            Family::TwoLayer { .. } => "two-layer",
            Family::RbfNemytskii { .. } => "rbf-nemytskii",
            Family::Riccati(_) => "riccati",
        }
    }

    /// Parameter count `d_m` for coefficient dimension `dim`.
    pub fn param_count(&self, dim: usize) -> usize {
        match *self {
            Family::Zero | Family::Riccati(_) => 0,
            Family::LinearDiagonal { intervals } => dim * intervals,
            Family::OneLayer { hidden: k, .. } => k * (dim + 1) + k + dim * k,
            Family::TwoLayer { hidden1: k1, hidden2: k2, .. } => k1 * (dim + 1) + k1 + k2 * k1 + k2 + dim * k2,
            Family::RbfNemytskii { neurons, intervals, .. } => dim * neurons * intervals + neurons,
        }
    }
}

/// Radial cutoff `η^l(x) = x` for `|x| ≤ l`, `l x / |x|` otherwise.
pub fn cutoff(x: &[f64], radius: f64) -> Vec<f64> {
    let r = dot(x, x).sqrt();
    if r <= radius {
        x.to_vec()
    } else {
        x.iter().map(|v| radius * v / r).collect()
    }
}

/// `Jᵀ w = J w` of the cutoff at `x` (the Jacobian is symmetric).
fn cutoff_jacobian(x: &[f64], radius: f64, w: &[f64], out: &mut [f64]) {
    let r = dot(x, x).sqrt();
    if r <= radius {
        out.copy_from_slice(w);
    } else {
        let proj = dot(x, w) / (r * r);
        for ((o, wi), xi) in out.iter_mut().zip(w).zip(x) {
            *o = radius / r * (wi - proj * xi);
        }
    }
}

/// Feedback family together with its flat parameter vector `α`.
#[derive(Clone, Debug)]
pub struct FeedbackParams {
    family: Family,
    kind: BasisKind,
    dim: usize,
    horizon: f64,
    pub alpha: Vec<f64>,
}

/// Intermediate values of a network evaluation.
struct NetCache {
    input: Vec<f64>,
    h1: Vec<f64>,
    d1: Vec<f64>,
    h2: Vec<f64>,
    d2: Vec<f64>,
}

impl FeedbackParams {
    /// Validates shapes and wraps an explicit parameter vector.
    pub fn new(family: Family, kind: BasisKind, dim: usize, horizon: f64, alpha: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return invalid("feedback dimension must be positive");
        }
        if !(horizon > 0.0) {
            return invalid(format!("horizon must be positive, got {horizon}"));
        }
        match &family {
            Family::LinearDiagonal { intervals } if *intervals == 0 => {
                return invalid("linear-diagonal family needs at least one time interval")
            }
            Family::OneLayer { hidden, cutoff, time_scale, .. } => {
                if *hidden == 0 {
                    return invalid("one-layer network needs at least one neuron");
                }
                check_net_options(*cutoff, *time_scale)?;
            }
            Family::TwoLayer { hidden1, hidden2, cutoff, time_scale, .. } => {
                if *hidden1 == 0 || *hidden2 == 0 {
                    return invalid("two-layer network needs at least one neuron per layer");
                }
                check_net_options(*cutoff, *time_scale)?;
            }
            Family::RbfNemytskii { neurons, intervals, kappa, .. } => {
                if kind != BasisKind::Fem {
                    return invalid("the Nemytskii RBF family evaluates nodally and needs the finite-element basis");
                }
                if *neurons == 0 || *intervals == 0 || !(*kappa > 0.0) {
                    return invalid("RBF family needs neurons > 0, intervals > 0 and kappa > 0");
                }
            }
            Family::Riccati(sol) => {
                if kind != BasisKind::Spectral {
                    return invalid("the Riccati benchmark is defined on the spectral basis only");
                }
                if sol.dim() != dim {
                    return invalid(format!("Riccati gains have {} modes, expected {dim}", sol.dim()));
                }
            }
            _ => {}
        }
        let expected = family.param_count(dim);
        if alpha.len() != expected {
            return invalid(format!(
                "{} family with dimension {dim} has {expected} parameters, got {}",
                family.name(),
                alpha.len()
            ));
        }
        if alpha.iter().any(|a| !a.is_finite()) {
            return invalid("parameters must be finite");
        }
        Ok(FeedbackParams { family, kind, dim, horizon, alpha })
    }

    /// The zero feedback.
    pub fn zero(kind: BasisKind, dim: usize, horizon: f64) -> Self {
        FeedbackParams { family: Family::Zero, kind, dim, horizon, alpha: Vec::new() }
    }

    /// All-zero parameter vector (the zero control for every family except Riccati).
    pub fn zeros(family: Family, kind: BasisKind, dim: usize, horizon: f64) -> Result<Self> {
        let n = family.param_count(dim);
        Self::new(family, kind, dim, horizon, vec![0.0; n])
    }

    /// Default initialization: hidden weights and biases uniform in
    /// `±1/√fan_in`, output layer zero (so the first iterate is `G ≡ 0`),
    /// RBF centres evenly spread over `[−0.25, 1.25]`.
    pub fn initialize(family: Family, kind: BasisKind, dim: usize, horizon: f64, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(family, kind, dim, horizon)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |slice: &mut [f64], fan_in: usize| {
            let b = 1.0 / (fan_in as f64).sqrt();
            slice.iter_mut().for_each(|v| *v = rng.random_range(-b..b));
        };
        match p.family.clone() {
            Family::OneLayer { hidden: k, .. } => {
                fill(&mut p.alpha[..k * (dim + 2)], dim + 1);
            }
            Family::TwoLayer { hidden1: k1, hidden2: k2, .. } => {
                fill(&mut p.alpha[..k1 * (dim + 2)], dim + 1);
                let off = k1 * (dim + 2);
                fill(&mut p.alpha[off..off + k2 * k1 + k2], k1);
            }
            Family::RbfNemytskii { neurons, intervals, .. } => {
                let off = dim * neurons * intervals;
                for j in 0..neurons {
                    let s = if neurons == 1 { 0.5 } else { j as f64 / (neurons - 1) as f64 };
                    p.alpha[off + j] = -0.25 + 1.5 * s;
                }
            }
            _ => {}
        }
        Ok(p)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn param_count(&self) -> usize {
        self.family.param_count(self.dim)
    }

    /// Same family and shape with another parameter vector.
    pub fn with_alpha(&self, alpha: Vec<f64>) -> Result<Self> {
        Self::new(self.family.clone(), self.kind, self.dim, self.horizon, alpha)
    }

    pub fn check(&self, t: f64, u: &Field) -> Result<()> {
        if !(0.0..=self.horizon * (1.0 + 1e-12)).contains(&t) {
            return invalid(format!("time {t} outside [0, {}]", self.horizon));
        }
        if u.kind != self.kind || u.len() != self.dim {
            return invalid(format!(
                "state ({}, {} coefficients) does not match the feedback basis ({}, {})",
                u.kind.name(),
                u.len(),
                self.kind.name(),
                self.dim
            ));
        }
        let expected = self.param_count();
        if self.alpha.len() != expected {
            return invalid(format!("expected {expected} parameters, got {}", self.alpha.len()));
        }
        Ok(())
    }

    fn interval(&self, t: f64, intervals: usize) -> usize {
        let k = (t / self.horizon * intervals as f64).floor();
        (k.max(0.0) as usize).min(intervals - 1)
    }

    fn riccati_step(sol: &RiccatiSolution, t: f64) -> usize {
        ((t / sol.dt()).round().max(0.0) as usize).min(sol.steps())
    }

    fn net_input(&self, t: f64, u: &[f64], cut: Option<f64>, time_scale: f64) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.dim + 1);
        x.push(t * time_scale);
        match cut {
            Some(l) => x.extend(cutoff(u, l)),
            None => x.extend_from_slice(u),
        }
        x
    }

    fn net_forward(&self, t: f64, u: &[f64]) -> NetCache {
        let d = self.dim;
        let a = &self.alpha;
        match self.family {
            Family::OneLayer { hidden: k, activation, cutoff, time_scale } => {
                let input = self.net_input(t, u, cutoff, time_scale);
                let mut z1 = vec![0.0; k];
                matvec(&a[..k * (d + 1)], k, d + 1, &input, &mut z1);
                let bias = &a[k * (d + 1)..k * (d + 2)];
                let mut h1 = vec![0.0; k];
                let mut d1 = vec![0.0; k];
                for i in 0..k {
                    z1[i] += bias[i];
                    (h1[i], d1[i]) = activation.apply(z1[i]);
                }
                NetCache { input, h1, d1, h2: Vec::new(), d2: Vec::new() }
            }
            Family::TwoLayer { hidden1: k1, hidden2: k2, activation, cutoff, time_scale } => {
                let input = self.net_input(t, u, cutoff, time_scale);
                let mut z1 = vec![0.0; k1];
                matvec(&a[..k1 * (d + 1)], k1, d + 1, &input, &mut z1);
                let mut off = k1 * (d + 1);
                let mut h1 = vec![0.0; k1];
                let mut d1 = vec![0.0; k1];
                for i in 0..k1 {
                    z1[i] += a[off + i];
                    (h1[i], d1[i]) = activation.apply(z1[i]);
                }
                off += k1;
                let mut z2 = vec![0.0; k2];
                matvec(&a[off..off + k2 * k1], k2, k1, &h1, &mut z2);
                off += k2 * k1;
                let mut h2 = vec![0.0; k2];
                let mut d2 = vec![0.0; k2];
                for i in 0..k2 {
                    z2[i] += a[off + i];
                    (h2[i], d2[i]) = activation.apply(z2[i]);
                }
                NetCache { input, h1, d1, h2, d2 }
            }
            _ => unreachable!("net_forward called on a non-network family"),
        }
    }

    /// Writes `Φ(t, u, α)` into `out` (no argument checks).
    pub fn eval_into(&self, t: f64, u: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let a = &self.alpha;
        match &self.family {
            Family::Zero => out.iter_mut().for_each(|v| *v = 0.0),
            Family::LinearDiagonal { intervals } => {
                let k = self.interval(t, *intervals);
                let gains = &a[k * d..(k + 1) * d];
                for i in 0..d {
                    out[i] = gains[i] * u[i];
                }
            }
            Family::OneLayer { hidden: k, .. } => {
                let c = self.net_forward(t, u);
                let off = k * (d + 2);
                matvec(&a[off..off + d * k], d, *k, &c.h1, out);
            }
            Family::TwoLayer { hidden1: k1, hidden2: k2, .. } => {
                let c = self.net_forward(t, u);
                let off = k1 * (d + 2) + k2 * k1 + k2;
                matvec(&a[off..off + d * k2], d, *k2, &c.h2, out);
            }
            Family::RbfNemytskii { neurons: m, intervals, kappa, .. } => {
                let k = self.interval(t, *intervals);
                let centers = &a[d * m * intervals..];
                let w = &a[k * d * m..(k + 1) * d * m];
                for i in 0..d {
                    let mut s = 0.0;
                    for j in 0..*m {
                        let diff = u[i] - centers[j];
                        s += w[i * m + j] * (-kappa * diff * diff).exp();
                    }
                    out[i] = s;
                }
            }
            Family::Riccati(sol) => {
                let j = Self::riccati_step(sol, t);
                for i in 0..d {
                    out[i] = sol.gain(i, j) * u[i];
                }
            }
        }
    }

    /// `grad_u = Φ_uᵀ w` and `grad_alpha += scale · Φ_αᵀ w` (no argument checks).
    pub fn vjp_into(&self, t: f64, u: &[f64], w: &[f64], grad_u: &mut [f64], grad_alpha: &mut [f64], scale: f64) {
        let d = self.dim;
        let a = &self.alpha;
        match &self.family {
            Family::Zero => grad_u.iter_mut().for_each(|v| *v = 0.0),
            Family::LinearDiagonal { intervals } => {
                let k = self.interval(t, *intervals);
                for i in 0..d {
                    grad_u[i] = a[k * d + i] * w[i];
                    grad_alpha[k * d + i] += scale * u[i] * w[i];
                }
            }
            Family::OneLayer { hidden: k, cutoff, .. } => {
                let k = *k;
                let c = self.net_forward(t, u);
                let off_b = k * (d + 2);
                // gh = Bᵀ w, grad B = w h1ᵀ
                let mut gz = vec![0.0; k];
                matvec_t(&a[off_b..off_b + d * k], d, k, w, &mut gz);
                for i in 0..d {
                    if w[i] != 0.0 {
                        axpy(scale * w[i], &c.h1, &mut grad_alpha[off_b + i * k..off_b + (i + 1) * k]);
                    }
                }
                for (g, dv) in gz.iter_mut().zip(&c.d1) {
                    *g *= dv;
                }
                self.first_layer_vjp(k, &c.input, &gz, u, *cutoff, grad_u, grad_alpha, scale);
            }
            Family::TwoLayer { hidden1: k1, hidden2: k2, cutoff, .. } => {
                let (k1, k2) = (*k1, *k2);
                let c = self.net_forward(t, u);
                let off_bb = k1 * (d + 2);
                let off_b2 = off_bb + k2 * k1;
                let off_c = off_b2 + k2;
                let mut gz2 = vec![0.0; k2];
                matvec_t(&a[off_c..off_c + d * k2], d, k2, w, &mut gz2);
                for i in 0..d {
                    if w[i] != 0.0 {
                        axpy(scale * w[i], &c.h2, &mut grad_alpha[off_c + i * k2..off_c + (i + 1) * k2]);
                    }
                }
                for (g, dv) in gz2.iter_mut().zip(&c.d2) {
                    *g *= dv;
                }
                for i in 0..k2 {
                    grad_alpha[off_b2 + i] += scale * gz2[i];
                    if gz2[i] != 0.0 {
                        axpy(scale * gz2[i], &c.h1, &mut grad_alpha[off_bb + i * k1..off_bb + (i + 1) * k1]);
                    }
                }
                let mut gz1 = vec![0.0; k1];
                matvec_t(&a[off_bb..off_bb + k2 * k1], k2, k1, &gz2, &mut gz1);
                for (g, dv) in gz1.iter_mut().zip(&c.d1) {
                    *g *= dv;
                }
                self.first_layer_vjp(k1, &c.input, &gz1, u, *cutoff, grad_u, grad_alpha, scale);
            }
            Family::RbfNemytskii { neurons: m, intervals, kappa, train_centers } => {
                let m = *m;
                let k = self.interval(t, *intervals);
                let off_c = d * m * intervals;
                let wk = k * d * m;
                for i in 0..d {
                    let mut gu = 0.0;
                    for j in 0..m {
                        let diff = u[i] - a[off_c + j];
                        let phi = (-kappa * diff * diff).exp();
                        let dphi = -2.0 * kappa * diff * phi;
                        let weight = a[wk + i * m + j];
                        gu += weight * dphi;
                        grad_alpha[wk + i * m + j] += scale * phi * w[i];
                        if *train_centers {
                            grad_alpha[off_c + j] -= scale * weight * dphi * w[i];
                        }
                    }
                    grad_u[i] = gu * w[i];
                }
            }
            Family::Riccati(sol) => {
                let j = Self::riccati_step(sol, t);
                for i in 0..d {
                    grad_u[i] = sol.gain(i, j) * w[i];
                }
            }
        }
    }

    /// Shared tail of the network VJPs: given `gz = ∂/∂z₁`, accumulate the
    /// first-layer parameter gradient and pull back to the state.
    #[allow(clippy::too_many_arguments)]
    fn first_layer_vjp(
        &self,
        k: usize,
        input: &[f64],
        gz: &[f64],
        u: &[f64],
        cut: Option<f64>,
        grad_u: &mut [f64],
        grad_alpha: &mut [f64],
        scale: f64,
    ) {
        let d = self.dim;
        let off_a = k * (d + 1);
        for i in 0..k {
            grad_alpha[off_a + i] += scale * gz[i];
            if gz[i] != 0.0 {
                axpy(scale * gz[i], input, &mut grad_alpha[i * (d + 1)..(i + 1) * (d + 1)]);
            }
        }
        let mut gx = vec![0.0; d + 1];
        matvec_t(&self.alpha[..k * (d + 1)], k, d + 1, gz, &mut gx);
        match cut {
            Some(l) => cutoff_jacobian(u, l, &gx[1..], grad_u),
            None => grad_u.copy_from_slice(&gx[1..]),
        }
    }

    /// Forward-mode derivative `Φ_u δu + Φ_α δα` (no argument checks).
    pub fn jvp_into(&self, t: f64, u: &[f64], du: &[f64], dalpha: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let a = &self.alpha;
        match &self.family {
            Family::Zero => out.iter_mut().for_each(|v| *v = 0.0),
            Family::LinearDiagonal { intervals } => {
                let k = self.interval(t, *intervals);
                for i in 0..d {
                    out[i] = a[k * d + i] * du[i] + dalpha[k * d + i] * u[i];
                }
            }
            Family::OneLayer { hidden: k, cutoff, .. } => {
                let k = *k;
                let c = self.net_forward(t, u);
                let dz = self.first_layer_jvp(k, &c.input, u, du, dalpha, *cutoff);
                let dh: Vec<f64> = dz.iter().zip(&c.d1).map(|(z, dv)| z * dv).collect();
                let off_b = k * (d + 2);
                let mut t1 = vec![0.0; d];
                matvec(&a[off_b..off_b + d * k], d, k, &dh, out);
                matvec(&dalpha[off_b..off_b + d * k], d, k, &c.h1, &mut t1);
                out.iter_mut().zip(&t1).for_each(|(o, v)| *o += v);
            }
            Family::TwoLayer { hidden1: k1, hidden2: k2, cutoff, .. } => {
                let (k1, k2) = (*k1, *k2);
                let c = self.net_forward(t, u);
                let dz1 = self.first_layer_jvp(k1, &c.input, u, du, dalpha, *cutoff);
                let dh1: Vec<f64> = dz1.iter().zip(&c.d1).map(|(z, dv)| z * dv).collect();
                let off_bb = k1 * (d + 2);
                let off_b2 = off_bb + k2 * k1;
                let off_c = off_b2 + k2;
                let mut dz2 = vec![0.0; k2];
                let mut tmp = vec![0.0; k2];
                matvec(&a[off_bb..off_b2], k2, k1, &dh1, &mut dz2);
                matvec(&dalpha[off_bb..off_b2], k2, k1, &c.h1, &mut tmp);
                for i in 0..k2 {
                    dz2[i] = (dz2[i] + tmp[i] + dalpha[off_b2 + i]) * c.d2[i];
                }
                let mut t1 = vec![0.0; d];
                matvec(&a[off_c..off_c + d * k2], d, k2, &dz2, out);
                matvec(&dalpha[off_c..off_c + d * k2], d, k2, &c.h2, &mut t1);
                out.iter_mut().zip(&t1).for_each(|(o, v)| *o += v);
            }
            Family::RbfNemytskii { neurons: m, intervals, kappa, train_centers } => {
                let m = *m;
                let k = self.interval(t, *intervals);
                let off_c = d * m * intervals;
                let wk = k * d * m;
                for i in 0..d {
                    let mut s = 0.0;
                    for j in 0..m {
                        let diff = u[i] - a[off_c + j];
                        let phi = (-kappa * diff * diff).exp();
                        let dphi = -2.0 * kappa * diff * phi;
                        let weight = a[wk + i * m + j];
                        s += weight * dphi * du[i] + dalpha[wk + i * m + j] * phi;
                        if *train_centers {
                            s -= weight * dphi * dalpha[off_c + j];
                        }
                    }
                    out[i] = s;
                }
            }
            Family::Riccati(sol) => {
                let j = Self::riccati_step(sol, t);
                for i in 0..d {
                    out[i] = sol.gain(i, j) * du[i];
                }
            }
        }
    }

    fn first_layer_jvp(&self, k: usize, input: &[f64], u: &[f64], du: &[f64], dalpha: &[f64], cut: Option<f64>) -> Vec<f64> {
        let d = self.dim;
        let mut dx = vec![0.0; d + 1];
        match cut {
            Some(l) => cutoff_jacobian(u, l, du, &mut dx[1..]),
            None => dx[1..].copy_from_slice(du),
        }
        let mut dz = vec![0.0; k];
        let mut tmp = vec![0.0; k];
        matvec(&self.alpha[..k * (d + 1)], k, d + 1, &dx, &mut dz);
        matvec(&dalpha[..k * (d + 1)], k, d + 1, input, &mut tmp);
        let off_a = k * (d + 1);
        for i in 0..k {
            dz[i] += tmp[i] + dalpha[off_a + i];
        }
        dz
    }
}

fn check_net_options(cut: Option<f64>, time_scale: f64) -> Result<()> {
    if let Some(l) = cut {
        if !(l > 0.0) {
            return invalid(format!("cutoff radius must be positive, got {l}"));
        }
    }
    if !time_scale.is_finite() {
        return invalid("time scale must be finite");
    }
    Ok(())
}

/// `Φ(t, u, α)`.
pub fn feedback_eval(params: &FeedbackParams, t: f64, u: &Field) -> Result<Field> {
    params.check(t, u)?;
    let mut out = vec![0.0; params.dim];
    params.eval_into(t, &u.coeffs, &mut out);
    Ok(Field::new(out, params.kind))
}

/// `Φ_u(t, u, α)ᵀ w`.
pub fn feedback_vjp_state(params: &FeedbackParams, t: f64, u: &Field, w: &Field) -> Result<Field> {
    params.check(t, u)?;
    params.check(t, w)?;
    let mut gu = vec![0.0; params.dim];
    let mut ga = vec![0.0; params.param_count()];
    params.vjp_into(t, &u.coeffs, &w.coeffs, &mut gu, &mut ga, 1.0);
    Ok(Field::new(gu, params.kind))
}

/// `Φ_α(t, u, α)ᵀ w`.
pub fn feedback_vjp_params(params: &FeedbackParams, t: f64, u: &Field, w: &Field) -> Result<Vec<f64>> {
    params.check(t, u)?;
    params.check(t, w)?;
    let mut gu = vec![0.0; params.dim];
    let mut ga = vec![0.0; params.param_count()];
    params.vjp_into(t, &u.coeffs, &w.coeffs, &mut gu, &mut ga, 1.0);
    Ok(ga)
}

/// `Φ_u(t, u, α) δu + Φ_α(t, u, α) δα`.
pub fn feedback_jvp(params: &FeedbackParams, t: f64, u: &Field, du: &Field, dalpha: &[f64]) -> Result<Field> {
    params.check(t, u)?;
    params.check(t, du)?;
    if dalpha.len() != params.param_count() {
        return invalid(format!("direction has {} entries, expected {}", dalpha.len(), params.param_count()));
    }
    let mut out = vec![0.0; params.dim];
    params.jvp_into(t, &u.coeffs, &du.coeffs, dalpha, &mut out);
    Ok(Field::new(out, params.kind))
}
