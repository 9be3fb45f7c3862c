//! Spatial discretization of `Λ = (0, L)` with homogeneous Neumann boundary
//! conditions: the cosine spectral basis and the piecewise-linear
//! finite-element basis.
//!
//! Both bases describe an `n + 1` dimensional subspace `Sₙ`. A [`Field`] is a
//! coefficient vector in one of them: spectral coefficients with respect to
//! the orthonormal cosine functions, or nodal values of the hat functions.
//!
//! Pointwise (Nemytskii) maps are evaluated on a collocation grid that each
//! basis carries together with trapezoidal weights. For the spectral basis the
//! grid is `Q + 1` equispaced nodes with `Q = 2(n + 1)`, on which the
//! trapezoidal rule integrates products of two basis functions exactly. For
//! the finite-element basis the grid is the mesh itself and the weights are the
//! lumped masses, so the discrete inner product of two fields is `Σ wᵢ aᵢ bᵢ`.

use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::linalg::{dot, BidiagCholesky, SymTridiag};

/// Which basis a coefficient vector refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BasisKind {
    Spectral,
    Fem,
}

impl BasisKind {
    pub fn name(self) -> &'static str {
        match self {
            BasisKind::Spectral => "spectral",
            BasisKind::Fem => "fem",
        }
    }
}

/// A function in `Sₙ`, stored as its coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    pub coeffs: Vec<f64>,
    pub kind: BasisKind,
}

impl Field {
    pub fn new(coeffs: Vec<f64>, kind: BasisKind) -> Self {
        Field { coeffs, kind }
    }

    pub fn zeros(dim: usize, kind: BasisKind) -> Self {
        Field { coeffs: vec![0.0; dim], kind }
    }

    pub fn unit(dim: usize, index: usize, kind: BasisKind) -> Self {
        let mut f = Self::zeros(dim, kind);
        f.coeffs[index] = 1.0;
        f
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` (3 points).
const GAUSS3: [(f64, f64); 3] = [
    (-0.774_596_669_241_483_4, 5.0 / 9.0),
    (0.0, 8.0 / 9.0),
    (0.774_596_669_241_483_4, 5.0 / 9.0),
];

/// Orthonormal Neumann cosine basis `e₀ = 1/√L`, `e_k = √(2/L) cos(kπx/L)`.
#[derive(Clone, Debug)]
pub struct SpectralBasis {
    length: f64,
    modes: usize,
    eigenvalues: Vec<f64>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// Row-major `nodes.len() x (modes + 1)` matrix of `e_k(x_q)`.
    synthesis: Vec<f64>,
}

impl SpectralBasis {
    /// Basis with modes `0..=n` and the default collocation grid.
    pub fn new(length: f64, n: usize) -> Result<Self> {
        Self::with_quadrature(length, n, 2 * (n + 1))
    }

    /// Basis with a collocation grid of `intervals` equal subintervals.
    pub fn with_quadrature(length: f64, n: usize, intervals: usize) -> Result<Self> {
        if !(length > 0.0) || !length.is_finite() {
            return invalid(format!("domain length must be positive, got {length}"));
        }
        if n == 0 {
            return invalid("spectral basis needs at least one non-constant mode (n >= 1)");
        }
        if intervals + 1 < 2 * (n + 1) {
            return invalid(format!(
                "collocation grid of {intervals} intervals is too coarse for n = {n}"
            ));
        }
        let eigenvalues = (0..=n).map(|k| (k as f64 * PI / length).powi(2)).collect();
        let h = length / intervals as f64;
        let nodes: Vec<f64> = (0..=intervals).map(|q| q as f64 * h).collect();
        let mut weights = vec![h; intervals + 1];
        weights[0] = 0.5 * h;
        weights[intervals] = 0.5 * h;
        let dim = n + 1;
        let mut synthesis = vec![0.0; nodes.len() * dim];
        for (q, &x) in nodes.iter().enumerate() {
            for k in 0..dim {
                synthesis[q * dim + k] = basis_function(length, k, x);
            }
        }
        Ok(SpectralBasis { length, modes: n, eigenvalues, nodes, weights, synthesis })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Highest mode index `n`.
    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn dim(&self) -> usize {
        self.modes + 1
    }

    /// Neumann–Laplacian eigenvalues `λ_k = (kπ/L)²`.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn quad_nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.weights
    }

    /// Value of `e_k` at `x`.
    pub fn value(&self, k: usize, x: f64) -> f64 {
        basis_function(self.length, k, x)
    }

    /// Values of the expansion on the collocation grid.
    pub fn synthesize(&self, coeffs: &[f64], out: &mut [f64]) {
        let dim = self.dim();
        for (q, o) in out.iter_mut().enumerate().take(self.nodes.len()) {
            *o = dot(&self.synthesis[q * dim..(q + 1) * dim], coeffs);
        }
    }

    /// `Eᵀ (w ∘ v)`: quadrature of `v` against every basis function.
    pub fn analyze(&self, values: &[f64], out: &mut [f64]) {
        let dim = self.dim();
        out[..dim].iter_mut().for_each(|o| *o = 0.0);
        for (q, (&v, &w)) in values.iter().zip(&self.weights).enumerate() {
            let s = v * w;
            if s != 0.0 {
                crate::linalg::axpy(s, &self.synthesis[q * dim..(q + 1) * dim], &mut out[..dim]);
            }
        }
    }
}

fn basis_function(length: f64, k: usize, x: f64) -> f64 {
    if k == 0 {
        (1.0 / length).sqrt()
    } else {
        (2.0 / length).sqrt() * (k as f64 * PI * x / length).cos()
    }
}

/// Eigenvalue count and quadrature grid of the spectral basis.
pub fn spectral_basis(length: f64, n: usize) -> Result<SpectralBasis> {
    SpectralBasis::new(length, n)
}

/// Galerkin coefficients of a function given by its values on the basis
/// collocation grid.
pub fn project_spectral(samples: &[f64], basis: &SpectralBasis) -> Result<Field> {
    if samples.len() != basis.nodes.len() {
        return invalid(format!(
            "expected {} samples on the collocation grid, got {}",
            basis.nodes.len(),
            samples.len()
        ));
    }
    let mut coeffs = vec![0.0; basis.dim()];
    basis.analyze(samples, &mut coeffs);
    Ok(Field::new(coeffs, BasisKind::Spectral))
}

/// Treatment of the boundary nodes in the hat-function basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FemBoundary {
    /// `n + 1` nodes including half hats at `x = 0` and `x = L`.
    HalfHats,
    /// Hats centred at nodes `1..=n` only: no basis function peaks at `x = 0`.
    LeftTruncated,
}

/// Uniform piecewise-linear finite elements with mass and stiffness matrices.
#[derive(Clone, Debug)]
pub struct FemBasis {
    length: f64,
    elements: usize,
    boundary: FemBoundary,
    nodes: Vec<f64>,
    lumped: Vec<f64>,
    mass: SymTridiag,
    stiffness: SymTridiag,
    mass_chol: BidiagCholesky,
}

impl FemBasis {
    pub fn new(length: f64, n: usize) -> Result<Self> {
        Self::with_boundary(length, n, FemBoundary::HalfHats)
    }

    pub fn with_boundary(length: f64, n: usize, boundary: FemBoundary) -> Result<Self> {
        if !(length > 0.0) || !length.is_finite() {
            return invalid(format!("domain length must be positive, got {length}"));
        }
        if n < 2 {
            return invalid(format!("finite-element mesh needs at least 2 elements, got {n}"));
        }
        let h = length / n as f64;
        let mut mass = SymTridiag { diag: vec![2.0 * h / 3.0; n + 1], off: vec![h / 6.0; n] };
        mass.diag[0] = h / 3.0;
        mass.diag[n] = h / 3.0;
        let mut stiffness = SymTridiag { diag: vec![2.0 / h; n + 1], off: vec![-1.0 / h; n] };
        stiffness.diag[0] = 1.0 / h;
        stiffness.diag[n] = 1.0 / h;
        let mut nodes: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
        nodes[n] = length;
        let mut lumped = vec![h; n + 1];
        lumped[0] = 0.5 * h;
        lumped[n] = 0.5 * h;
        if boundary == FemBoundary::LeftTruncated {
            mass = mass.without_first();
            stiffness = stiffness.without_first();
            nodes.remove(0);
            lumped.remove(0);
            // the hat at x = h now covers [0, 2h] in full
            lumped[0] = h;
        }
        let mass_chol = mass
            .cholesky()
            .ok_or_else(|| Error::Internal("mass matrix is not positive definite".into()))?;
        Ok(FemBasis { length, elements: n, boundary, nodes, lumped, mass, stiffness, mass_chol })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn elements(&self) -> usize {
        self.elements
    }

    pub fn boundary(&self) -> FemBoundary {
        self.boundary
    }

    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    pub fn mesh_width(&self) -> f64 {
        self.length / self.elements as f64
    }

    /// Positions of the basis nodes.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Lumped masses `∫ φᵢ`, the trapezoidal weights of the nodal grid.
    pub fn lumped_mass(&self) -> &[f64] {
        &self.lumped
    }

    pub fn mass(&self) -> &SymTridiag {
        &self.mass
    }

    pub fn stiffness(&self) -> &SymTridiag {
        &self.stiffness
    }

    pub fn mass_cholesky(&self) -> &BidiagCholesky {
        &self.mass_chol
    }

    /// Value of the piecewise-linear interpolant of `coeffs` at `x`.
    pub fn interpolate(&self, coeffs: &[f64], x: f64) -> f64 {
        let h = self.mesh_width();
        let e = ((x / h).floor() as usize).min(self.elements - 1);
        let s = (x - e as f64 * h) / h;
        let offset = match self.boundary {
            FemBoundary::HalfHats => 0,
            FemBoundary::LeftTruncated => 1,
        };
        let at = |node: usize| if node < offset { 0.0 } else { coeffs[node - offset] };
        at(e) * (1.0 - s) + at(e + 1) * s
    }
}

/// Mass and stiffness matrices of the uniform hat basis with half hats at both ends.
pub fn fem_assemble(length: f64, n: usize) -> Result<FemBasis> {
    FemBasis::new(length, n)
}

/// L² projection of the piecewise-linear interpolant of nodal samples:
/// solves `M c = b` with `b` the load vector of the interpolant.
pub fn l2_project_fem(values: &[f64], basis: &FemBasis) -> Result<Field> {
    if values.len() != basis.dim() {
        return invalid(format!("expected {} nodal values, got {}", basis.dim(), values.len()));
    }
    let mut b = vec![0.0; basis.dim()];
    basis.mass.mul(values, &mut b);
    basis.mass_chol.solve_in_place(&mut b);
    Ok(Field::new(b, BasisKind::Fem))
}

/// L² projection of an arbitrary function; the load vector is integrated
/// with three-point Gauss rules on `refine` sub-panels per element.
pub fn l2_project_fem_fn(f: impl Fn(f64) -> f64, basis: &FemBasis, refine: usize) -> Field {
    let refine = refine.max(1);
    let h = basis.mesh_width();
    let n = basis.elements;
    let mut load = vec![0.0; n + 1];
    for e in 0..n {
        let x0 = e as f64 * h;
        let ph = h / refine as f64;
        for p in 0..refine {
            let a = x0 + p as f64 * ph;
            for (g, w) in GAUSS3 {
                let x = a + 0.5 * ph * (g + 1.0);
                let s = (x - x0) / h;
                let fx = f(x) * w * 0.5 * ph;
                load[e] += fx * (1.0 - s);
                load[e + 1] += fx * s;
            }
        }
    }
    if basis.boundary == FemBoundary::LeftTruncated {
        load.remove(0);
    }
    basis.mass_chol.solve_in_place(&mut load);
    Field::new(load, BasisKind::Fem)
}

/// Either discretization, with the operations the solvers need.
#[derive(Clone, Debug)]
pub enum Space {
    Spectral(SpectralBasis),
    Fem(FemBasis),
}

impl From<SpectralBasis> for Space {
    fn from(b: SpectralBasis) -> Self {
        Space::Spectral(b)
    }
}

impl From<FemBasis> for Space {
    fn from(b: FemBasis) -> Self {
        Space::Fem(b)
    }
}

impl Space {
    pub fn kind(&self) -> BasisKind {
        match self {
            Space::Spectral(_) => BasisKind::Spectral,
            Space::Fem(_) => BasisKind::Fem,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Space::Spectral(b) => b.dim(),
            Space::Fem(b) => b.dim(),
        }
    }

    pub fn length(&self) -> f64 {
        match self {
            Space::Spectral(b) => b.length(),
            Space::Fem(b) => b.length(),
        }
    }

    /// Collocation points for pointwise maps.
    pub fn points(&self) -> &[f64] {
        match self {
            Space::Spectral(b) => b.quad_nodes(),
            Space::Fem(b) => b.nodes(),
        }
    }

    /// Trapezoidal weights of [`Space::points`].
    pub fn point_weights(&self) -> &[f64] {
        match self {
            Space::Spectral(b) => b.quad_weights(),
            Space::Fem(b) => b.lumped_mass(),
        }
    }

    pub fn check(&self, field: &Field) -> Result<()> {
        if field.kind != self.kind() || field.len() != self.dim() {
            return invalid(format!(
                "field ({}, {} coefficients) does not belong to the {} basis of dimension {}",
                field.kind.name(),
                field.len(),
                self.kind().name(),
                self.dim()
            ));
        }
        Ok(())
    }

    /// Values at the collocation points.
    pub fn to_points(&self, coeffs: &[f64], out: &mut [f64]) {
        match self {
            Space::Spectral(b) => b.synthesize(coeffs, out),
            Space::Fem(_) => out.copy_from_slice(coeffs),
        }
    }

    /// Euclidean gradient of `u ↦ Σ_q w_q h(u(x_q))` given the pointwise
    /// derivative values `h'(u(x_q))`.
    pub fn dual_from_points(&self, values: &[f64], out: &mut [f64]) {
        match self {
            Space::Spectral(b) => b.analyze(values, out),
            Space::Fem(b) => {
                for ((o, v), w) in out.iter_mut().zip(values).zip(b.lumped_mass()) {
                    *o = v * w;
                }
            }
        }
    }

    /// Galerkin projection of a pointwise function given on the collocation points.
    pub fn project_points(&self, values: &[f64], out: &mut [f64]) {
        match self {
            Space::Spectral(b) => b.analyze(values, out),
            Space::Fem(_) => out.copy_from_slice(values),
        }
    }

    /// Applies the discrete inner-product matrix `W` (identity for the
    /// orthonormal basis, lumped masses for hats).
    pub fn apply_metric(&self, g: &[f64], out: &mut [f64]) {
        match self {
            Space::Spectral(_) => out.copy_from_slice(g),
            Space::Fem(b) => {
                for ((o, v), w) in out.iter_mut().zip(g).zip(b.lumped_mass()) {
                    *o = v * w;
                }
            }
        }
    }

    /// `⟨a, b⟩` in the discrete L² inner product.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Space::Spectral(_) => dot(a, b),
            Space::Fem(basis) => a.iter().zip(b).zip(basis.lumped_mass()).map(|((x, y), w)| x * y * w).sum(),
        }
    }

    pub fn norm_sq(&self, a: &[f64]) -> f64 {
        self.inner(a, a)
    }

    /// Galerkin projection of an arbitrary function, integrated accurately
    /// (composite Gauss rules) rather than on the collocation grid.
    pub fn project_fn(&self, f: impl Fn(f64) -> f64) -> Field {
        match self {
            Space::Spectral(b) => {
                let panels = 64 * (b.modes + 1);
                let ph = b.length / panels as f64;
                let mut coeffs = vec![0.0; b.dim()];
                for p in 0..panels {
                    let a = p as f64 * ph;
                    for (g, w) in GAUSS3 {
                        let x = a + 0.5 * ph * (g + 1.0);
                        let fx = f(x) * w * 0.5 * ph;
                        for (k, c) in coeffs.iter_mut().enumerate() {
                            *c += fx * b.value(k, x);
                        }
                    }
                }
                Field::new(coeffs, BasisKind::Spectral)
            }
            Space::Fem(b) => l2_project_fem_fn(f, b, 8),
        }
    }

    /// Evaluates a field at arbitrary points in `[0, L]`.
    pub fn evaluate(&self, field: &Field, points: &[f64]) -> Result<Vec<f64>> {
        evaluate_field(field, points, self)
    }
}

/// Pointwise synthesis (spectral) or hat interpolation (finite elements).
pub fn evaluate_field(field: &Field, points: &[f64], space: &Space) -> Result<Vec<f64>> {
    space.check(field)?;
    let length = space.length();
    if let Some(x) = points.iter().find(|&&x| !(0.0..=length).contains(&x)) {
        return invalid(format!("point {x} lies outside [0, {length}]"));
    }
    Ok(match space {
        Space::Spectral(b) => points
            .iter()
            .map(|&x| field.coeffs.iter().enumerate().map(|(k, c)| c * b.value(k, x)).sum())
            .collect(),
        Space::Fem(b) => points.iter().map(|&x| b.interpolate(&field.coeffs, x)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_follow_the_neumann_formula() {
        let b = spectral_basis(1.0, 4).unwrap();
        assert_eq!(b.eigenvalues()[0], 0.0);
        assert!((b.eigenvalues()[1] - PI * PI).abs() < 1e-12);
        assert!((b.eigenvalues()[1] - 9.8696).abs() < 1e-4);
        let b = spectral_basis(20.0, 5).unwrap();
        assert!((b.eigenvalues()[3] - 0.22207).abs() < 1e-5);
        assert!(b.eigenvalues().windows(2).all(|w| w[0] < w[1]));
        assert!(b.quad_nodes().len() >= 2 * b.dim());
    }

    #[test]
    fn spectral_basis_rejects_bad_arguments() {
        assert!(matches!(spectral_basis(0.0, 3), Err(Error::InvalidArgument(_))));
        assert!(matches!(spectral_basis(-1.0, 3), Err(Error::InvalidArgument(_))));
        assert!(matches!(spectral_basis(1.0, 0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn constant_projects_onto_first_mode() {
        let b = spectral_basis(3.0, 6).unwrap();
        let samples = vec![2.5; b.quad_nodes().len()];
        let f = project_spectral(&samples, &b).unwrap();
        assert!((f.coeffs[0] - 2.5 * 3.0f64.sqrt()).abs() < 1e-13);
        assert!(f.coeffs[1..].iter().all(|c| c.abs() < 1e-13));
    }

    #[test]
    fn basis_function_projects_to_unit_vector() {
        let b = spectral_basis(2.0, 5).unwrap();
        let samples: Vec<f64> = b.quad_nodes().iter().map(|&x| b.value(2, x)).collect();
        let f = project_spectral(&samples, &b).unwrap();
        for (k, c) in f.coeffs.iter().enumerate() {
            let e = if k == 2 { 1.0 } else { 0.0 };
            assert!((c - e).abs() < 1e-13, "k={k} c={c}");
        }
    }

    #[test]
    fn projection_rejects_grid_mismatch() {
        let b = spectral_basis(1.0, 3).unwrap();
        assert!(project_spectral(&[1.0, 2.0], &b).is_err());
    }

    #[test]
    fn linear_function_first_coefficient() {
        // high-resolution oracle: √2 ∫₀¹ x cos(πx) dx by composite Simpson
        let m = 20_000;
        let h = 1.0 / m as f64;
        let g = |x: f64| 2f64.sqrt() * x * (PI * x).cos();
        let mut oracle = g(0.0) + g(1.0);
        for i in 1..m {
            oracle += if i % 2 == 1 { 4.0 } else { 2.0 } * g(i as f64 * h);
        }
        oracle *= h / 3.0;
        assert!((oracle - (-0.28658)).abs() < 1e-5);
        let b = SpectralBasis::with_quadrature(1.0, 8, 4096).unwrap();
        let samples: Vec<f64> = b.quad_nodes().to_vec();
        let f = project_spectral(&samples, &b).unwrap();
        assert!((f.coeffs[1] - oracle).abs() < 1e-7);
        let space = Space::Spectral(spectral_basis(1.0, 8).unwrap());
        assert!((space.project_fn(|x| x).coeffs[1] - oracle).abs() < 1e-10);
    }

    #[test]
    fn evaluation_of_simple_fields() {
        let l = 4.0;
        let space = Space::Spectral(spectral_basis(l, 5).unwrap());
        let c = 1.7;
        let mut coeffs = vec![0.0; 6];
        coeffs[0] = c * l.sqrt();
        let f = Field::new(coeffs, BasisKind::Spectral);
        let v = space.evaluate(&f, &[0.0, 1.3, 4.0]).unwrap();
        assert!(v.iter().all(|x| (x - c).abs() < 1e-13));
        let e1 = Field::unit(6, 1, BasisKind::Spectral);
        let v = space.evaluate(&e1, &[0.0]).unwrap();
        assert!((v[0] - (2.0 / l).sqrt()).abs() < 1e-14);
        assert!(space.evaluate(&e1, &[4.5]).is_err());
        assert!(space.evaluate(&e1, &[-0.1]).is_err());
    }

    #[test]
    fn evaluate_then_project_is_identity_on_the_subspace() {
        let b = spectral_basis(2.0, 7).unwrap();
        let coeffs: Vec<f64> = (0..8).map(|k| (k as f64 * 0.37).sin()).collect();
        let field = Field::new(coeffs.clone(), BasisKind::Spectral);
        let space = Space::Spectral(b.clone());
        let values = space.evaluate(&field, b.quad_nodes()).unwrap();
        let back = project_spectral(&values, &b).unwrap();
        for (a, e) in back.coeffs.iter().zip(&coeffs) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn fem_matrices() {
        let b = fem_assemble(1.0, 2).unwrap();
        assert!((b.mass().diag[1] - 1.0 / 3.0).abs() < 1e-15);
        for n in [2, 5, 17] {
            let b = fem_assemble(2.5, n).unwrap();
            let ones = vec![1.0; b.dim()];
            let mut out = vec![0.0; b.dim()];
            b.stiffness().mul(&ones, &mut out);
            assert!(out.iter().all(|v| v.abs() < 1e-12));
            // total mass equals the domain length
            b.mass().mul(&ones, &mut out);
            assert!((out.iter().sum::<f64>() - 2.5).abs() < 1e-12);
        }
        assert!(matches!(fem_assemble(1.0, 1), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn fem_projection_reproduces_constants_and_hats() {
        let b = fem_assemble(1.0, 10).unwrap();
        let f = l2_project_fem(&[1.0; 11], &b).unwrap();
        assert!(f.coeffs.iter().all(|c| (c - 1.0).abs() < 1e-13));
        let f = l2_project_fem_fn(|_| 1.0, &b, 2);
        assert!(f.coeffs.iter().all(|c| (c - 1.0).abs() < 1e-13));
        let hat3 = |x: f64| (1.0 - (x / b.mesh_width() - 3.0).abs()).max(0.0);
        let f = l2_project_fem_fn(hat3, &b, 1);
        for (i, c) in f.coeffs.iter().enumerate() {
            assert!((c - if i == 3 { 1.0 } else { 0.0 }).abs() < 1e-13);
        }
    }

    #[test]
    fn fem_projection_of_parabola() {
        let b = fem_assemble(1.0, 100).unwrap();
        let f = l2_project_fem_fn(|x| x * x, &b, 1);
        // residual by fine composite Simpson
        let m = 100_000;
        let h = 1.0 / m as f64;
        let r = |x: f64| (b.interpolate(&f.coeffs, x) - x * x).powi(2);
        let mut s = r(0.0) + r(1.0);
        for i in 1..m {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * r(i as f64 * h);
        }
        let err = (s * h / 3.0).sqrt();
        assert!(err <= 1e-3, "err = {err}");
    }

    #[test]
    fn truncated_fem_basis_drops_the_left_node() {
        let b = FemBasis::with_boundary(1.0, 4, FemBoundary::LeftTruncated).unwrap();
        assert_eq!(b.dim(), 4);
        assert_eq!(b.nodes()[0], 0.25);
        // constants are no longer representable
        let f = l2_project_fem_fn(|_| 1.0, &b, 4);
        assert!(b.interpolate(&f.coeffs, 0.0).abs() < 1e-14);
    }
}
