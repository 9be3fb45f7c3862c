//! Small dense helpers and symmetric tridiagonal matrices.

/// Dot product with four independent accumulators so the loop vectorizes.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += a * x`
#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `out = m x` for a row-major `rows x cols` matrix.
pub fn matvec(m: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(m.len(), rows * cols);
    for (r, o) in out.iter_mut().enumerate().take(rows) {
        *o = dot(&m[r * cols..(r + 1) * cols], x);
    }
}

/// `out = mᵀ y` for a row-major `rows x cols` matrix.
pub fn matvec_t(m: &[f64], rows: usize, cols: usize, y: &[f64], out: &mut [f64]) {
    out[..cols].iter_mut().for_each(|o| *o = 0.0);
    for r in 0..rows {
        if y[r] != 0.0 {
            axpy(y[r], &m[r * cols..(r + 1) * cols], &mut out[..cols]);
        }
    }
}

/// Symmetric tridiagonal matrix stored as its diagonal and first off-diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.abs_diff(j) {
            0 => self.diag[i],
            1 => self.off[i.min(j)],
            _ => 0.0,
        }
    }

    pub fn mul(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.off[i] * x[i + 1];
            }
            out[i] = s;
        }
    }

    /// `self + c * other`
    pub fn add_scaled(&self, c: f64, other: &SymTridiag) -> SymTridiag {
        SymTridiag {
            diag: self.diag.iter().zip(&other.diag).map(|(a, b)| a + c * b).collect(),
            off: self.off.iter().zip(&other.off).map(|(a, b)| a + c * b).collect(),
        }
    }

    /// Drops the first row and column.
    pub fn without_first(&self) -> SymTridiag {
        SymTridiag { diag: self.diag[1..].to_vec(), off: self.off[1..].to_vec() }
    }

    /// Cholesky factor `L` (lower bidiagonal) with `self = L Lᵀ`.
    pub fn cholesky(&self) -> Option<BidiagCholesky> {
        let n = self.dim();
        let mut d = vec![0.0; n];
        let mut l = vec![0.0; n.saturating_sub(1)];
        for i in 0..n {
            let mut piv = self.diag[i];
            if i > 0 {
                piv -= l[i - 1] * l[i - 1];
            }
            if !(piv > 0.0) {
                return None;
            }
            d[i] = piv.sqrt();
            if i + 1 < n {
                l[i] = self.off[i] / d[i];
            }
        }
        Some(BidiagCholesky { diag: d, sub: l })
    }
}

/// Lower bidiagonal Cholesky factor of a symmetric positive definite tridiagonal matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct BidiagCholesky {
    pub diag: Vec<f64>,
    pub sub: Vec<f64>,
}

impl BidiagCholesky {
    /// `out = L z`
    pub fn mul_lower(&self, z: &[f64], out: &mut [f64]) {
        for i in 0..self.diag.len() {
            out[i] = self.diag[i] * z[i] + if i > 0 { self.sub[i - 1] * z[i - 1] } else { 0.0 };
        }
    }

    /// Solves `L Lᵀ x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.diag.len();
        for i in 0..n {
            if i > 0 {
                b[i] -= self.sub[i - 1] * b[i - 1];
            }
            b[i] /= self.diag[i];
        }
        for i in (0..n).rev() {
            if i + 1 < n {
                b[i] -= self.sub[i] * b[i + 1];
            }
            b[i] /= self.diag[i];
        }
    }
}
